"""Linear algebra over the chain rings Z/l^n.

Kernels over Z/l^n are modules that need not be free, so every kernel routine
returns a generating set in Howell normal form rather than a basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..arith import ResidueElt, ResidueRing
from ..errors import DimensionMismatch

_MAX_MODULUS = 1 << 31


@dataclass(frozen=True, eq=False)
class MatrixR:
    """Matrix over one residue ring, entries held reduced in an int64 array."""

    data: np.ndarray
    ring: ResidueRing

    def __post_init__(self):
        if self.ring.modulus >= _MAX_MODULUS:
            raise ValueError("modulus too large for int64 elimination")
        arr = np.array(self.data, dtype=np.int64, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
        arr %= self.ring.modulus
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_rows(cls, rows, ring: ResidueRing, ncols: int | None = None) -> "MatrixR":
        rows = [[int(x) for x in r] for r in rows]
        if not rows:
            return cls(np.zeros((0, ncols or 0), dtype=np.int64), ring)
        return cls(np.array(rows, dtype=np.int64), ring)

    @classmethod
    def identity(cls, n: int, ring: ResidueRing) -> "MatrixR":
        return cls(np.eye(n, dtype=np.int64), ring)

    @property
    def shape(self):
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __getitem__(self, ij) -> ResidueElt:
        return self.ring(int(self.data[ij]))

    def tolist(self) -> list[list[int]]:
        return self.data.tolist()

    def __eq__(self, other):
        if not isinstance(other, MatrixR):
            return NotImplemented
        return self.ring == other.ring and self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.ring, self.shape, self.data.tobytes()))

    def __repr__(self):
        return f"MatrixR({self.tolist()!r} over {self.ring})"

    def _check(self, other: "MatrixR"):
        if other.ring != self.ring:
            raise DimensionMismatch(f"rings differ: {self.ring} vs {other.ring}")

    def __matmul__(self, other: "MatrixR") -> "MatrixR":
        self._check(other)
        if self.cols != other.rows:
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        return MatrixR(matmul_mod(self.data, other.data, self.ring.modulus), self.ring)

    def __add__(self, other: "MatrixR") -> "MatrixR":
        self._check(other)
        return MatrixR(self.data + other.data, self.ring)

    def __sub__(self, other: "MatrixR") -> "MatrixR":
        self._check(other)
        return MatrixR(self.data - other.data, self.ring)

    def scale(self, c: int) -> "MatrixR":
        return MatrixR(self.data * (int(c) % self.ring.modulus), self.ring)

    def transpose(self) -> "MatrixR":
        return MatrixR(self.data.T, self.ring)

    def is_zero(self) -> bool:
        return not self.data.any()


def matmul_mod(a: np.ndarray, b: np.ndarray, modulus: int) -> np.ndarray:
    """(a @ b) mod modulus for reduced int64 inputs, chunked to avoid overflow."""
    a = np.asarray(a, dtype=np.int64) % modulus
    b = np.asarray(b, dtype=np.int64) % modulus
    inner = a.shape[1]
    step = max(1, ((1 << 62) // max(1, (modulus - 1) ** 2)))
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for s in range(0, inner, step):
        out += a[:, s : s + step] @ b[s : s + step, :]
        out %= modulus
    return out


@dataclass(frozen=True, eq=False)
class HowellForm:
    """Howell normal form ``H`` plus the pivot columns of its rows.

    ``transform`` lists the pivot column and l-adic valuation of each row; the
    row operations themselves are not retained.
    """

    H: MatrixR
    transform: tuple[tuple[int, int], ...] = field(default=())

    @property
    def pivots(self) -> list[int]:
        return [c for c, _ in self.transform]


def _valuation(x: int, ell: int, n: int) -> int:
    if x == 0:
        return n
    v = 0
    while x % ell == 0:
        x //= ell
        v += 1
    return v


def howell_rows(A: np.ndarray, ring: ResidueRing) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Canonical Howell generators of the row span of ``A`` over ``ring``."""
    mod, ell, n = ring.modulus, ring.ell, ring.n
    A = np.asarray(A, dtype=np.int64) % mod
    ncols = A.shape[1] if A.ndim == 2 else 0
    piv: dict[int, np.ndarray] = {}
    pval: dict[int, int] = {}
    stack = [row.copy() for row in A[::-1]]
    while stack:
        r = stack.pop()
        while True:
            nz = np.flatnonzero(r)
            if nz.size == 0:
                break
            j = int(nz[0])
            x = int(r[j])
            v = _valuation(x, ell, n)
            b = piv.get(j)
            if b is not None and v >= pval[j]:
                t = x // ell ** pval[j]
                r = (r - t * b) % mod
                continue
            unit = x // ell**v
            r = (r * pow(unit, -1, mod)) % mod
            piv[j] = r
            pval[j] = v
            if v > 0:
                stack.append((r * ell ** (n - v)) % mod)
            if b is None:
                break
            r = b
    cols = sorted(piv)
    for idx, j in enumerate(cols):
        r = piv[j]
        for j2 in cols[idx + 1 :]:
            t = int(r[j2]) // ell ** pval[j2]
            if t:
                r = (r - t * piv[j2]) % mod
        piv[j] = r
    if not cols:
        return np.zeros((0, ncols), dtype=np.int64), []
    return np.array([piv[j] for j in cols], dtype=np.int64), [(j, pval[j]) for j in cols]


def howell(A: MatrixR) -> HowellForm:
    H, info = howell_rows(A.data, A.ring)
    return HowellForm(MatrixR(H.reshape(len(info), A.cols), A.ring), tuple(info))


def kernel_rows(A: np.ndarray, ring: ResidueRing) -> np.ndarray:
    """Howell generators of {x : A x^T = 0} for a reduced int64 array ``A``."""
    A = np.asarray(A, dtype=np.int64)
    m, k = A.shape
    aug = np.concatenate([A.T % ring.modulus, np.eye(k, dtype=np.int64)], axis=1)
    H, info = howell_rows(aug, ring)
    keep = [i for i, (c, _) in enumerate(info) if c >= m]
    if not keep:
        return np.zeros((0, k), dtype=np.int64)
    return H[keep, m:]


def kernel_r(A: MatrixR) -> MatrixR:
    return MatrixR(kernel_rows(A.data, A.ring).reshape(-1, A.cols), A.ring)


def simultaneous_kernel_r(As: Sequence[MatrixR]) -> MatrixR:
    """Generators of the common right kernel, by stacking."""
    if not As:
        raise DimensionMismatch("need at least one matrix")
    ring, k = As[0].ring, As[0].cols
    for A in As:
        if A.ring != ring or A.cols != k:
            raise DimensionMismatch("matrices must share ring and column count")
    stacked = np.concatenate([A.data for A in As], axis=0)
    return MatrixR(kernel_rows(stacked, ring).reshape(-1, k), ring)


def refine_kernel(G: np.ndarray, image: np.ndarray, ring: ResidueRing) -> np.ndarray:
    """Sub-module of span(G) killed by a map, given the images of G's rows.

    ``image[i]`` is the image of ``G[i]``; the map is linear, so a combination
    ``c G`` is killed iff ``c image == 0``.  Returns Howell generators.
    """
    if G.shape[0] == 0:
        return G
    C = kernel_rows(np.asarray(image, dtype=np.int64).T, ring)
    if C.shape[0] == 0:
        return np.zeros((0, G.shape[1]), dtype=np.int64)
    new = matmul_mod(C, G, ring.modulus)
    H, _ = howell_rows(new, ring)
    return H.reshape(-1, G.shape[1])


def span_contains(H: np.ndarray, v: np.ndarray, ring: ResidueRing) -> bool:
    """Membership test against Howell generators ``H``."""
    mod, ell = ring.modulus, ring.ell
    v = np.asarray(v, dtype=np.int64) % mod
    for row in H:
        nz = np.flatnonzero(row)
        if nz.size == 0:
            continue
        j = int(nz[0])
        x = int(v[j])
        if x == 0:
            continue
        p = int(row[j])
        if x % p:
            return False
        v = (v - (x // p) * row) % mod
    return not v.any()


def is_primitive(v: Sequence[int], ring: ResidueRing) -> bool:
    """True when some coordinate is a unit, i.e. v is not l times a vector."""
    return any(int(x) % ring.ell for x in v)
