"""Exact dense matrices over Q.

Entries are stored as a numpy object array of Python ints over one positive
common denominator, kept in lowest terms.  Elimination is fraction-free on
integer rows; rows are divided by their content after every update so the
entries stay bounded by the minors of the input.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Sequence

import numpy as np

from ..errors import DimensionMismatch, SubspaceNotInvariant

_INT64_SAFE = 1 << 62


def _as_object(a) -> np.ndarray:
    arr = np.empty(np.shape(a), dtype=object)
    flat = arr.reshape(-1)
    for i, x in enumerate(np.asarray(a, dtype=object).reshape(-1)):
        flat[i] = int(x)
    return arr


def _max_abs(a: np.ndarray) -> int:
    if a.size == 0:
        return 0
    return max(abs(int(x)) for x in a.flat)


def int_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact product of integer matrices, through int64 when that cannot overflow."""
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    inner = a.shape[1]
    if inner == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=object)
    bound = _max_abs(a) * _max_abs(b) * inner
    if bound < _INT64_SAFE:
        out = a.astype(np.int64) @ b.astype(np.int64)
        return out.astype(object)
    return _as_object(a) @ _as_object(b)


class MatrixQ:
    """Immutable rational matrix ``num / den``."""

    __slots__ = ("num", "den")

    def __init__(self, num, den: int = 1):
        num = _as_object(num) if not (isinstance(num, np.ndarray) and num.dtype == object) else num.copy()
        if num.ndim != 2:
            raise ValueError("MatrixQ needs a 2-d array")
        den = int(den)
        if den == 0:
            raise ZeroDivisionError("zero denominator")
        if den < 0:
            num, den = -num, -den
        g = den
        for x in num.flat:
            if g == 1:
                break
            g = gcd(g, int(x))
        if g > 1:
            num = num // g
            den //= g
        num.setflags(write=False)
        self.num = num
        self.den = den

    # construction ---------------------------------------------------------
    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], ncols: int | None = None) -> "MatrixQ":
        rows = [list(r) for r in rows]
        if not rows:
            return cls(np.zeros((0, ncols or 0), dtype=object))
        fr = [[Fraction(x) for x in r] for r in rows]
        if len({len(r) for r in fr}) > 1:
            raise DimensionMismatch("ragged rows")
        den = 1
        for r in fr:
            for x in r:
                den = lcm(den, x.denominator)
        num = np.empty((len(fr), len(fr[0])), dtype=object)
        for i, r in enumerate(fr):
            for j, x in enumerate(r):
                num[i, j] = x.numerator * (den // x.denominator)
        return cls(num, den)

    @classmethod
    def zero(cls, rows: int, cols: int) -> "MatrixQ":
        return cls(np.zeros((rows, cols), dtype=object))

    @classmethod
    def identity(cls, n: int) -> "MatrixQ":
        num = np.zeros((n, n), dtype=object)
        for i in range(n):
            num[i, i] = 1
        return cls(num)

    # basic protocol -------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return self.num.shape

    @property
    def rows(self) -> int:
        return self.num.shape[0]

    @property
    def cols(self) -> int:
        return self.num.shape[1]

    def __getitem__(self, ij) -> Fraction:
        i, j = ij
        return Fraction(int(self.num[i, j]), self.den)

    def tolist(self) -> list[list[Fraction]]:
        return [[Fraction(int(x), self.den) for x in row] for row in self.num]

    def __repr__(self):
        return f"MatrixQ({self.tolist()!r})"

    def __eq__(self, other):
        if not isinstance(other, MatrixQ):
            return NotImplemented
        return self.shape == other.shape and self.den == other.den and bool(np.all(self.num == other.num))

    def __hash__(self):
        return hash((self.shape, self.den, tuple(self.num.flat)))

    def is_integral(self) -> bool:
        return self.den == 1

    def is_zero(self) -> bool:
        return all(x == 0 for x in self.num.flat)

    def integer_array(self) -> np.ndarray:
        if self.den != 1:
            raise ValueError("matrix has denominators")
        return self.num.copy()

    # arithmetic -----------------------------------------------------------
    def __add__(self, other: "MatrixQ") -> "MatrixQ":
        if self.shape != other.shape:
            raise DimensionMismatch(f"{self.shape} + {other.shape}")
        d = lcm(self.den, other.den)
        return MatrixQ(self.num * (d // self.den) + other.num * (d // other.den), d)

    def __neg__(self) -> "MatrixQ":
        return MatrixQ(-self.num, self.den)

    def __sub__(self, other: "MatrixQ") -> "MatrixQ":
        return self + (-other)

    def scale(self, c) -> "MatrixQ":
        c = Fraction(c)
        return MatrixQ(self.num * c.numerator, self.den * c.denominator)

    def __matmul__(self, other: "MatrixQ") -> "MatrixQ":
        return MatrixQ(int_matmul(self.num, other.num), self.den * other.den)

    def transpose(self) -> "MatrixQ":
        return MatrixQ(self.num.T.copy(), self.den)

    T = property(transpose)

    def minus_scalar(self, c) -> "MatrixQ":
        if self.rows != self.cols:
            raise DimensionMismatch("minus_scalar needs a square matrix")
        return self - MatrixQ.identity(self.rows).scale(c)

    def columns(self, idx: Sequence[int]) -> "MatrixQ":
        return MatrixQ(self.num[:, list(idx)], self.den)

    def row_slice(self, idx: Sequence[int]) -> "MatrixQ":
        return MatrixQ(self.num[list(idx), :], self.den)

    def rank(self) -> int:
        return len(rref_q(self)[0])

    def int_rows(self) -> list[list[int]]:
        """Rows scaled by the common denominator (same row space)."""
        return [[int(x) for x in row] for row in self.num]


def vstack(mats: Iterable[MatrixQ], ncols: int | None = None) -> MatrixQ:
    mats = list(mats)
    if not mats:
        return MatrixQ.zero(0, ncols or 0)
    cols = {m.cols for m in mats}
    if len(cols) != 1:
        raise DimensionMismatch("vstack needs equal column counts")
    d = 1
    for m in mats:
        d = lcm(d, m.den)
    num = np.concatenate([m.num * (d // m.den) for m in mats], axis=0) if any(m.rows for m in mats) else np.zeros((0, cols.pop()), dtype=object)
    return MatrixQ(num, d)


# ---------------------------------------------------------------------------
# elimination


def _content_divide(row: list[int]) -> list[int]:
    g = 0
    for x in row:
        if x:
            g = gcd(g, x)
            if g == 1:
                return row
    if g > 1:
        return [x // g for x in row]
    return row


def _int_rref(rows: list[list[int]], ncols: int) -> tuple[list[int], list[list[int]]]:
    """Fraction-free Gauss-Jordan; returns pivots and primitive integer rows."""
    rows = [_content_divide(list(r)) for r in rows if any(r)]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        best = None
        for i in range(r, len(rows)):
            x = rows[i][c]
            if x and (best is None or abs(x) < abs(rows[best][c])):
                best = i
                if abs(x) == 1:
                    break
        if best is None:
            continue
        rows[r], rows[best] = rows[best], rows[r]
        prow = rows[r]
        p = prow[c]
        for i in range(len(rows)):
            if i == r:
                continue
            x = rows[i][c]
            if x:
                g = gcd(p, x)
                a, b = p // g, x // g
                rows[i] = _content_divide([a * u - b * v for u, v in zip(rows[i], prow)])
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return pivots, rows[: len(pivots)]


def rref_q(A: MatrixQ) -> tuple[list[int], MatrixQ]:
    """Reduced row echelon form; zero rows are dropped from ``R``."""
    pivots, rows = _int_rref(A.int_rows(), A.cols)
    out = []
    for c, row in zip(pivots, rows):
        p = row[c]
        out.append([Fraction(x, p) for x in row])
    return pivots, MatrixQ.from_rows(out, A.cols) if out else MatrixQ.zero(0, A.cols)


def kernel_q(A: MatrixQ) -> MatrixQ:
    """Basis (as rows) of the right kernel {v : A v^T = 0}."""
    pivots, R = rref_q(A)
    pset = set(pivots)
    basis = []
    for f in range(A.cols):
        if f in pset:
            continue
        v = [Fraction(0)] * A.cols
        v[f] = Fraction(1)
        for i, c in enumerate(pivots):
            v[c] = -R[i, f]
        basis.append(v)
    return MatrixQ.from_rows(basis, A.cols) if basis else MatrixQ.zero(0, A.cols)


def row_space(A: MatrixQ) -> MatrixQ:
    return rref_q(A)[1]


def solve_left(B: MatrixQ, Y: MatrixQ) -> MatrixQ | None:
    """Return X with X @ B == Y, or None when no solution exists.

    ``B`` must have full row rank.
    """
    if B.cols != Y.cols:
        raise DimensionMismatch("solve_left: column mismatch")
    k = B.rows
    if k == 0:
        return MatrixQ.zero(Y.rows, 0) if Y.is_zero() else None
    aug = [row + [B.den if i == j else 0 for j in range(k)] for i, row in enumerate(B.int_rows())]
    pivots, rows = _int_rref(aug, B.cols + k)
    if len(pivots) != k or pivots[-1] >= B.cols:
        raise ValueError("solve_left needs a full-row-rank matrix")
    # rows are [R | T'] scaled by the pivot; T = T'/pivot satisfies T B = R.
    tinv = MatrixQ.from_rows([[Fraction(x, row[c]) for x in row[B.cols :]] for c, row in zip(pivots, rows)])
    X = Y.columns(pivots) @ tinv
    if X @ B != Y:
        return None
    return X


def restrict(T: MatrixQ, B: MatrixQ) -> MatrixQ:
    """Matrix of the row-vector map ``v -> v T`` on the row span of ``B``.

    Raises SubspaceNotInvariant when ``B T`` leaves that span.
    """
    R = solve_left(B, B @ T)
    if R is None:
        raise SubspaceNotInvariant("operator does not preserve the subspace")
    return R


def charpoly(A: MatrixQ) -> list[Fraction]:
    """Characteristic polynomial det(x I - A), coefficients low to high.

    Faddeev-LeVerrier; adequate for the small matrices it is used on.
    """
    n = A.rows
    if n != A.cols:
        raise DimensionMismatch("charpoly needs a square matrix")
    coeffs = [Fraction(0)] * (n + 1)
    coeffs[n] = Fraction(1)
    Mk = MatrixQ.zero(n, n)
    I = MatrixQ.identity(n)
    for k in range(1, n + 1):
        Mk = A @ Mk + I.scale(coeffs[n - k + 1])
        AM = A @ Mk
        tr = sum((AM[i, i] for i in range(n)), Fraction(0))
        coeffs[n - k] = -tr / k
    return coeffs
