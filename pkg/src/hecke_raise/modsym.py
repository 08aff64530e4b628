"""Weight-2 modular symbols for Gamma_0(M) through Manin symbols.

A Manin symbol ``(c : d)`` in P^1(Z/M) stands for ``g{0, oo}`` where ``g`` is
any matrix in SL_2(Z) with bottom row congruent to ``(c, d)``.  The space is
the quotient of the free module on P^1(Z/M) by

* ``x + x*sigma = 0`` with ``sigma = [[0, -1], [1, 0]]``,
* ``x + x*tau + x*tau^2 = 0`` with ``tau = [[0, -1], [1, -1]]``,
* ``x - x*iota = 0`` with ``iota = [[-1, 0], [0, 1]]`` for the plus quotient.

The ambient basis is a set of Manin symbols left free by the elimination; when
every Manin symbol has an integral expression in it, that basis also spans the
integral lattice generated by the Manin symbols.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
import threading
from collections import OrderedDict
from typing import Callable
from math import gcd, lcm

import numpy as np
from scipy import sparse

from .arith import P1Table, divisors, euler_phi, factor, p1_enumerate, psi, xgcd
from .errors import BadLevel, LatticeError
from .linalg.integer import hnf, integer_left_kernel
from .linalg.rational import MatrixQ, solve_left

NORMALIZATION_VERSION = "p1-lexmin/manin-v1"


# ---------------------------------------------------------------------------
# closed-form genus oracle


def _kronecker_minus1(p: int) -> int:
    if p == 2:
        return 0
    return 1 if p % 4 == 1 else -1


def _kronecker_minus3(p: int) -> int:
    if p == 3:
        return 0
    return 1 if p % 3 == 1 else -1


def elliptic_points(M: int) -> tuple[int, int]:
    """Numbers of elliptic points of order 2 and 3 on X_0(M)."""
    f = factor(M) if M > 1 else {}
    nu2 = 0 if M % 4 == 0 else int(np.prod([1 + _kronecker_minus1(p) for p in f])) if f else 1
    nu3 = 0 if M % 9 == 0 else int(np.prod([1 + _kronecker_minus3(p) for p in f])) if f else 1
    return nu2, nu3


def num_cusps(M: int) -> int:
    return sum(euler_phi(gcd(d, M // d)) for d in divisors(M))


def genus_x0(M: int) -> int:
    if M < 1:
        raise BadLevel(f"level must be >= 1, got {M}")
    nu2, nu3 = elliptic_points(M)
    g = 1 + Fraction(psi(M), 12) - Fraction(nu2, 4) - Fraction(nu3, 3) - Fraction(num_cusps(M), 2)
    assert g.denominator == 1 and g >= 0
    return int(g)


# ---------------------------------------------------------------------------
# SL_2(Z) helpers and the symbol -> Manin conversion


def lift_to_sl2z(c: int, d: int, M: int) -> tuple[int, int, int, int]:
    """A matrix (a, b, c', d') in SL_2(Z) with (c', d') = (c, d) mod M."""
    if M == 1:
        return (1, 0, 0, 1)
    c %= M
    d %= M
    if c == 0:
        c = M
    while gcd(c, d) != 1:
        d += M
    g, x, y = xgcd(d, c)
    # d*x + c*y = 1, so [[x, -y], [c, d]] has determinant 1
    return (x, -y, c, d)


def continued_fraction_symbols(a: int, b: int) -> list[tuple[int, int]]:
    """Manin bottom rows (c, d) with {0, a/b} = sum of the symbols (c : d)."""
    if b == 0:
        return [(0, 1)]
    if b < 0:
        a, b = -a, -b
    if a == 0:
        return []
    out = [(0, 1)]
    q_prev2, q_prev = 1, 0  # q_{k-2}, q_{k-1}
    sign = -1  # (-1)^(k-1) at k = 0
    x, y = a, b
    while True:
        t, r = divmod(x, y)
        q_k = t * q_prev + q_prev2
        out.append((q_k, sign * q_prev))
        if r == 0:
            break
        x, y = y, r
        q_prev2, q_prev = q_prev, q_k
        sign = -sign
    return out


@dataclass(frozen=True)
class CuspClasses:
    """Gamma_0(M) equivalence of cusps, optionally modulo x ~ -x."""

    M: int
    plus: bool
    reps: list = field(default_factory=list)
    _by_gcd: dict = field(default_factory=dict)
    _parent: list = field(default_factory=list)

    @staticmethod
    def _normal(a: int, c: int) -> tuple[int, int]:
        if c < 0:
            a, c = -a, -c
        if c == 0:
            return (1, 0)
        g = gcd(a, c)
        return (a // g, c // g)

    def _s(self, a: int, c: int) -> int:
        if c <= 1:
            return 1 if c == 0 else 0
        return pow(a, -1, c)

    def _equivalent(self, x: tuple[int, int], y: tuple[int, int]) -> bool:
        (a1, c1), (a2, c2) = x, y
        m = gcd(c1 * c2, self.M)
        return (self._s(a1, c1) * c2 - self._s(a2, c2) * c1) % m == 0

    def _raw_index(self, a: int, c: int) -> int:
        x = self._normal(a, c)
        g = gcd(x[1], self.M)
        bucket = self._by_gcd.setdefault(g, [])
        for i in bucket:
            if self._equivalent(self.reps[i], x):
                return i
        self.reps.append(x)
        self._parent.append(len(self.reps) - 1)
        bucket.append(len(self.reps) - 1)
        return len(self.reps) - 1

    def _find(self, i: int) -> int:
        while self._parent[i] != i:
            self._parent[i] = self._parent[self._parent[i]]
            i = self._parent[i]
        return i

    def index(self, a: int, c: int) -> int:
        i = self._raw_index(a, c)
        if self.plus:
            j = self._raw_index(-a, c)
            ri, rj = self._find(i), self._find(j)
            if ri != rj:
                lo, hi = min(ri, rj), max(ri, rj)
                self._parent[hi] = lo
            return self._find(i)
        return i

    def root(self, i: int) -> int:
        return self._find(i)

    @property
    def count(self) -> int:
        return len({self._find(i) for i in range(len(self.reps))})


# ---------------------------------------------------------------------------
# relation solving


def _sparse_from_dicts(rows: dict[int, dict], nrows: int, ncols: int) -> sparse.csr_matrix:
    r, c, v = [], [], []
    for i, row in rows.items():
        for j, x in row.items():
            if x:
                r.append(i)
                c.append(j)
                v.append(int(x))
    return sparse.csr_matrix(
        (np.array(v, dtype=np.int64), (np.array(r, dtype=np.int64), np.array(c, dtype=np.int64))),
        shape=(nrows, ncols),
    )


class _SignedUnionFind:
    """x_i = sign_i * x_root with contradiction tracking (x = -x forces 0)."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.sign = [1] * n
        self.zero = [False] * n

    def find(self, i: int) -> tuple[int, int]:
        path = []
        s = 1
        while self.parent[i] != i:
            path.append(i)
            i = self.parent[i]
        root = i
        # path compression
        acc = 1
        for node in reversed(path):
            acc *= self.sign[node]
            self.sign[node] = acc
            self.parent[node] = root
        if path:
            s = self.sign[path[0]]
        return root, s

    def union(self, i: int, j: int, rel: int) -> None:
        # impose x_i = rel * x_j
        ri, si = self.find(i)
        rj, sj = self.find(j)
        if ri == rj:
            if si != rel * sj:
                self.zero[ri] = True
            return
        # x_ri = si * x_i = si*rel*x_j = si*rel*sj * x_rj
        lo, hi = (ri, rj) if ri < rj else (rj, ri)
        self.parent[hi] = lo
        self.sign[hi] = si * rel * sj
        self.zero[lo] = self.zero[lo] or self.zero[hi]


def _eliminate(rows: list[dict[int, int]], nvars: int) -> tuple[list[int], dict[int, dict]]:
    """Sparse Gauss-Jordan on relation rows.

    Returns the free variables and, for every pivot variable, its expression
    as a linear combination of free variables.  Rows without a unit
    coefficient are postponed, since later pivots often give them one.
    """
    expr: dict[int, dict] = {}
    occurs: dict[int, set] = {}

    def reduce(row: dict) -> dict:
        r: dict = {}
        for v, c in row.items():
            e = expr.get(v)
            if e is None:
                r[v] = r.get(v, 0) + c
            else:
                for w, cw in e.items():
                    r[w] = r.get(w, 0) + c * cw
        return {v: c for v, c in r.items() if c}

    def pivot_on(r: dict) -> None:
        piv = min(r, key=lambda v: (abs(r[v]) != 1, len(occurs.get(v, ())), v))
        p = r.pop(piv)
        new = {}
        for v, c in r.items():
            q = Fraction(-c) / p
            new[v] = q.numerator if q.denominator == 1 else q
        for pv in occurs.pop(piv, set()):
            e = expr[pv]
            a = e.pop(piv)
            for w, cw in new.items():
                nv = e.get(w, 0) + a * cw
                if nv:
                    if w not in e:
                        occurs.setdefault(w, set()).add(pv)
                    e[w] = nv
                elif w in e:
                    del e[w]
                    occurs[w].discard(pv)
        expr[piv] = new
        for w in new:
            occurs.setdefault(w, set()).add(piv)

    deferred = []
    for row in rows:
        r = reduce(row)
        if not r:
            continue
        if any(abs(c) == 1 for c in r.values()):
            pivot_on(r)
        else:
            deferred.append(row)
    progress = True
    while deferred and progress:
        progress = False
        later = []
        for row in deferred:
            r = reduce(row)
            if not r:
                continue
            if any(abs(c) == 1 for c in r.values()):
                pivot_on(r)
                progress = True
            else:
                later.append(row)
        deferred = later
    for row in deferred:
        r = reduce(row)
        if r:
            pivot_on(r)
    free = [v for v in range(nvars) if v not in expr]
    return free, expr


# ---------------------------------------------------------------------------
# the space


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace of an ambient modular symbol space, in ambient coordinates.

    ``basis`` rows are integral and span a saturated sublattice of the ambient
    lattice, so ``integral_basis`` is the same matrix.  ``free`` lists a
    column where each row has a 1 and every other row a 0 when such columns
    exist (``None`` otherwise).
    """

    ambient: "ModSymSpace"
    basis: MatrixQ
    free: tuple[int, ...] | None = None

    @property
    def integral_basis(self) -> MatrixQ:
        return self.basis

    @property
    def dimension(self) -> int:
        return self.basis.rows

    def int_array(self) -> np.ndarray:
        return self.basis.num


class ModSymSpace:
    """Weight-2 modular symbols for Gamma_0(M), full (sign 0) or plus quotient (sign 1)."""

    def __init__(self, M: int, sign: int = 1):
        if M < 1:
            raise BadLevel(f"level must be >= 1, got {M}")
        if sign not in (0, 1):
            raise ValueError("sign must be 0 or 1")
        self.M = M
        self.sign = sign
        self.p1: P1Table = p1_enumerate(M)
        self._build_relations()
        self._build_boundary()
        self._fingerprint: str | None = None

    # -- construction -------------------------------------------------------
    def _build_relations(self) -> None:
        p1, M = self.p1, self.M
        n = len(p1)
        sigma = np.empty(n, dtype=np.int64)
        tau = np.empty(n, dtype=np.int64)
        iota = np.empty(n, dtype=np.int64)
        for i, (c, d) in enumerate(p1.reps):
            sigma[i] = p1.index_of(d, -c)
            tau[i] = p1.index_of(d, -c - d)
            iota[i] = p1.index_of(-c, d)
        uf = _SignedUnionFind(n)
        for i in range(n):
            uf.union(i, int(sigma[i]), -1)
            if self.sign == 1:
                uf.union(i, int(iota[i]), 1)
        roots = []
        cls = [None] * n  # (root, sign) or None for zero
        for i in range(n):
            r, s = uf.find(i)
            if uf.zero[r]:
                continue
            cls[i] = (r, s)
        # variables numbered by their root (the least member of each class)
        var_of_root = {}
        for i in range(n):
            if cls[i] is not None and cls[i][0] not in var_of_root:
                var_of_root[cls[i][0]] = len(var_of_root)
                roots.append(cls[i][0])
        sym_var = [None if cls[i] is None else (var_of_root[cls[i][0]], cls[i][1]) for i in range(n)]
        seen = np.zeros(n, dtype=bool)
        rels = []
        for i in range(n):
            if seen[i]:
                continue
            orbit = [i, int(tau[i]), int(tau[tau[i]])]
            seen[orbit] = True
            if orbit[1] == i:
                orbit = [i, i, i]
            row: dict[int, int] = {}
            for j in orbit:
                sv = sym_var[j]
                if sv is not None:
                    row[sv[0]] = row.get(sv[0], 0) + sv[1]
            row = {v: c for v, c in row.items() if c}
            if row:
                rels.append(row)
        nvars = len(roots)
        free, expr = _eliminate(rels, nvars)
        self.ngens = n
        self.free_vars = free
        col_of_free = {v: j for j, v in enumerate(free)}
        self.basis_symbols = np.array([roots[v] for v in free], dtype=np.int64)
        d = len(free)
        self.dimension = d
        entries: dict[int, dict[int, object]] = {}
        for i in range(n):
            sv = sym_var[i]
            if sv is None:
                continue
            v, s = sv
            if v in col_of_free:
                entries[i] = {col_of_free[v]: s}
            else:
                entries[i] = {col_of_free[w]: s * c for w, c in expr[v].items()}
        den = 1
        for row in entries.values():
            for c in row.values():
                if isinstance(c, Fraction):
                    den = lcm(den, c.denominator)
        basis_rows = [{int(k): den} for k in self.basis_symbols]
        if den > 1:
            entries, basis_rows = self._refine_lattice(entries, basis_rows, den, d)
        self._basis_den = den
        self._basis_rows = basis_rows
        self._E = _sparse_from_dicts(entries, n, d)
        self._basis_num = _sparse_from_dicts(dict(enumerate(basis_rows)), d, n)

    def _refine_lattice(self, entries, basis_rows, den, d):
        """Replace the free-symbol basis by a basis of the Manin lattice.

        The lattice contains the free symbols, so only the columns that carry
        fractional coordinates change.  Basis rows are kept scaled by ``den``.
        """
        J = sorted({j for row in entries.values() for j, c in row.items() if isinstance(c, Fraction) and c.denominator > 1})
        pos = {j: k for k, j in enumerate(J)}
        gens = {tuple(den if k == m else 0 for m in range(len(J))) for k in range(len(J))}
        for row in entries.values():
            vec = [0] * len(J)
            for j, c in row.items():
                if j in pos:
                    vec[pos[j]] = int(c * den) % den
            if any(vec):
                gens.add(tuple(vec))
        H = hnf(sorted(gens), len(J))
        Hq = MatrixQ.from_rows(H)
        Hinv = solve_left(Hq, MatrixQ.identity(len(J)))
        Hinv_rows = [[x * den for x in r] for r in Hinv.tolist()]
        new_entries = {}
        for i, row in entries.items():
            out = {j: int(c) for j, c in row.items() if j not in pos}
            vec = [row.get(j, 0) for j in J]
            for m in range(len(J)):
                x = sum(Fraction(vec[k]) * Hinv_rows[k][m] for k in range(len(J)) if vec[k])
                if x:
                    if x.denominator != 1:
                        raise LatticeError("lattice change left a denominator")
                    out[J[m]] = int(x)
            new_entries[i] = out
        for k, j in enumerate(J):
            row = {}
            for m, jj in enumerate(J):
                if H[k][m]:
                    sym = int(self.basis_symbols[jj])
                    row[sym] = H[k][m]
            basis_rows[j] = row
        return new_entries, basis_rows

    def _build_boundary(self) -> None:
        M = self.M
        cusps = CuspClasses(M, plus=self.sign == 1)
        sym_cusps: dict[int, tuple[int, int]] = {}
        for row in self._basis_rows:
            for k in row:
                if k not in sym_cusps:
                    c, d = self.p1.reps[k]
                    a, b, c2, d2 = lift_to_sl2z(c, d, M)
                    sym_cusps[k] = (cusps.index(a, c2), cusps.index(b, d2))
        roots = sorted({cusps.root(i) for i in range(len(cusps.reps))})
        col = {r: j for j, r in enumerate(roots)}
        rows = []
        for brow in self._basis_rows:
            row: dict[int, int] = {}
            for k, x in brow.items():
                i_inf, i_zero = sym_cusps[k]
                for idx, sgn in ((i_inf, 1), (i_zero, -1)):
                    j = col[cusps.root(idx)]
                    row[j] = row.get(j, 0) + sgn * x
            rows.append({j: x for j, x in row.items() if x})
        self.cusps = cusps
        self.num_cusp_classes = len(roots)
        self._boundary_rows = rows
        kernel, free = integer_left_kernel(rows)
        self._cusp_basis = kernel
        self._cusp_free = tuple(free) if all(f >= 0 for f in free) else None

    # -- accessors ----------------------------------------------------------
    @property
    def manin_to_basis_sparse(self) -> sparse.csr_matrix:
        """Integer sparse matrix: row i gives Manin symbol i in the ambient basis."""
        return self._E

    @property
    def manin_to_basis(self) -> MatrixQ:
        return MatrixQ(self._E.toarray().astype(object))

    @property
    def basis_dim(self) -> int:
        return self.dimension

    def manin_vector(self, i: int) -> np.ndarray:
        row = self._E.getrow(i)
        out = np.zeros(self.dimension, dtype=np.int64)
        out[row.indices] = row.data
        return out

    def boundary_matrix(self) -> MatrixQ:
        num = np.zeros((self.dimension, self.num_cusp_classes), dtype=object)
        for i, row in enumerate(self._boundary_rows):
            for j, v in row.items():
                num[i, j] = v
        return MatrixQ(num, self._basis_den)

    @property
    def basis_manin(self) -> tuple[sparse.csr_matrix, int]:
        """Ambient basis as Manin symbol combinations: (numerators, common denominator)."""
        return self._basis_num, self._basis_den

    def relation_vectors(self):
        """All two-term, three-term (and iota) relations as sparse dicts over P^1 indices."""
        p1 = self.p1
        for i, (c, d) in enumerate(p1.reps):
            j = p1.index_of(d, -c)
            rel = {i: 1}
            rel[j] = rel.get(j, 0) + 1
            yield rel
            t1 = p1.index_of(d, -c - d)
            t2 = p1.index_of(-c - d, c)
            rel = {}
            for k in (i, t1, t2):
                rel[k] = rel.get(k, 0) + 1
            yield rel
            if self.sign == 1:
                k = p1.index_of(-c, d)
                rel = {i: 1}
                rel[k] = rel.get(k, 0) - 1
                yield rel

    def symbol_vector(self, alpha: tuple[int, int], beta: tuple[int, int]) -> dict[int, int]:
        """The modular symbol {alpha, beta} (cusps as (num, den)) over P^1 indices."""
        out: dict[int, int] = {}
        for (a, b), s in ((beta, 1), (alpha, -1)):
            for c, d in continued_fraction_symbols(a, b):
                k = self.p1.index_of(c, d)
                out[k] = out.get(k, 0) + s
        return {k: v for k, v in out.items() if v}

    def to_basis(self, manin: dict[int, int]) -> np.ndarray:
        """Ambient coordinates of a combination of Manin symbols (exact ints)."""
        out = np.zeros(self.dimension, dtype=object)
        E = self._E
        for k, v in manin.items():
            s, e = E.indptr[k], E.indptr[k + 1]
            for j, x in zip(E.indices[s:e], E.data[s:e]):
                out[j] += int(x) * v
        return out

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            h = hashlib.sha256()
            head = {"level": self.M, "sign": self.sign, "version": NORMALIZATION_VERSION, "dim": self.dimension}
            h.update(json.dumps(head, sort_keys=True).encode())
            E = self._E
            B = self._basis_num
            h.update(str(self._basis_den).encode())
            for arr in (B.indptr, B.indices, B.data, E.indptr, E.indices, E.data):
                h.update(np.ascontiguousarray(arr, dtype="<i8").tobytes())
            for row in self._cusp_basis:
                h.update(json.dumps(sorted(row.items())).encode())
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    # -- serialisation ------------------------------------------------------
    def to_payload(self) -> dict[str, np.ndarray]:
        """Arrays that rebuild this space through ``from_payload``."""

        def csr(prefix, m):
            return {f"{prefix}_data": m.data, f"{prefix}_indices": m.indices, f"{prefix}_indptr": m.indptr, f"{prefix}_shape": np.array(m.shape)}

        out = {
            "meta": np.array([self.M, self.sign, self.dimension, self._basis_den, self.num_cusp_classes, self.ngens]),
            "basis_symbols": self.basis_symbols,
            "cusp_free": np.array(self._cusp_free if self._cusp_free is not None else [-1] * len(self._cusp_basis)),
            "cusp_has_free": np.array([self._cusp_free is not None]),
        }
        out.update(csr("E", self._E))
        out.update(csr("B", self._basis_num))
        out.update(csr("bd", _sparse_from_dicts(dict(enumerate(self._boundary_rows)), self.dimension, max(1, self.num_cusp_classes))))
        out.update(csr("cusp", _sparse_from_dicts(dict(enumerate(self._cusp_basis)), len(self._cusp_basis), max(1, self.dimension))))
        return out

    @classmethod
    def from_payload(cls, d: dict) -> "ModSymSpace":
        def csr(prefix):
            return sparse.csr_matrix(
                (d[f"{prefix}_data"], d[f"{prefix}_indices"], d[f"{prefix}_indptr"]), shape=tuple(int(x) for x in d[f"{prefix}_shape"])
            )

        def dicts(m):
            return [{int(j): int(x) for j, x in zip(m.indices[m.indptr[i] : m.indptr[i + 1]], m.data[m.indptr[i] : m.indptr[i + 1]])} for i in range(m.shape[0])]

        M, sign, dim, den, ncusp, ngens = (int(x) for x in d["meta"])
        S = cls.__new__(cls)
        S.M, S.sign, S.dimension, S.ngens = M, sign, dim, ngens
        S.p1 = p1_enumerate(M)
        S.basis_symbols = np.asarray(d["basis_symbols"], dtype=np.int64)
        S._basis_den = den
        S._E = csr("E")
        S._basis_num = csr("B")
        S._basis_rows = dicts(S._basis_num)
        S.num_cusp_classes = ncusp
        S.cusps = None
        S._boundary_rows = dicts(csr("bd"))[:dim]
        cusp = csr("cusp")
        S._cusp_basis = dicts(cusp)
        S._cusp_free = tuple(int(x) for x in d["cusp_free"]) if bool(d["cusp_has_free"][0]) else None
        S.free_vars = None
        S._fingerprint = None
        return S

    def __repr__(self):
        return f"ModSymSpace(M={self.M}, sign={self.sign}, dim={self.dimension}, cuspidal={len(self._cusp_basis)})"

    # -- subspaces ----------------------------------------------------------
    def subspace_from_sparse(self, rows: list[dict], free=None) -> Subspace:
        num = np.zeros((len(rows), self.dimension), dtype=object)
        for i, r in enumerate(rows):
            for j, v in r.items():
                num[i, j] = int(v)
        return Subspace(self, MatrixQ(num), tuple(free) if free is not None else None)

    @property
    def lattice(self) -> MatrixQ:
        return cuspidal_subspace(self).basis


_SPACES: "OrderedDict[tuple[int, int], ModSymSpace]" = OrderedDict()
_SPACES_LOCK = threading.Lock()
_SPACES_MAX = 24
_space_loader: Callable[[int, int], ModSymSpace] | None = None


def set_space_loader(loader: Callable[[int, int], ModSymSpace] | None) -> None:
    """Install a function used to obtain spaces missing from the in-process table."""
    global _space_loader
    _space_loader = loader


def modsym_space(M: int, sign: int = 1) -> ModSymSpace:
    """The (shared, immutable) space for Gamma_0(M) with the given sign."""
    key = (int(M), int(sign))
    with _SPACES_LOCK:
        S = _SPACES.get(key)
        if S is not None:
            _SPACES.move_to_end(key)
            return S
    S = _space_loader(*key) if _space_loader is not None else ModSymSpace(*key)
    with _SPACES_LOCK:
        S = _SPACES.setdefault(key, S)
        while len(_SPACES) > _SPACES_MAX:
            _SPACES.popitem(last=False)
    return S


def cuspidal_subspace(S: ModSymSpace) -> Subspace:
    sub = S.__dict__.get("_cuspidal")
    if sub is None:
        sub = S.subspace_from_sparse(S._cusp_basis, S._cusp_free)
        S.__dict__["_cuspidal"] = sub
    return sub
