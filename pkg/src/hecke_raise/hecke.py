"""Hecke operators, degeneracy maps and the old/new decomposition.

Operators act on row vectors: ``v -> v @ T``.  A Hecke operator is computed
on the ambient space from Heilbronn matrices acting on Manin symbols
(``(u : v) * [[a, b], [c, d]] = (ua + vc : ub + vd)``) and then restricted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gcd

import numpy as np
from scipy import sparse

from .arith import is_prime
from .errors import LevelMismatch, NotPrime, SubspaceNotInvariant
from .linalg.integer import integer_left_kernel, saturate
from .linalg.rational import MatrixQ, restrict, vstack
from .modsym import ModSymSpace, Subspace, continued_fraction_symbols, cuspidal_subspace, lift_to_sl2z

# How U_p at level Np relates to the two upward degeneracy maps, see
# ``companion_identity``.  Hecke operators here act on homology from the right,
# which is adjoint to the action on the Jacobian; the effect is that the map
# induced by z -> pz takes the first slot of alpha.  Both constants are pinned
# by the test suite.
ALPHA_ORDER = ("p", 1)
COMPANION_FORM = "K1"

_EXACT_FLOAT = 1 << 53


# ---------------------------------------------------------------------------
# Heilbronn matrices


def _round_half_away(a: int, b: int) -> int:
    q, r = divmod(abs(a), abs(b))
    if 2 * r >= abs(b):
        q += 1
    return q if (a >= 0) == (b > 0) else -q


@lru_cache(maxsize=512)
def _cremona(p: int) -> tuple[tuple[int, int, int, int], ...]:
    if p == 2:
        return ((1, 0, 0, 2), (2, 0, 0, 1), (2, 1, 0, 1), (1, 0, 1, 2))
    out = [(1, 0, 0, p)]
    for r in range(-(p // 2), p // 2 + 1):
        x1, x2, y1, y2 = p, -r, 0, 1
        a, b = -p, r
        out.append((x1, x2, y1, y2))
        while b:
            q = _round_half_away(a, b)
            c = a - b * q
            a, b = -b, c
            x1, x2 = x2, q * x2 - x1
            y1, y2 = y2, q * y2 - y1
            out.append((x1, x2, y1, y2))
    return tuple(out)


@lru_cache(maxsize=512)
def _merel(n: int) -> tuple[tuple[int, int, int, int], ...]:
    out = []
    for a in range(1, n + 1):
        for d in range(1, n + 1):
            bc = a * d - n
            if bc < 0:
                continue
            if bc == 0:
                out.extend((a, 0, c, d) for c in range(d))
                out.extend((a, b, 0, d) for b in range(1, a))
                continue
            for b in range(1, a):
                if bc % b == 0 and bc // b < d:
                    out.append((a, b, bc // b, d))
    return tuple(out)


def heilbronn(q: int, merel: bool = False) -> list[tuple[int, int, int, int]]:
    """Heilbronn matrices ``(a, b, c, d)`` of determinant ``q``.

    The default (Cremona) set computes T_q at levels prime to q; the Merel set
    is valid at every level, with images outside P^1 dropped.
    """
    if not is_prime(q):
        raise NotPrime(f"{q} is not prime")
    return list(_merel(q) if merel else _cremona(q))


# ---------------------------------------------------------------------------
# action on Manin symbols


class _SymbolAction:
    """Vectorised right action of integer matrices on the ambient basis."""

    def __init__(self, S: ModSymSpace):
        self.S = S
        B, den = S.basis_manin
        self.den = den
        supp = np.unique(B.indices)
        self.supp = supp
        reps = np.array(S.p1.reps, dtype=np.int64)
        self.u = reps[supp, 0]
        self.v = reps[supp, 1]
        col = {int(k): j for j, k in enumerate(supp)}
        Bc = B.tocoo()
        self.B = sparse.csr_matrix(
            (Bc.data, (Bc.row, np.array([col[int(k)] for k in Bc.col], dtype=np.int64))),
            shape=(S.dimension, len(supp)),
        )
        self.E = S.manin_to_basis_sparse
        self.flat_table = S.p1.dense_index().ravel()

    def images(self, mats: np.ndarray) -> np.ndarray:
        """Index array (support symbol, matrix) -> P^1 index, -1 when off P^1."""
        M = self.S.M
        dt = np.int32 if M < 30000 else np.int64
        u, v = self.u.astype(dt)[:, None], self.v.astype(dt)[:, None]
        m = (mats % M).astype(dt)
        x = (u * m[:, 0] + v * m[:, 2]) % M
        y = (u * m[:, 1] + v * m[:, 3]) % M
        x *= M
        x += y
        return self.flat_table.take(x).astype(np.int64)

    def ambient_matrix(self, mats: np.ndarray) -> np.ndarray:
        """Exact int64 matrix of sum_h (v -> v*h) on the ambient basis."""
        idx = self.images(mats)
        rows = np.repeat(np.arange(len(self.supp)), idx.shape[1])
        flat = idx.reshape(-1)
        keep = flat >= 0
        cnt = sparse.csr_matrix(
            (np.ones(int(keep.sum()), dtype=np.int64), (rows[keep], flat[keep])),
            shape=(len(self.supp), len(self.S.p1)),
        )
        per_symbol = (cnt @ self.E).toarray()
        out = self.B @ per_symbol
        if self.den != 1:
            if np.any(out % self.den):
                raise SubspaceNotInvariant("Hecke image left the Manin lattice")
            out //= self.den
        return np.asarray(out, dtype=np.int64)

    def apply(self, G: np.ndarray, mats: np.ndarray, modulus: int) -> np.ndarray:
        """Rows of ``G`` (ambient coordinates) pushed through sum_h, mod ``modulus``."""
        G = np.asarray(G, dtype=np.int64) % modulus
        if G.shape[0] == 0:
            return G.copy()
        # Work modulo den * modulus: the exact image is divisible by den.
        big = modulus * self.den
        W = np.asarray((sparse.csr_matrix(G) @ self.B).toarray(), dtype=np.int64) % big
        idx = self.images(mats)
        flat = idx.reshape(-1)
        keep = flat >= 0
        H = idx.shape[1]
        n = len(self.S.p1)
        out = np.zeros((G.shape[0], self.S.dimension), dtype=np.int64)
        exact = big * flat.size < _EXACT_FLOAT
        for i in range(G.shape[0]):
            w = np.repeat(W[i], H)[keep]
            if exact:
                acc = np.bincount(flat[keep], weights=w.astype(np.float64), minlength=n).astype(np.int64)
            else:
                acc = np.zeros(n, dtype=np.int64)
                np.add.at(acc, flat[keep], w)
            acc %= big
            out[i] = (sparse.csr_matrix(acc) @ self.E).toarray()[0] % big
        if self.den != 1:
            if np.any(out % self.den):
                raise SubspaceNotInvariant("Hecke image left the Manin lattice")
            out //= self.den
        return out % modulus


def _action(S: ModSymSpace) -> _SymbolAction:
    act = S.__dict__.get("_action")
    if act is None:
        act = _SymbolAction(S)
        S.__dict__["_action"] = act
    return act


def _mats(S: ModSymSpace, q: int) -> np.ndarray:
    merel = S.M % q == 0
    return np.array(heilbronn(q, merel=merel), dtype=np.int64)


def ambient_hecke(S: ModSymSpace, q: int) -> np.ndarray:
    """Integer matrix of T_q (or U_q when q | M) on the ambient basis, memoised."""
    memo = S.__dict__.setdefault("_hecke", {})
    T = memo.get(q)
    if T is None:
        if not is_prime(q):
            raise NotPrime(f"{q} is not prime")
        T = _action(S).ambient_matrix(_mats(S, q))
        T.setflags(write=False)
        T = memo.setdefault(q, T)
    return T


def apply_hecke_mod(S: ModSymSpace, q: int, G: np.ndarray, modulus: int) -> np.ndarray:
    """``G @ T_q mod modulus`` for ambient row vectors, without forming T_q."""
    memo = S.__dict__.get("_hecke", {})
    if q in memo:
        T = memo[q] % modulus
        from .linalg.zmod import matmul_mod

        return matmul_mod(np.asarray(G, dtype=np.int64) % modulus, T, modulus)
    return _action(S).apply(G, _mats(S, q), modulus)


# ---------------------------------------------------------------------------
# restriction


def _sub_int(sub: Subspace) -> np.ndarray:
    return np.asarray(sub.basis.num, dtype=np.int64)


def restrict_to(sub: Subspace, T: np.ndarray) -> MatrixQ:
    """Matrix of ``v -> v @ T`` on ``sub`` in its basis; exact check included."""
    Bi = _sub_int(sub)
    BT = np.asarray(sparse.csr_matrix(Bi) @ T, dtype=np.int64)
    if sub.free is not None:
        R = BT[:, list(sub.free)]
        if not np.array_equal(np.asarray(sparse.csr_matrix(R) @ Bi, dtype=np.int64), BT):
            raise SubspaceNotInvariant("operator does not preserve the subspace")
        return MatrixQ(R.astype(object))
    return restrict(MatrixQ(T.astype(object)), sub.basis)


@dataclass(frozen=True, eq=False)
class HeckeMatrix:
    space_fingerprint: str
    q: int
    kind: str  # "T" or "U"
    mat: MatrixQ


def hecke_matrix(S: ModSymSpace, sub: Subspace | None, q: int) -> HeckeMatrix:
    """T_q (or U_q for q | M) restricted to ``sub`` (the cuspidal subspace by default)."""
    if sub is None:
        sub = cuspidal_subspace(S)
    if sub.ambient is not S:
        raise LevelMismatch("subspace belongs to a different space")
    T = ambient_hecke(S, q)
    return HeckeMatrix(S.fingerprint, q, "U" if S.M % q == 0 else "T", restrict_to(sub, T))


# ---------------------------------------------------------------------------
# degeneracy maps


@dataclass(frozen=True, eq=False)
class DegeneracyMap:
    """δ_t^* from level N to level Np, on cuspidal bases (rows = source basis)."""

    from_level: int
    to_level: int
    t: int
    mat: MatrixQ
    ambient: np.ndarray


def _check_levels(SN: ModSymSpace, SNp: ModSymSpace) -> int:
    N, Np = SN.M, SNp.M
    if SN.sign != SNp.sign:
        raise LevelMismatch("spaces have different signs")
    if Np % N:
        raise LevelMismatch(f"{Np} is not a multiple of {N}")
    p = Np // N
    if not is_prime(p) or N % p == 0:
        raise LevelMismatch(f"level ratio {p} must be a prime not dividing {N}")
    return p


def _basis_symbol_terms(S: ModSymSpace, i: int):
    B, den = S.basis_manin
    s, e = B.indptr[i], B.indptr[i + 1]
    for k, x in zip(B.indices[s:e], B.data[s:e]):
        yield int(k), int(x)


def _ambient_map(src: ModSymSpace, dst: ModSymSpace, image) -> np.ndarray:
    """Integer matrix of a map given on Manin symbols by ``image(c, d, g)``."""
    _, den = src.basis_manin
    out = np.zeros((src.dimension, dst.dimension), dtype=object)
    for i in range(src.dimension):
        acc: dict[int, int] = {}
        for k, x in _basis_symbol_terms(src, i):
            c, d = src.p1.reps[k]
            g = lift_to_sl2z(c, d, src.M)
            for (cc, dd), s in image(g):
                j = dst.p1.index_of(cc, dd)
                acc[j] = acc.get(j, 0) + s * x
        row = dst.to_basis({j: v for j, v in acc.items() if v})
        out[i] = row
    if den != 1:
        if any(int(x) % den for x in out.flat):
            raise SubspaceNotInvariant("degeneracy image left the Manin lattice")
        out = out // den
    return out


def _cf_terms(alpha: tuple[int, int], beta: tuple[int, int]):
    for (a, b), s in ((beta, 1), (alpha, -1)):
        for cd in continued_fraction_symbols(a, b):
            yield cd, s


def _up_images(N: int, p: int, t: int):
    if t == 1:
        # [[a, b], [N, p]] with a p - b N = 1
        _, a0, b0 = _xgcd_pair(p, N)
        reps = [(1, 0, N * k, 1) for k in range(p)] + [(a0, -b0, N, p)]

        def image(g):
            a, b, c, d = g
            return [((hc * a + hd * c, hc * b + hd * d), 1) for (_, _, hc, hd) in reps]

        return image
    _, d0, b0 = _xgcd_pair(p, N)
    reps = [(1, k, 0, 1) for k in range(p)] + [(p, -b0, N, d0)]

    def image(g):
        a, b, c, d = g
        terms = []
        for ha, hb, hc, hd in reps:
            A, Bb = ha * a + hb * c, ha * b + hb * d
            C, D = hc * a + hd * c, hc * b + hd * d
            # {h g 0, h g oo} scaled by 1/p
            terms.extend(_cf_terms((Bb, p * D), (A, p * C)))
        return terms

    return image


def _xgcd_pair(p: int, N: int) -> tuple[int, int, int]:
    """(1, x, y) with p*x + N*y = 1."""
    from .arith import xgcd

    g, x, y = xgcd(p, N)
    if g != 1:
        raise LevelMismatch(f"{p} divides {N}")
    return g, x, y


def _down_images(N: int, p: int, t: int):
    if t == 1:
        return lambda g: [((g[2], g[3]), 1)]

    def image(g):
        a, b, c, d = g
        return list(_cf_terms((p * b, d), (p * a, c)))

    return image


def ambient_degeneracy_up(SN: ModSymSpace, SNp: ModSymSpace, t: int) -> np.ndarray:
    p = _check_levels(SN, SNp)
    if t not in (1, p):
        raise LevelMismatch(f"t must be 1 or {p}")
    key = ("up", SNp.M, SNp.sign, t)
    memo = SN.__dict__.setdefault("_degen", {})
    if key not in memo:
        memo[key] = _ambient_map(SN, SNp, _up_images(SN.M, p, t))
    return memo[key]


def ambient_degeneracy_down(SNp: ModSymSpace, SN: ModSymSpace, t: int) -> np.ndarray:
    p = _check_levels(SN, SNp)
    if t not in (1, p):
        raise LevelMismatch(f"t must be 1 or {p}")
    key = ("down", SN.M, SN.sign, t)
    memo = SNp.__dict__.setdefault("_degen", {})
    if key not in memo:
        memo[key] = _ambient_map(SNp, SN, _down_images(SN.M, p, t))
    return memo[key]


def _express(sub: Subspace, V: np.ndarray) -> MatrixQ:
    """Coordinates of the rows of ``V`` (ambient) in the basis of ``sub``."""
    Vq = MatrixQ(np.asarray(V, dtype=object))
    if sub.free is not None:
        X = Vq.columns(sub.free)
        if X @ sub.basis != Vq:
            raise SubspaceNotInvariant("image is not inside the target subspace")
        return X
    from .linalg.rational import solve_left

    X = solve_left(sub.basis, Vq)
    if X is None:
        raise SubspaceNotInvariant("image is not inside the target subspace")
    return X


def degeneracy_up(SN: ModSymSpace, SNp: ModSymSpace, t: int) -> DegeneracyMap:
    A = ambient_degeneracy_up(SN, SNp, t)
    CN, CNp = cuspidal_subspace(SN), cuspidal_subspace(SNp)
    img = (CN.basis @ MatrixQ(A)).num
    return DegeneracyMap(SN.M, SNp.M, t, _express(CNp, img), A)


def degeneracy_down(SNp: ModSymSpace, SN: ModSymSpace, t: int) -> DegeneracyMap:
    A = ambient_degeneracy_down(SNp, SN, t)
    CN, CNp = cuspidal_subspace(SN), cuspidal_subspace(SNp)
    img = (CNp.basis @ MatrixQ(A)).num
    return DegeneracyMap(SNp.M, SN.M, t, _express(CN, img), A)


# ---------------------------------------------------------------------------
# old / new


def new_subspace(SNp: ModSymSpace, N: int) -> Subspace:
    """p-new cuspidal subspace: common kernel of both downward maps (saturated)."""
    memo = SNp.__dict__.setdefault("_new", {})
    if N in memo:
        return memo[N]
    from .modsym import modsym_space

    SN = modsym_space(N, SNp.sign)
    p = _check_levels(SN, SNp)
    C = cuspidal_subspace(SNp)
    Cm = C.basis
    D1 = MatrixQ(ambient_degeneracy_down(SNp, SN, 1))
    Dp = MatrixQ(ambient_degeneracy_down(SNp, SN, p))
    img = np.concatenate([(Cm @ D1).num, (Cm @ Dp).num], axis=1)
    rows = [{j: int(x) for j, x in enumerate(r) if x} for r in img]
    kernel, free = integer_left_kernel(rows)
    K = np.zeros((len(kernel), C.dimension), dtype=object)
    for i, r in enumerate(kernel):
        for j, x in r.items():
            K[i, j] = x
    basis = MatrixQ(K) @ Cm if len(kernel) else MatrixQ.zero(0, SNp.dimension)
    amb_free = None
    if C.free is not None and all(f >= 0 for f in free):
        amb_free = tuple(C.free[f] for f in free)
    sub = Subspace(SNp, basis, amb_free)
    return memo.setdefault(N, sub)


def old_subspace(SNp: ModSymSpace, N: int) -> Subspace:
    from .modsym import modsym_space

    SN = modsym_space(N, SNp.sign)
    p = _check_levels(SN, SNp)
    CN = cuspidal_subspace(SN)
    imgs = [CN.basis @ MatrixQ(ambient_degeneracy_up(SN, SNp, t)) for t in (1, p)]
    stacked = vstack(imgs, SNp.dimension)
    if stacked.rows == 0:
        return Subspace(SNp, MatrixQ.zero(0, SNp.dimension))
    return Subspace(SNp, saturate(stacked))


def old_new_split(SNp: ModSymSpace, N: int, p: int | None = None) -> tuple[Subspace, Subspace]:
    if p is not None and N * p != SNp.M:
        raise LevelMismatch(f"{N} * {p} != {SNp.M}")
    return old_subspace(SNp, N), new_subspace(SNp, N)


# ---------------------------------------------------------------------------
# the U_p companion identity


def companion_identity(N: int, p: int, sign: int = 1, order: tuple[int, int] | None = None) -> dict[str, bool]:
    """Which companion form links U_p with the two upward degeneracy maps.

    ``order = (t_first, t_second)`` fixes alpha(x, y) = x A + y B with
    A = δ_{t_first}^*, B = δ_{t_second}^* on cuspidal row matrices.  With
    T = T_p at level N and U = U_p at level Np the candidates are

    * K1 = (T, p; -1, 0):  A U = T A - B    and  B U = p A
    * K2 = (T, 1; -p, 0):  A U = T A - p B  and  B U = A

    The default order is ``ALPHA_ORDER``.
    """
    from .modsym import modsym_space

    SN, SNp = modsym_space(N, sign), modsym_space(N * p, sign)
    first, second = order or ALPHA_ORDER
    maps = {"1": degeneracy_up(SN, SNp, 1).mat, "p": degeneracy_up(SN, SNp, p).mat}
    A, B = maps[_role(first)], maps[_role(second)]
    T = hecke_matrix(SN, None, p).mat
    U = hecke_matrix(SNp, None, p).mat
    AU, BU = A @ U, B @ U
    k1 = AU == T @ A - B and BU == A.scale(p)
    k2 = AU == T @ A - B.scale(p) and BU == A
    return {"K1": bool(k1), "K2": bool(k2)}


def _role(t) -> str:
    return "1" if t in (1, "1") else "p"
