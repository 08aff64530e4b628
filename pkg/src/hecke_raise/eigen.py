"""Rational eigen-systems, Sturm bounds, reduction mod l^n and the Eisenstein screen."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, isqrt
from typing import Iterable, Mapping

import numpy as np

from .arith import ResidueElt, ResidueRing, is_prime, prime_divisors, primes_up_to, psi
from .errors import BoundTooLarge, InsufficientEigenvalues, NotPrime
from .hecke import apply_hecke_mod, hecke_matrix
from .linalg.integer import clear_denominators
from .linalg.rational import MatrixQ, kernel_q, restrict, row_space
from .modsym import ModSymSpace, Subspace, cuspidal_subspace, modsym_space

log = logging.getLogger(__name__)

# A prime modulus for recovering exact eigenvalues from one coordinate.
_RECOVERY_PRIME = 2_147_483_629


def sturm_bound(M: int) -> int:
    """ceil(k * psi(M) / 12) at weight k = 2, at least 1."""
    return max(1, -(-2 * psi(M) // 12))


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Integer Hecke eigenvalues a_q for all primes q <= bound.

    For q | N the entry is the U_q eigenvalue.  ``vector`` (an integral
    eigenvector in the ambient basis of ``modsym_space(N, sign)``) is kept for
    computed systems so the list can be extended past ``bound``.
    """

    N: int
    bound: int
    a: Mapping[int, int]
    source: str = "computed"
    sign: int | None = None
    vector: tuple[int, ...] | None = None
    index: int | None = None

    def __getitem__(self, q: int) -> int:
        return self.a[q]

    def extend(self, bound: int) -> "EigenSystem":
        """The same system with eigenvalues for every prime up to ``bound``."""
        if bound <= self.bound and all(q in self.a for q in primes_up_to(bound)):
            return self
        missing = [q for q in primes_up_to(bound) if q not in self.a]
        if self.vector is None:
            raise InsufficientEigenvalues(
                f"system at level {self.N} known up to {self.bound}; need primes up to {bound}"
            )
        S = modsym_space(self.N, self.sign)
        v = np.array(self.vector, dtype=object)
        P = _RECOVERY_PRIME
        v_mod = np.array([int(x) % P for x in v], dtype=np.int64).reshape(1, -1)
        j = next(i for i, x in enumerate(v_mod[0]) if x)
        inv = pow(int(v_mod[0, j]), -1, P)
        a = dict(self.a)
        for q in missing:
            img = apply_hecke_mod(S, q, v_mod, P)[0]
            lam = int(img[j]) * inv % P
            if lam > P // 2:
                lam -= P
            if not np.array_equal(img, (lam * v_mod[0]) % P):
                raise InsufficientEigenvalues(f"stored vector is not a T_{q} eigenvector")
            a[q] = lam
        return EigenSystem(self.N, max(bound, self.bound), a, self.source, self.sign, self.vector, self.index)

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self.a.items())


@dataclass(frozen=True, eq=False)
class ModSystem:
    """An eigen-system reduced modulo l^n (a weak eigenform)."""

    base: tuple[int, str]  # (level, identity tag)
    ring: ResidueRing
    a_mod: Mapping[int, ResidueElt]
    bound: int
    origin: EigenSystem | None = None

    @property
    def N(self) -> int:
        return self.base[0]

    def __getitem__(self, q: int) -> ResidueElt:
        return self.a_mod[q]

    def extend(self, bound: int) -> "ModSystem":
        if all(q in self.a_mod for q in primes_up_to(bound)):
            return self
        if self.origin is None:
            raise InsufficientEigenvalues(f"eigenvalues only known up to {self.bound}")
        return reduce_system(self.origin.extend(bound), self.ring, bound)

    def at_level_one(self) -> "ModSystem":
        """Reduction to the residue field Z/l."""
        R = self.ring.residue_field
        return ModSystem(self.base, R, {q: R(x.value) for q, x in self.a_mod.items()}, self.bound, self.origin)


def _system_tag(e: EigenSystem) -> str:
    if e.source == "computed":
        return f"computed:{e.N}:{e.index}"
    return e.source


def reduce_system(e: EigenSystem, ring: ResidueRing, bound: int | None = None) -> ModSystem:
    if bound is None:
        bound = e.bound
    if bound > e.bound:
        raise BoundTooLarge(f"bound {bound} exceeds the system's bound {e.bound}")
    a_mod = {q: ring(a) for q, a in e.a.items() if q <= bound}
    return ModSystem((e.N, _system_tag(e)), ring, a_mod, bound, e)


def is_eisenstein(m: ModSystem, avoid: Iterable[int], bound: int) -> bool:
    """True iff a_r = r + 1 mod l for every prime r <= bound outside ``avoid``.

    With no prime left to test the answer is vacuously true.
    """
    if m.ring.n != 1:
        m = m.at_level_one()
    avoid = set(avoid)
    for r in primes_up_to(bound):
        if r in avoid:
            continue
        if r not in m.a_mod:
            raise InsufficientEigenvalues(f"a_{r} missing")
        if m.a_mod[r] != r + 1:
            return False
    return True


def screen_bound(m: ModSystem) -> int:
    """Default screening range: the Sturm bound at level N l, or the known range if larger."""
    return max(m.bound, sturm_bound(m.N * m.ring.ell))


def residually_irreducible_screen(m: ModSystem, avoid: Iterable[int] = (), bound: int | None = None) -> bool:
    """Not-Eisenstein screen mod l, away from primes dividing N * l (and ``avoid``).

    The system is extended when it can be; a range with no testable prime
    counts as a failed screen.
    """
    skip = set(prime_divisors(m.N)) | {m.ring.ell} | set(avoid)
    if bound is None:
        bound = screen_bound(m)
        try:
            m = m.extend(bound)
        except InsufficientEigenvalues:
            bound = m.bound
    if not any(r not in skip for r in primes_up_to(bound)):
        return False
    return not is_eisenstein(m, skip, bound)


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class Decomposition:
    systems: list[EigenSystem]
    rational_dims: list[int] = field(default_factory=list)
    irrational_dims: list[int] = field(default_factory=list)

    @property
    def total_dimension(self) -> int:
        return sum(self.rational_dims) + sum(self.irrational_dims)


def _poly_eval(T: MatrixQ, roots: list[tuple[int, int]]) -> MatrixQ:
    P = MatrixQ.identity(T.rows)
    for lam, mult in roots:
        A = T.minus_scalar(lam)
        for _ in range(mult):
            P = P @ A
    return P


def _generalised_kernel(T: MatrixQ, lam: int) -> MatrixQ:
    A = T.minus_scalar(lam)
    P = A
    K = kernel_q(P.T)
    while True:
        P2 = P @ A
        K2 = kernel_q(P2.T)
        if K2.rows == K.rows:
            return K
        P, K = P2, K2


def _int_eigen_candidates(T: MatrixQ, q: int) -> list[int]:
    """Integers λ with |λ| <= 2 sqrt(q) that are eigenvalues of ``T``."""
    r = isqrt(4 * q)
    out = []
    for lam in range(-r, r + 1):
        if kernel_q(T.minus_scalar(lam).T).rows:
            out.append(lam)
    return out


def decompose(S: ModSymSpace, bound: int | None = None) -> Decomposition:
    """Split the cuspidal space into rational eigen-blocks under T_q, q prime to M."""
    M = S.M
    C = cuspidal_subspace(S)
    unit = 1 if S.sign == 1 else 2
    if bound is None:
        bound = sturm_bound(M)
    dec = Decomposition([])
    if C.dimension == 0:
        return dec
    # blocks are row bases in cuspidal coordinates
    pending = [MatrixQ.identity(C.dimension)]
    done: list[MatrixQ] = []
    primes = [q for q in primes_up_to(max(bound, 2)) if M % q]
    Tq_cache: dict[int, MatrixQ] = {}
    for q in primes:
        if not pending:
            break
        Tq = Tq_cache.setdefault(q, hecke_matrix(S, C, q).mat)
        nxt = []
        for V in pending:
            TV = restrict(Tq, V)
            lams = _int_eigen_candidates(TV, q)
            used = 0
            roots = []
            for lam in lams:
                K = _generalised_kernel(TV, lam)
                roots.append((lam, K.rows))
                used += K.rows
                W = K @ V
                if W.rows <= unit:
                    done.append(W)
                else:
                    nxt.append(W)
            rest = V.rows - used
            if rest:
                dec.irrational_dims.append(rest)
        pending = nxt
    done.extend(pending)
    ops: dict[int, MatrixQ] = {}
    for W in done:
        dec.rational_dims.append(W.rows)
    for W in sorted(done, key=lambda W: W.rows):
        if W.rows != unit:
            continue
        a: dict[int, int] = {}
        ok = True
        for q in primes_up_to(bound):
            T = ops.setdefault(q, hecke_matrix(S, C, q).mat)
            R = restrict(T, W)
            lam = R[0, 0]
            if R != MatrixQ.identity(W.rows).scale(lam) or lam.denominator != 1:
                ok = False
                break
            a[q] = int(lam)
        if not ok:
            continue
        amb = (W.row_slice([0]) @ C.basis).tolist()[0]
        vec = tuple(clear_denominators(amb))
        dec.systems.append(EigenSystem(M, bound, a, "computed", S.sign, vec))
    dec.systems.sort(key=lambda e: [e.a[q] for q in sorted(e.a)])
    dec.systems = [
        EigenSystem(e.N, e.bound, e.a, e.source, e.sign, e.vector, i) for i, e in enumerate(dec.systems)
    ]
    return dec


def rational_eigensystems(S: ModSymSpace, bound: int | None = None) -> list[EigenSystem]:
    dec = decompose(S, bound)
    if dec.irrational_dims:
        log.info("level %d: irrational blocks of dimensions %s skipped", S.M, dec.irrational_dims)
    return dec.systems


def level_systems(N: int, sign: int = 1, bound: int | None = None) -> list[EigenSystem]:
    return rational_eigensystems(modsym_space(N, sign), bound)
