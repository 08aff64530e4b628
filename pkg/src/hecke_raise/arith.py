"""Integer arithmetic, the residue rings Z/l^n and projective lines P^1(Z/M)."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd, isqrt

import numpy as np

from .errors import BadExponent, BadLevel, NotOnP1, NotPrime

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_MAX_PRIME_INPUT = 1 << 64


def is_prime(n: int) -> bool:
    """Miller-Rabin with a witness set that is deterministic below 2**64.

    Inputs at or above 2**64 are rejected with ``ValueError`` rather than
    answered probabilistically.
    """
    n = int(n)
    if n >= _MAX_PRIME_INPUT:
        raise ValueError(f"primality of {n} is not decided above 2**64")
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@lru_cache(maxsize=32)
def _sieve(n: int) -> tuple[int, ...]:
    if n < 2:
        return ()
    flags = bytearray([1]) * (n + 1)
    flags[0] = flags[1] = 0
    for i in range(2, isqrt(n) + 1):
        if flags[i]:
            flags[i * i :: i] = bytearray(len(range(i * i, n + 1, i)))
    return tuple(i for i, f in enumerate(flags) if f)


def primes_up_to(n: int) -> list[int]:
    return list(_sieve(int(n)))


def factor(n: int) -> dict[int, int]:
    """Trial-division factorisation of a positive integer."""
    if n < 1:
        raise ValueError("factor() needs a positive integer")
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def prime_divisors(n: int) -> list[int]:
    return sorted(factor(n))


def divisors(n: int) -> list[int]:
    divs = [1]
    for p, e in factor(n).items():
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def euler_phi(n: int) -> int:
    out = n
    for p in factor(n):
        out = out // p * (p - 1)
    return out


def psi(n: int) -> int:
    """Dedekind psi: the index of Gamma_0(n) in SL_2(Z)."""
    out = n
    for p in factor(n):
        out = out // p * (p + 1)
    return out


def xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with a*x + b*y == g == gcd(a, b) >= 0."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        return -a, -x0, -y0
    return a, x0, y0


def lift_unit(t: int, m: int, M: int) -> int:
    """Lift a unit ``t`` modulo ``m`` (m | M) to a unit modulo ``M``."""
    if M == 1:
        return 0
    t %= m
    u = t
    while gcd(u, M) != 1:
        u += m
    return u % M


# ---------------------------------------------------------------------------
# Z / l^n


@dataclass(frozen=True)
class ResidueRing:
    ell: int
    n: int
    modulus: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "modulus", self.ell**self.n)

    def __call__(self, value: int) -> "ResidueElt":
        return ResidueElt(int(value) % self.modulus, self)

    def __str__(self):
        return f"Z/{self.ell}^{self.n}"

    @property
    def residue_field(self) -> "ResidueRing":
        return ResidueRing(self.ell, 1)

    def valuation(self, x: int) -> int:
        """l-adic valuation of ``x`` read in Z/l^n (so 0 has valuation n)."""
        x %= self.modulus
        if x == 0:
            return self.n
        v = 0
        while x % self.ell == 0:
            x //= self.ell
            v += 1
        return v


def residue_ring(ell: int, n: int) -> ResidueRing:
    ell, n = int(ell), int(n)
    try:
        prime = is_prime(ell)
    except ValueError as exc:
        raise NotPrime(str(exc)) from None
    if not prime:
        raise NotPrime(f"{ell} is not prime")
    if n < 1:
        raise BadExponent(f"exponent must be >= 1, got {n}")
    return ResidueRing(ell, n)


@dataclass(frozen=True)
class ResidueElt:
    value: int
    ring: ResidueRing

    def __post_init__(self):
        if not 0 <= self.value < self.ring.modulus:
            object.__setattr__(self, "value", self.value % self.ring.modulus)

    def _coerce(self, other) -> int:
        if isinstance(other, ResidueElt):
            if other.ring != self.ring:
                raise ValueError(f"cannot mix {self.ring} and {other.ring}")
            return other.value
        if isinstance(other, int):
            return other
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.ring(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.ring(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.ring(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.ring(self.value * o)

    __rmul__ = __mul__

    def __neg__(self):
        return self.ring(-self.value)

    def __pow__(self, e: int):
        return self.ring(pow(self.value, e, self.ring.modulus))

    def __eq__(self, other):
        if isinstance(other, ResidueElt):
            return self.ring == other.ring and self.value == other.value
        if isinstance(other, int):
            return (self.value - other) % self.ring.modulus == 0
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.ring))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} mod {self.ring.modulus}"

    def is_unit(self) -> bool:
        return self.value % self.ring.ell != 0

    def inverse(self) -> "ResidueElt":
        if not self.is_unit():
            raise ZeroDivisionError(f"{self!r} is not a unit")
        return self.ring(pow(self.value, -1, self.ring.modulus))

    def signed(self) -> int:
        """Representative in (-modulus/2, modulus/2]."""
        m = self.ring.modulus
        return self.value - m if self.value > m // 2 else self.value


def val_unit(x: ResidueElt) -> tuple[int, ResidueElt]:
    """Split ``x = ell**v * u`` with ``u`` a unit; zero gives ``(n, 1)``."""
    ring = x.ring
    if x.value == 0:
        return ring.n, ring(1)
    v = ring.valuation(x.value)
    rest = x.value // ring.ell**v
    # rest is determined modulo ell^(n-v); any lift is a unit, take the least.
    return v, ring(rest)


# ---------------------------------------------------------------------------
# P^1(Z/M)


class P1Table:
    """Normalised representatives of P^1(Z/M).

    The representative of a class is its lexicographically least member
    ``(c, d)`` with ``0 <= c, d < M``; representatives are listed in
    lexicographic order.
    """

    def __init__(self, M: int):
        if M < 1:
            raise BadLevel(f"level must be >= 1, got {M}")
        self.M = M
        self._orbit_min: dict[int, np.ndarray] = {}
        self._lift_cache: dict[int, int] = {}
        if M == 1:
            reps = [(0, 0)]
        else:
            reps = [(0, 1)]
            for g in divisors(M)[:-1]:
                omin = self._orbit_table(g)
                seconds = sorted({int(omin[d]) for d in range(M) if gcd(g, d) == 1})
                reps.extend((g, d) for d in seconds)
        self.reps: tuple[tuple[int, int], ...] = tuple(reps)
        self.index: dict[tuple[int, int], int] = {r: i for i, r in enumerate(reps)}
        self._dense: np.ndarray | None = None

    def __len__(self):
        return len(self.reps)

    def __getitem__(self, i):
        return self.reps[i]

    def __iter__(self):
        return iter(self.reps)

    def _orbit_table(self, g: int) -> np.ndarray:
        # d -> min{u*d mod M : u unit, u = 1 mod M/g}; stabiliser of first coord g.
        tab = self._orbit_min.get(g)
        if tab is None:
            M, m = self.M, self.M // g
            ds = np.arange(M, dtype=np.int64)
            tab = ds.copy()
            for u in range(1 + m, M, m):
                if gcd(u, M) == 1:
                    np.minimum(tab, (u * ds) % M, out=tab)
            self._orbit_min[g] = tab
        return tab

    def normalize(self, c: int, d: int) -> tuple[int, int]:
        M = self.M
        if M == 1:
            return (0, 0)
        c %= M
        d %= M
        if gcd(gcd(c, d), M) != 1:
            raise NotOnP1(f"({c} : {d}) is not a point of P^1(Z/{M})")
        if c == 0:
            return (0, 1)
        g = gcd(c, M)
        m = M // g
        t = self._lift_cache.get(c)
        if t is None:
            t = lift_unit(pow(c // g, -1, m) if m > 1 else 1, m, M)
            self._lift_cache[c] = t
        return (g, int(self._orbit_table(g)[t * d % M]))

    def index_of(self, c: int, d: int) -> int:
        return self.index[self.normalize(c, d)]

    def dense_index(self) -> np.ndarray:
        """M x M array sending (c, d) to its class index, or -1 off P^1."""
        if self._dense is None:
            M = self.M
            dtype = np.int16 if len(self) < 2**15 else np.int32
            tab = np.full((M, M), -1, dtype=dtype)
            cs = np.array([r[0] for r in self.reps], dtype=np.int64)
            ds = np.array([r[1] for r in self.reps], dtype=np.int64)
            ids = np.arange(len(self.reps), dtype=dtype)
            for t in range(M):
                if gcd(t, M) == 1:
                    tab[(t * cs) % M, (t * ds) % M] = ids
            self._dense = tab
        return self._dense


@lru_cache(maxsize=8)
def p1_enumerate(M: int) -> P1Table:
    return P1Table(int(M))


def p1_index(t: P1Table, c: int, d: int) -> int:
    return t.index_of(c, d)
