"""Level raising mod l^n: raising primes, certificates and their verification.

Given a weak eigenform θ mod l^n at level N and a prime p with
a_p = s (p + 1) mod l^n, ``certify`` finds an l-primitive vector in the p-new
cuspidal lattice at level Np, reduced mod l^n, on which every T_q (q != p,
q up to the Sturm bound of Np) acts by θ(T_q) and U_p acts by s.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .arith import ResidueRing, is_prime, prime_divisors, primes_up_to, residue_ring
from .eigen import ModSystem, is_eisenstein, level_systems, reduce_system, sturm_bound
from .errors import (
    BadLevel,
    HeckeRaiseError,
    HypothesisFailed,
    LatticeError,
    LevelMismatch,
    NoWitness,
    NotPrime,
    ParseError,
    UnknownFormatVersion,
)
from .hecke import ambient_degeneracy_down, ambient_hecke, apply_hecke_mod, new_subspace
from .linalg.zmod import howell_rows, matmul_mod, refine_kernel
from .modsym import NORMALIZATION_VERSION, ModSymSpace, modsym_space

log = logging.getLogger(__name__)

FORMAT_VERSION = "1"
KNOWN_FORMAT_VERSIONS = frozenset({FORMAT_VERSION})

# Generator counts above this use the full operator matrix, below it the
# per-vector action.
_DENSE_ROWS = 12

# verify refuses levels Np above this rather than build enormous spaces
MAX_VERIFY_LEVEL = 20_000


class ScreenFailed(HypothesisFailed):
    """The eigen-system looks Eisenstein mod l (residually reducible)."""


# ---------------------------------------------------------------------------
# raising primes


def raising_primes(m: ModSystem, N: int, pmax: int, include_ell: bool = False) -> list[tuple[int, int]]:
    """Primes p <= pmax, p not dividing N, with a_p = s (p + 1) mod l^n."""
    if pmax < 2:
        return []
    if m.N != N:
        raise LevelMismatch(f"system has level {m.N}, not {N}")
    m = m.extend(pmax)
    out = []
    for p in primes_up_to(pmax):
        if N % p == 0 or (p == m.ring.ell and not include_ell):
            continue
        a = m.a_mod[p]
        for s in (1, -1):
            if a == s * (p + 1):
                out.append((p, s))
    return out


# ---------------------------------------------------------------------------
# certificate


def _s(x: int) -> str:
    return str(int(x))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


@dataclass(frozen=True)
class RaiseCertificate:
    N: int
    p: int
    ell: int
    n: int
    sign: int
    up_eigenvalue: int
    space_sign: int
    bound: int
    eigenvalues: tuple[tuple[int, int], ...]
    a_p: int
    witness: tuple[int, ...]
    basis_fingerprint: str
    screen: str
    source: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)
    format_version: str = FORMAT_VERSION

    def body(self) -> dict:
        return {
            "N": _s(self.N),
            "p": _s(self.p),
            "ell": _s(self.ell),
            "n": _s(self.n),
            "sign": _s(self.sign),
            "up_eigenvalue": _s(self.up_eigenvalue),
            "space_sign": _s(self.space_sign),
            "bound": _s(self.bound),
            "eigenvalues": [[_s(q), _s(a)] for q, a in self.eigenvalues],
            "a_p": _s(self.a_p),
            "witness": [_s(x) for x in self.witness],
            "basis_fingerprint": self.basis_fingerprint,
            "screen": self.screen,
            "source": {k: str(v) for k, v in sorted(self.source.items())},
            "versions": {k: str(v) for k, v in sorted(self.versions.items())},
            "format_version": self.format_version,
        }

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.body()).encode()).hexdigest()

    def to_dict(self) -> dict:
        d = self.body()
        d["digest"] = self.digest()
        return d

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RaiseCertificate":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"certificate is not JSON: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def from_dict(cls, d: dict) -> "RaiseCertificate":
        if not isinstance(d, dict):
            raise ParseError("certificate must be a JSON object")
        fv = d.get("format_version")
        if fv is None:
            raise ParseError("format_version is missing")
        if fv not in KNOWN_FORMAT_VERSIONS:
            raise UnknownFormatVersion(f"unknown certificate format_version {fv!r}")
        try:
            cert = cls(
                N=_int(d["N"]),
                p=_int(d["p"]),
                ell=_int(d["ell"]),
                n=_int(d["n"]),
                sign=_int(d["sign"]),
                up_eigenvalue=_int(d["up_eigenvalue"]),
                space_sign=_int(d["space_sign"]),
                bound=_int(d["bound"]),
                eigenvalues=tuple((_int(q), _int(a)) for q, a in d["eigenvalues"]),
                a_p=_int(d["a_p"]),
                witness=tuple(_int(x) for x in d["witness"]),
                basis_fingerprint=_str(d["basis_fingerprint"]),
                screen=_str(d["screen"]),
                source={str(k): _str(v) for k, v in dict(d.get("source", {})).items()},
                versions={str(k): _str(v) for k, v in dict(d.get("versions", {})).items()},
                format_version=fv,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed certificate: {exc!r}") from None
        object.__setattr__(cert, "_claimed_digest", d.get("digest"))
        return cert

    @property
    def claimed_digest(self) -> str | None:
        return getattr(self, "_claimed_digest", self.digest())


def _int(x) -> int:
    if isinstance(x, bool) or not isinstance(x, (str, int)):
        raise ValueError(f"expected a decimal string, got {x!r}")
    if isinstance(x, str):
        s = x[1:] if x.startswith("-") else x
        if not s.isdigit():
            raise ValueError(f"expected a decimal string, got {x!r}")
    return int(x)


def _str(x) -> str:
    if not isinstance(x, str):
        raise ValueError(f"expected a string, got {x!r}")
    return x


# ---------------------------------------------------------------------------
# the p-new lattice mod l^n


def new_basis_fingerprint(S: ModSymSpace, N: int) -> str:
    new = new_subspace(S, N)
    h = hashlib.sha256()
    h.update(S.fingerprint.encode())
    h.update(f"new:{N}:{new.dimension}".encode())
    for row in new.basis.num:
        h.update(canonical_json([int(x) for x in row]).encode())
    return h.hexdigest()


def _unit_minor(B: np.ndarray, ell: int, mod: int) -> tuple[list[int], np.ndarray]:
    """Columns ``J`` with ``B[:, J]`` invertible mod l, and that block's inverse mod l^n.

    ``B`` has l-primitive rows spanning a saturated lattice, so such columns exist.
    """
    k = B.shape[0]
    A = B.copy() % ell
    J: list[int] = []
    r = 0
    for c in range(B.shape[1]):
        if r == k:
            break
        nz = [i for i in range(r, k) if A[i, c] % ell]
        if not nz:
            continue
        i = nz[0]
        A[[r, i]] = A[[i, r]]
        A[r] = A[r] * pow(int(A[r, c]), -1, ell) % ell
        for i2 in range(k):
            if i2 != r and A[i2, c]:
                A[i2] = (A[i2] - A[i2, c] * A[r]) % ell
        J.append(c)
        r += 1
    if r < k:
        raise LatticeError("p-new basis is not primitive mod l")
    # Gauss-Jordan mod l^n; pivots are units because the block is invertible mod l
    M = np.concatenate([B[:, J] % mod, np.eye(k, dtype=np.int64)], axis=1)
    for c in range(k):
        i = next(i for i in range(c, k) if M[i, c] % ell)
        M[[c, i]] = M[[i, c]]
        M[c] = M[c] * pow(int(M[c, c]), -1, mod) % mod
        for i2 in range(k):
            if i2 != c and M[i2, c]:
                M[i2] = (M[i2] - M[i2, c] * M[c]) % mod
    return J, M[:, k:]


class _NewLattice:
    """The p-new lattice of ``S`` reduced mod l^n, with coordinates in its basis."""

    def __init__(self, S: ModSymSpace, N: int, ring: ResidueRing):
        mod = ring.modulus
        self.S = S
        self.modulus = mod
        self.sub = new_subspace(S, N)
        self.basis = np.array([[int(x) % mod for x in row] for row in self.sub.basis.num], dtype=np.int64)
        self.basis = self.basis.reshape(self.sub.dimension, S.dimension)
        if self.sub.free is not None:
            self.cols = list(self.sub.free)
            self.inv = None
        elif self.dimension:
            self.cols, self.inv = _unit_minor(self.basis, ring.ell, mod)
        else:
            self.cols, self.inv = [], None

    @property
    def dimension(self) -> int:
        return self.sub.dimension

    def to_ambient(self, G: np.ndarray) -> np.ndarray:
        return matmul_mod(G, self.basis, self.modulus)

    def coords(self, A: np.ndarray) -> np.ndarray:
        """New-basis coordinates of ambient vectors known to lie in the lattice."""
        X = np.asarray(A, dtype=np.int64)[:, self.cols] % self.modulus
        return X if self.inv is None else matmul_mod(X, self.inv, self.modulus)

    def image(self, G: np.ndarray, q: int, a: int) -> np.ndarray:
        """Coordinates of (T_q - a) applied to the generators ``G``."""
        mod = self.modulus
        amb = self.to_ambient(G)
        if G.shape[0] > _DENSE_ROWS:
            T = ambient_hecke(self.S, q)
            img = matmul_mod(amb, T[:, self.cols] % mod, mod)
            if self.inv is not None:
                img = matmul_mod(img, self.inv, mod)
        else:
            img = self.coords(apply_hecke_mod(self.S, q, amb, mod))
        return (img - a * G) % mod


def _search(S: ModSymSpace, N: int, ring: ResidueRing, ops: list[tuple[int, int]]) -> tuple[np.ndarray, list]:
    lat = _NewLattice(S, N, ring)
    G = np.eye(lat.dimension, dtype=np.int64)
    stages = [("start", lat.dimension)]
    for q, a in ops:
        if G.shape[0] == 0:
            break
        G = refine_kernel(G, lat.image(G, q, a), ring)
        stages.append((q, int(G.shape[0])))
    return G, stages


def _first_primitive(G: np.ndarray, ell: int) -> np.ndarray | None:
    for row in G:
        if any(int(x) % ell for x in row):
            return row
    return None


@dataclass(frozen=True)
class Hypothesis:
    N: int
    p: int
    ring: ResidueRing
    s: int


def _check_inputs(N: int, p: int, ring: ResidueRing, m: ModSystem, s: int) -> None:
    if N < 1:
        raise BadLevel(f"level must be >= 1, got {N}")
    if not is_prime(p):
        raise NotPrime(f"{p} is not prime")
    if N % p == 0:
        raise LevelMismatch(f"p = {p} divides N = {N}")
    if s not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if m.N != N:
        raise LevelMismatch(f"system has level {m.N}, not {N}")
    if m.ring != ring:
        raise LevelMismatch(f"system is over {m.ring}, not {ring}")


def screen_passes(m: ModSystem, N: int, p: int, bound: int) -> bool:
    avoid = set(prime_divisors(N * p)) | {m.ring.ell}
    return not is_eisenstein(m.extend(bound), avoid, bound)


def certify(
    N: int,
    p: int,
    ring: ResidueRing,
    m: ModSystem,
    s: int,
    space_sign: int = 1,
    unsafe_skip_screen: bool = False,
    fallback: bool = True,
) -> RaiseCertificate:
    """Construct a level-raising certificate at level N p over ``ring``."""
    _check_inputs(N, p, ring, m, s)
    Np = N * p
    bound = sturm_bound(Np)
    m = m.extend(max(bound, p))
    a_p = m.a_mod[p]
    if a_p != s * (p + 1):
        raise HypothesisFailed(f"a_{p} = {a_p.value} is not {s:+d}({p}+1) mod {ring.modulus}")
    if unsafe_skip_screen:
        screen = "skipped-unsafe"
    else:
        if not screen_passes(m, N, p, bound):
            raise ScreenFailed(f"the system is Eisenstein mod {ring.ell} up to {bound}; screen failed")
        screen = "passed"
    ops = [(q, m.a_mod[q].value) for q in primes_up_to(bound) if q != p]
    # U_p and the smallest primes cut the space down fastest
    ops = [(p, s % ring.modulus)] + ops
    signs = [space_sign] + ([0] if fallback and space_sign == 1 else [])
    all_stages = []
    for sg in signs:
        S = modsym_space(Np, sg)
        G, stages = _search(S, N, ring, ops)
        all_stages.append((sg, stages))
        w = _first_primitive(G, ring.ell)
        if w is not None:
            break
        log.warning("no primitive witness at level %d sign %d: stages %s", Np, sg, stages)
    else:
        raise NoWitness(
            f"no l-primitive common eigenvector at level {Np} over {ring}; kernel sizes per stage: {all_stages}",
            stages=all_stages,
        )
    source = {"kind": "user"} if m.origin is None or m.origin.source != "computed" else {
        "kind": "computed",
        "form": str(m.origin.index),
        "sign": str(m.origin.sign),
    }
    return RaiseCertificate(
        N=N,
        p=p,
        ell=ring.ell,
        n=ring.n,
        sign=s,
        up_eigenvalue=s % ring.modulus,
        space_sign=sg,
        bound=bound,
        eigenvalues=tuple((q, a) for q, a in ops[1:]),
        a_p=a_p.value,
        witness=tuple(int(x) for x in w),
        basis_fingerprint=new_basis_fingerprint(S, N),
        screen=screen,
        source=source,
        versions={"normalization": NORMALIZATION_VERSION, "format": FORMAT_VERSION},
    )


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerifyReport:
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    def add(self, name: str, ok: bool, detail: str = "") -> bool:
        self.checks.append((name, bool(ok), detail))
        return bool(ok)

    @property
    def ok(self) -> bool:
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    @property
    def failures(self) -> list[str]:
        return [name for name, ok, _ in self.checks if not ok]

    def lines(self) -> list[str]:
        return [f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else "") for name, ok, detail in self.checks]


def verify(c: RaiseCertificate) -> VerifyReport:
    """Re-check a certificate from scratch; failures become report entries."""
    rep = VerifyReport()
    rep.add("format_version", c.format_version in KNOWN_FORMAT_VERSIONS, c.format_version)
    rep.add("digest", c.claimed_digest == c.digest())
    rep.add(
        "versions",
        c.versions == {"normalization": NORMALIZATION_VERSION, "format": FORMAT_VERSION},
        str(c.versions),
    )
    ok_params = True
    ok_params &= rep.add("N positive", c.N >= 1, str(c.N))
    ok_params &= rep.add("p prime", c.p < (1 << 64) and is_prime(c.p), str(c.p))
    ok_params &= rep.add("p does not divide N", c.N >= 1 and c.N % c.p != 0 if c.p else False)
    ok_params &= rep.add("ell prime", 1 < c.ell < (1 << 64) and is_prime(c.ell), str(c.ell))
    ok_params &= rep.add("n positive", c.n >= 1, str(c.n))
    ok_params &= rep.add("sign is +1 or -1", c.sign in (1, -1), str(c.sign))
    ok_params &= rep.add("space_sign is 0 or 1", c.space_sign in (0, 1), str(c.space_sign))
    Np = c.N * c.p
    if not ok_params or c.ell**c.n >= 1 << 31 or Np > MAX_VERIFY_LEVEL:
        rep.add("parameters usable", False, f"level {Np}, modulus {c.ell}^{c.n}")
        return rep
    ring = residue_ring(c.ell, c.n)
    mod = ring.modulus
    rep.add("bound is the Sturm bound of Np", c.bound == sturm_bound(Np), f"{c.bound} vs {sturm_bound(Np)}")
    qs = [q for q, _ in c.eigenvalues]
    want = [q for q in primes_up_to(c.bound) if q != c.p]
    rep.add("eigenvalue coverage", qs == want, "primes up to the bound except p, ascending")
    reduced = all(0 <= a < mod for _, a in c.eigenvalues) and 0 <= c.a_p < mod and 0 <= c.up_eigenvalue < mod
    rep.add("values reduced mod l^n", reduced and all(0 <= x < mod for x in c.witness))
    rep.add("up_eigenvalue equals s", c.up_eigenvalue == c.sign % mod, f"{c.up_eigenvalue} vs {c.sign}")
    rep.add("hypothesis a_p = s(p+1)", (c.a_p - c.sign * (c.p + 1)) % mod == 0, f"a_p = {c.a_p}")

    try:
        _verify_witness(rep, c, ring, want)
    except HeckeRaiseError as exc:
        rep.add("witness checks completed", False, repr(exc))
    _check_screen(rep, c, ring)
    _check_source(rep, c, ring)
    return rep


def _verify_witness(rep: VerifyReport, c: RaiseCertificate, ring: ResidueRing, want: list[int]) -> None:
    mod = ring.modulus
    S = modsym_space(c.N * c.p, c.space_sign)
    fp = new_basis_fingerprint(S, c.N)
    rep.add("basis fingerprint", fp == c.basis_fingerprint)
    lat = _NewLattice(S, c.N, ring)
    if not rep.add("witness length", len(c.witness) == lat.dimension, f"{len(c.witness)} vs {lat.dimension}"):
        return
    w = np.array([int(x) % mod for x in c.witness], dtype=np.int64).reshape(1, -1)
    rep.add("witness nonzero", bool(w.any()))
    rep.add("witness primitive", any(int(x) % c.ell for x in w[0]))
    amb = lat.to_ambient(w)
    rep.add("witness is p-new (level N images vanish)", _is_new(S, c.N, c.p, amb, mod))
    expected = set(want)
    for q, a in c.eigenvalues:
        if q not in expected:
            rep.add(f"T_{q} eigen-equation", False, "not a prime index up to the bound")
            continue
        img = apply_hecke_mod(S, q, amb, mod)
        rep.add(f"T_{q} eigen-equation", np.array_equal(img % mod, (a * amb) % mod), f"a_{q} = {a}")
    img = apply_hecke_mod(S, c.p, amb, mod)
    rep.add(f"U_{c.p} eigen-equation", np.array_equal(img % mod, (c.up_eigenvalue * amb) % mod))


def _is_new(S: ModSymSpace, N: int, p: int, amb: np.ndarray, mod: int) -> bool:
    SN = modsym_space(N, S.sign)
    for t in (1, p):
        D = ambient_degeneracy_down(S, SN, t)
        Dm = np.array([[int(x) % mod for x in row] for row in D], dtype=np.int64).reshape(S.dimension, SN.dimension)
        if matmul_mod(amb, Dm, mod).any():
            return False
    return True


def _check_screen(rep: VerifyReport, c: RaiseCertificate, ring: ResidueRing) -> None:
    if c.screen not in ("passed", "skipped-unsafe"):
        rep.add("screen status", False, c.screen)
        return
    vals = dict(c.eigenvalues)
    ell = c.ell
    avoid = set(prime_divisors(c.N * c.p)) | {ell}
    eis = all((vals.get(r, 0) - (r + 1)) % ell == 0 for r in primes_up_to(c.bound) if r not in avoid)
    if c.screen == "passed":
        rep.add("screen (not Eisenstein mod l)", not eis)
    else:
        rep.add("screen skipped by request", True, "Eisenstein" if eis else "not Eisenstein")


def _check_source(rep: VerifyReport, c: RaiseCertificate, ring: ResidueRing) -> None:
    kind = c.source.get("kind")
    if kind == "user":
        rep.add("level-N source", True, "user supplied; eigenvalues taken as given")
        return
    if kind != "computed":
        rep.add("level-N source", False, f"unknown source {kind!r}")
        return
    try:
        idx = int(c.source["form"])
        sign = int(c.source["sign"])
        systems = level_systems(c.N, sign)
        if not 0 <= idx < len(systems):
            raise IndexError(f"level {c.N} has {len(systems)} rational systems")
        e = systems[idx].extend(max(c.bound, c.p))
    except Exception as exc:
        rep.add("level-N agreement", False, repr(exc))
        return
    m = reduce_system(e, ring, e.bound)
    vals = dict(c.eigenvalues)
    bad = [q for q in vals if q not in m.a_mod or m.a_mod[q].value != vals[q]]
    if c.p not in m.a_mod or m.a_mod[c.p].value != c.a_p:
        bad.append(c.p)
    rep.add("level-N agreement", not bad, f"mismatch at {bad}" if bad else f"form {idx} at level {c.N}")
