"""Command-line interface: ``hecke-raise <command> ...``.

Exit status: 0 on success, 1 when the mathematics says no (hypothesis false,
no witness, verification failed), 2 for bad invocations and unusable input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import Sequence

from . import cache
from .arith import is_prime, primes_up_to, residue_ring
from .eigen import (
    EigenSystem,
    decompose,
    level_systems,
    reduce_system,
    residually_irreducible_screen,
    sturm_bound,
)
from .errors import (
    CoverageGap,
    HeckeRaiseError,
    HypothesisFailed,
    InsufficientEigenvalues,
    NoWitness,
    ParseError,
    UnknownFormatVersion,
)
from .modsym import cuspidal_subspace, genus_x0, modsym_space, num_cusps
from .raising import RaiseCertificate, canonical_json, certify, raising_primes, verify

EXIT_OK, EXIT_FALSE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# eigen-system files


def load_system(path: str | Path) -> EigenSystem:
    """Parse ``{"level": N, "bound": B, "pairs": [[q, a_q], ...]}``.

    Numbers may be decimal strings or JSON integers.  Every prime up to the
    bound must be present.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_system(text)


def parse_system(text: str) -> EigenSystem:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not JSON: {exc}") from None
    # `eigen --json` prints a list; a one-element list is accepted as is
    if isinstance(d, list) and len(d) == 1:
        d = d[0]
    if not isinstance(d, dict) or not {"level", "bound", "pairs"} <= set(d):
        raise ParseError("expected an object with level, bound and pairs")
    N, B = _num(d["level"]), _num(d["bound"])
    if N < 1 or B < 1:
        raise ParseError("level and bound must be positive")
    if not isinstance(d["pairs"], list):
        raise ParseError("pairs must be a list")
    a: dict[int, int] = {}
    for item in d["pairs"]:
        if not isinstance(item, list) or len(item) != 2:
            raise ParseError(f"bad pair {item!r}")
        q, aq = _num(item[0]), _num(item[1])
        if q < 2 or not is_prime(q):
            raise ParseError(f"index {q} is not prime")
        if q in a:
            raise ParseError(f"duplicate entry for q = {q}")
        a[q] = aq
    missing = [q for q in primes_up_to(B) if q not in a]
    if missing:
        raise CoverageGap(f"missing a_q for q in {missing[:10]}")
    source = str(d.get("source", "user"))
    return EigenSystem(N, B, a, source if source != "computed" else "user")


def _num(x) -> int:
    if isinstance(x, bool):
        raise ParseError(f"expected an integer, got {x!r}")
    if isinstance(x, int):
        return x
    if isinstance(x, str):
        s = x[1:] if x.startswith("-") else x
        if s.isdigit():
            return int(x)
    raise ParseError(f"expected an integer, got {x!r}")


def dump_system(e: EigenSystem) -> str:
    return canonical_json(
        {
            "level": str(e.N),
            "bound": str(e.bound),
            "pairs": [[str(q), str(a)] for q, a in sorted(e.a.items())],
        }
    )


# ---------------------------------------------------------------------------
# commands


def _sign(text: str) -> int:
    if text in ("0",):
        return 0
    if text in ("+", "+1", "1", "plus"):
        return 1
    raise argparse.ArgumentTypeError("space sign must be 0 or +")


def _pm(text: str) -> int:
    if text in ("+", "+1", "1"):
        return 1
    if text in ("-", "-1"):
        return -1
    raise argparse.ArgumentTypeError("sign must be + or -")


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"{v} must be positive")
    return v


def cmd_genus(args, out) -> int:
    print(genus_x0(args.M), file=out)
    return EXIT_OK


def cmd_space(args, out) -> int:
    S, hit = cache.load_space(args.M, args.sign)
    C = cuspidal_subspace(S)
    print(f"level {S.M}", file=out)
    print(f"sign {'+' if S.sign else '0'}", file=out)
    print(f"dimension {S.dimension}", file=out)
    print(f"cuspidal dimension {C.dimension}", file=out)
    print(f"genus {genus_x0(S.M)}", file=out)
    print(f"cusps {num_cusps(S.M)}", file=out)
    print(f"fingerprint {S.fingerprint}", file=out)
    print(f"cache {'hit' if hit else 'miss'}", file=out)
    return EXIT_OK


def cmd_eigen(args, out) -> int:
    S = modsym_space(args.N, args.sign)
    bound = args.bound or sturm_bound(args.N)
    dec = decompose(S, sturm_bound(args.N))
    systems = [e.extend(bound) if bound > e.bound else e for e in dec.systems]
    if args.json:
        print(json.dumps([json.loads(dump_system(e)) for e in systems], sort_keys=True), file=out)
        return EXIT_OK
    print(f"level {args.N}: {len(systems)} rational system(s); irrational blocks {dec.irrational_dims}", file=out)
    for e in systems:
        vals = " ".join(f"a{q}={e.a[q]}" for q in primes_up_to(bound))
        print(f"form {e.index}: {vals}", file=out)
    return EXIT_OK


def _system(args):
    if args.system:
        e = load_system(args.system)
        if e.N != args.level:
            raise UsageError(f"system file has level {e.N}, not {args.level}")
        return e
    systems = level_systems(args.level, 1)
    if not systems:
        raise UsageError(f"level {args.level} has no rational eigen-system")
    if args.form is None and len(systems) > 1:
        raise UsageError(f"level {args.level} has {len(systems)} rational systems; choose one with --form")
    i = args.form or 0
    if not 0 <= i < len(systems):
        raise UsageError(f"--form must be in 0..{len(systems) - 1}")
    return systems[i]


def cmd_search(args, out) -> int:
    ring = residue_ring(args.ell, args.n)
    e = _system(args)
    m = reduce_system(e, ring)
    hits = raising_primes(m, args.level, args.pmax, args.include_ell)
    screen = residually_irreducible_screen(m)
    print(f"screen {'passed' if screen else 'failed (Eisenstein mod ' + str(args.ell) + ')'}", file=out)
    for p, s in hits:
        print(f"{p} {'+' if s > 0 else '-'}", file=out)
    return EXIT_OK


def cmd_certify(args, out) -> int:
    if args.p < 2 or not is_prime(args.p):
        raise UsageError(f"{args.p} is not prime")
    if args.level % args.p == 0:
        raise UsageError(f"p = {args.p} divides the level {args.level}")
    ring = residue_ring(args.ell, args.n)
    e = _system(args)
    m = reduce_system(e, ring)
    cert = certify(
        args.level,
        args.p,
        ring,
        m,
        args.sign,
        space_sign=args.space_sign,
        unsafe_skip_screen=args.unsafe_skip_screen,
    )
    text = cert.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text, file=out)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    try:
        text = Path(args.cert).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.cert}: {exc}") from None
    try:
        cert = RaiseCertificate.from_json(text)
    except UnknownFormatVersion as exc:
        print(f"FAIL format_version: {exc}", file=out)
        return EXIT_FALSE
    rep = verify(cert)
    for line in rep.lines():
        print(line, file=out)
    print("VERIFIED" if rep.ok else "NOT VERIFIED", file=out)
    return EXIT_OK if rep.ok else EXIT_FALSE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hecke-raise", description="Modular symbols, Hecke operators and level-raising certificates.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("genus", help="genus of X_0(M)")
    p.add_argument("M", type=_positive)
    p.set_defaults(func=cmd_genus)

    p = sub.add_parser("space", help="summary of the modular symbol space")
    p.add_argument("M", type=_positive)
    p.add_argument("--sign", type=_sign, default=1, help="0 or + (default +)")
    p.set_defaults(func=cmd_space)

    p = sub.add_parser("eigen", help="rational Hecke eigen-systems at level N")
    p.add_argument("N", type=_positive)
    p.add_argument("--bound", type=_positive, default=None)
    p.add_argument("--sign", type=_sign, default=1)
    p.add_argument("--json", action="store_true", help="print systems in the eigen-system file format")
    p.set_defaults(func=cmd_eigen)

    def common(p):
        p.add_argument("--level", type=_positive, required=True)
        p.add_argument("--ell", type=int, required=True)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--system", default=None, help="eigen-system JSON file")
        p.add_argument("--form", type=int, default=None, help="index of the computed level-N system")

    p = sub.add_parser("search", help="list level-raising primes")
    common(p)
    p.add_argument("--pmax", type=int, required=True)
    p.add_argument("--include-ell", action="store_true")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("certify", help="build a level-raising certificate")
    common(p)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--sign", type=_pm, required=True, help="+ or -")
    p.add_argument("--space-sign", type=_sign, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--unsafe-skip-screen", action="store_true")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", help="re-check a certificate")
    p.add_argument("cert")
    p.set_defaults(func=cmd_verify)
    return ap


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=err)
    cache.install()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", cache.CacheWarning)
            warnings.showwarning = lambda msg, cat, *a, **k: print(f"warning: {msg}", file=err)
            return args.func(args, out)
    except (HypothesisFailed, NoWitness) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_FALSE
    except (UsageError, ValueError, InsufficientEigenvalues) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except HeckeRaiseError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_FALSE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
