"""Integer lattices: Hermite normal form, saturation and integral kernels."""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Sequence

from ..arith import xgcd
from .rational import MatrixQ, kernel_q


def hnf(rows: Sequence[Sequence[int]], ncols: int | None = None) -> list[list[int]]:
    """Row-style Hermite normal form of the lattice spanned by ``rows``.

    Positive pivots, entries above each pivot reduced into [0, pivot), zero
    rows removed.
    """
    A = [[int(x) for x in r] for r in rows]
    if ncols is None:
        ncols = len(A[0]) if A else 0
    r = 0
    pivots = []
    for c in range(ncols):
        if r >= len(A):
            break
        for i in range(r + 1, len(A)):
            if A[i][c] == 0:
                continue
            a, b = A[r][c], A[i][c]
            g, x, y = xgcd(a, b)
            ag, bg = a // g, b // g
            top = [x * u + y * v for u, v in zip(A[r], A[i])]
            bot = [ag * v - bg * u for u, v in zip(A[r], A[i])]
            A[r], A[i] = top, bot
        if A[r][c] == 0:
            continue
        if A[r][c] < 0:
            A[r] = [-x for x in A[r]]
        pivots.append((r, c))
        r += 1
    A = A[:r]
    for i, c in pivots:
        p = A[i][c]
        for k in range(i):
            q = A[k][c] // p
            if q:
                A[k] = [u - q * v for u, v in zip(A[k], A[i])]
    return A


def integer_left_kernel(rows: Sequence[dict], ncols: int | None = None) -> tuple[list[dict], list[int]]:
    """Basis of {x in Z^m : sum_i x_i rows[i] = 0} for sparse integer rows.

    Returns ``(basis, free)`` where each basis vector is a sparse dict over
    row indices and ``basis[k][free[k]] == 1`` while ``basis[k'][free[k]] == 0``
    for every other k'.  The basis spans a saturated sublattice because it is
    the kernel of an integral map.
    """
    m = len(rows)
    work = [dict(r) for r in rows]
    trans = [{i: 1} for i in range(m)]
    active = set(range(m))
    col_rows: dict[int, set[int]] = {}
    for i, r in enumerate(work):
        for c in r:
            col_rows.setdefault(c, set()).add(i)

    def axpy(dst: int, coef: int, src: int) -> None:
        # row dst += coef * row src, in both the image and transform parts.
        wd, ws = work[dst], work[src]
        for c, v in ws.items():
            nv = wd.get(c, 0) + coef * v
            if nv:
                if c not in wd:
                    col_rows.setdefault(c, set()).add(dst)
                wd[c] = nv
            elif c in wd:
                del wd[c]
                col_rows[c].discard(dst)
        td, ts = trans[dst], trans[src]
        for c, v in ts.items():
            nv = td.get(c, 0) + coef * v
            if nv:
                td[c] = nv
            else:
                td.pop(c, None)

    for c in sorted(col_rows):
        while True:
            cand = sorted((i for i in col_rows.get(c, ()) if i in active), key=lambda i: (abs(work[i][c]), len(work[i]), i))
            if not cand:
                break
            piv = cand[0]
            p = work[piv][c]
            done = True
            for i in cand[1:]:
                q = work[i][c] // p
                axpy(i, -q, piv)
                if c in work[i]:
                    done = False
            if done:
                active.discard(piv)
                break
    basis = [trans[i] for i in sorted(active)]
    return _normalise_free(basis)


def _normalise_free(basis: list[dict]) -> tuple[list[dict], list[int]]:
    """Unimodular row operations so each vector owns an identity column.

    A saturated lattice need not admit such a basis (span{(2, 3)} does not);
    vectors left without an identity column get ``free == -1``.
    """
    basis = [dict(b) for b in basis]
    free: list[int] = [-1] * len(basis)
    owner: dict[int, int] = {}
    pending = list(range(len(basis)))
    budget = 20 * len(basis) + 20
    stuck: list[int] = []
    while pending:
        k = pending.pop(0)
        b = basis[k]
        # clear columns already owned by others
        for c, kk in owner.items():
            v = b.get(c, 0)
            if v:
                _sparse_axpy(b, -v, basis[kk])
        unit = sorted(c for c, v in b.items() if abs(v) == 1 and c not in owner)
        if unit:
            c = unit[0]
            if b[c] == -1:
                for key in b:
                    b[key] = -b[key]
            for kk in owner.values():
                v = basis[kk].get(c, 0)
                if v:
                    _sparse_axpy(basis[kk], -v, b)
            owner[c] = k
            free[k] = c
            continue
        # no unit entry: Euclid against another unowned vector sharing a column
        partner = None
        if b and budget > 0:
            c = min(b, key=lambda c: (abs(b[c]), c))
            partner = next((kk for kk in pending if basis[kk].get(c, 0)), None)
        if partner is None:
            stuck.append(k)
            continue
        budget -= 1
        pending.remove(partner)
        o = basis[partner]
        while b.get(c, 0) and o.get(c, 0):
            if abs(b[c]) <= abs(o[c]):
                _sparse_axpy(o, -(o[c] // b[c]), b)
            else:
                _sparse_axpy(b, -(b[c] // o[c]), o)
        pending[:0] = [k, partner]
    for k in stuck:
        for c, kk in owner.items():
            v = basis[k].get(c, 0)
            if v:
                _sparse_axpy(basis[k], -v, basis[kk])
    order = sorted(range(len(basis)), key=lambda k: (free[k] < 0, free[k], k))
    return [basis[k] for k in order], [free[k] for k in order]


def _sparse_axpy(dst: dict, coef: int, src: dict) -> None:
    for c, v in src.items():
        nv = dst.get(c, 0) + coef * v
        if nv:
            dst[c] = nv
        else:
            dst.pop(c, None)


def saturate(A: MatrixQ) -> MatrixQ:
    """Hermite basis of the saturation (Q L) cap Z^k of the row lattice of ``A``."""
    if not A.is_integral():
        raise ValueError("saturate expects an integral matrix")
    k = A.cols
    K = kernel_q(A)
    if K.rows == 0:
        rank = A.rank()
        if rank == 0:
            return MatrixQ.zero(0, k)
        return MatrixQ.identity(k)
    # v lies in Q.L  iff  K v^T = 0.
    kint = K.int_rows()
    cols = [{j: kint[j][i] for j in range(len(kint)) if kint[j][i]} for i in range(k)]
    basis, _ = integer_left_kernel(cols)
    if not basis:
        return MatrixQ.zero(0, k)
    dense = [[b.get(i, 0) for i in range(k)] for b in basis]
    return MatrixQ.from_rows(hnf(dense, k), k)


def lattice_contains(basis: Sequence[Sequence[int]], v: Sequence[int]) -> bool:
    """Membership of ``v`` in the Z-span of an HNF basis."""
    v = [int(x) for x in v]
    for row in basis:
        c = next(j for j, x in enumerate(row) if x)
        if v[c] % row[c]:
            return False
        q = v[c] // row[c]
        if q:
            v = [a - q * b for a, b in zip(v, row)]
    return not any(v)


def clear_denominators(row: Sequence[Fraction]) -> list[int]:
    d = 1
    for x in row:
        d = lcm(d, Fraction(x).denominator)
    out = [int(Fraction(x) * d) for x in row]
    g = 0
    for x in out:
        g = gcd(g, x)
    return [x // g for x in out] if g > 1 else out
