from math import gcd

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hecke_raise.arith import (
    P1Table,
    divisors,
    euler_phi,
    factor,
    is_prime,
    lift_unit,
    p1_enumerate,
    primes_up_to,
    psi,
    residue_ring,
    val_unit,
    xgcd,
)
from hecke_raise.errors import BadExponent, BadLevel, NotOnP1, NotPrime


def _trial_prime(n):
    return n >= 2 and all(n % d for d in range(2, int(n**0.5) + 1))


def test_is_prime_small_range_matches_trial_division():
    assert [n for n in range(2000) if is_prime(n)] == [n for n in range(2000) if _trial_prime(n)]


def test_is_prime_large_inputs():
    assert is_prime(2**61 - 1)
    assert not is_prime(3215031751)  # strong pseudoprime to bases 2, 3, 5, 7
    assert is_prime(2**64 - 59)  # largest prime below 2**64
    assert not is_prime(561 * 1105)
    with pytest.raises(ValueError):
        is_prime(2**64)


def test_primes_up_to():
    assert primes_up_to(1) == []
    assert primes_up_to(30) == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


@given(st.integers(1, 10**6))
def test_factor_reconstructs(n):
    f = factor(n)
    prod = 1
    for p, e in f.items():
        assert _trial_prime(p)
        prod *= p**e
    assert prod == n


def test_multiplicative_functions():
    assert divisors(12) == [1, 2, 3, 4, 6, 12]
    assert euler_phi(36) == 12
    assert psi(11) == 12
    assert psi(77) == 96
    assert psi(1) == 1


@given(st.integers(-10**9, 10**9), st.integers(-10**9, 10**9))
def test_xgcd(a, b):
    g, x, y = xgcd(a, b)
    assert g == gcd(a, b)
    assert a * x + b * y == g


@given(st.integers(2, 400), st.data())
def test_lift_unit(M, data):
    m = data.draw(st.sampled_from(divisors(M)))
    t = data.draw(st.integers(0, m - 1).filter(lambda t: gcd(t, m) == 1))
    u = lift_unit(t, m, M)
    assert gcd(u, M) == 1 and (u - t) % m == 0


def test_residue_ring_validation():
    with pytest.raises(NotPrime):
        residue_ring(4, 1)
    with pytest.raises(BadExponent):
        residue_ring(3, 0)
    R = residue_ring(3, 2)
    assert R.modulus == 9
    assert str(R) == "Z/3^2"


def test_residue_arithmetic():
    R = residue_ring(3, 3)
    x = R(-1)
    assert x.value == 26 and x.signed() == -1
    assert x * x == 1
    assert R.valuation(0) == 3 and R.valuation(18) == 2
    assert R(2).inverse() * 2 == 1
    with pytest.raises(ZeroDivisionError):
        R(3).inverse()
    v, u = val_unit(R(18))
    assert v == 2 and u.is_unit() and (9 * u.value - 18) % 27 == 0
    with pytest.raises(ValueError):
        R(1) + residue_ring(3, 1)(1)


def _brute_p1(M):
    """Classes of P^1(Z/M) by orbit enumeration under scaling."""
    units = [u for u in range(M) if gcd(u, M) == 1]
    seen, classes = set(), []
    for c in range(M):
        for d in range(M):
            if gcd(gcd(c, d), M) != 1 or (c, d) in seen:
                continue
            orbit = {(u * c % M, u * d % M) for u in units}
            seen |= orbit
            classes.append(min(orbit))
    return sorted(classes)


@pytest.mark.parametrize("M", [2, 3, 4, 6, 8, 9, 12, 18, 25, 30, 36, 49, 60])
def test_p1_matches_orbit_enumeration(M):
    t = P1Table(M)
    assert len(t) == psi(M)
    assert sorted(t.reps) == _brute_p1(M)
    for c in range(M):
        for d in range(M):
            if gcd(gcd(c, d), M) == 1:
                r = t.normalize(c, d)
                assert any(
                    gcd(u, M) == 1 and (u * c - r[0]) % M == 0 and (u * d - r[1]) % M == 0 for u in range(M)
                )


def test_p1_dense_index_agrees():
    t = p1_enumerate(36)
    D = t.dense_index()
    for c in range(36):
        for d in range(36):
            if gcd(gcd(c, d), 36) == 1:
                assert D[c, d] == t.index_of(c, d)
            else:
                assert D[c, d] == -1


def test_p1_errors():
    with pytest.raises(BadLevel):
        P1Table(0)
    with pytest.raises(NotOnP1):
        P1Table(12).normalize(2, 4)
    assert len(P1Table(1)) == 1


@settings(max_examples=200)
@given(st.integers(2, 3000), st.integers(0, 10**6), st.integers(0, 10**6))
def test_p1_normalize_idempotent(M, c, d):
    t = p1_enumerate(M)
    if gcd(gcd(c, d), M) != 1:
        return
    r = t.normalize(c, d)
    assert t.normalize(*r) == r
    assert r in t.index
