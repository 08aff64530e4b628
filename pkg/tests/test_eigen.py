import pytest

from hecke_raise.arith import primes_up_to, residue_ring
from hecke_raise.eigen import (
    EigenSystem,
    decompose,
    is_eisenstein,
    level_systems,
    reduce_system,
    residually_irreducible_screen,
    screen_bound,
    sturm_bound,
)
from hecke_raise.errors import BoundTooLarge, InsufficientEigenvalues
from hecke_raise.modsym import modsym_space
from oracles import CURVES, ap_table


def test_sturm_bound():
    assert [sturm_bound(M) for M in (1, 11, 77, 154, 3349)] == [1, 2, 16, 48, 594]


@pytest.mark.parametrize("label", ["11a1", "14a1", "15a1", "17a1", "19a1"])
def test_unique_rational_system_matches_curve(label):
    N, _ = CURVES[label]
    systems = level_systems(N)
    assert len(systems) == 1
    e = systems[0].extend(60)
    assert e.a == ap_table(label, 60, bad=True)


def test_level_37_has_two_systems_in_a_fixed_order():
    systems = [e.extend(50) for e in level_systems(37)]
    assert [e.a[2] for e in systems] == [-2, 0]
    assert systems[0].a == ap_table("37a1", 50, bad=True)
    assert systems[1].a == ap_table("37b1", 50, bad=True)
    assert [e.index for e in systems] == [0, 1]


def test_sign_zero_gives_the_same_systems():
    for N in (11, 37):
        a1 = [e.a for e in level_systems(N, 1)]
        a0 = [e.a for e in level_systems(N, 0)]
        assert a0 == a1


def test_irrational_blocks_are_reported():
    dec = decompose(modsym_space(23, 1))
    assert dec.systems == [] and dec.irrational_dims == [2]
    assert dec.total_dimension == 2


def test_no_cusp_forms():
    assert level_systems(10) == []


def test_reduce_and_extend():
    R = residue_ring(3, 2)
    e = level_systems(11)[0]
    with pytest.raises(BoundTooLarge):
        reduce_system(e, R, bound=e.bound + 10)
    m = reduce_system(e, R)
    assert m[2] == -2 and m.N == 11
    m50 = m.extend(50)
    assert m50[47] == ap_table("11a1", 50)[47]
    assert m.at_level_one().ring.modulus == 3


def test_user_system_cannot_be_extended():
    e = EigenSystem(11, 3, {2: -2, 3: -1}, source="user")
    with pytest.raises(InsufficientEigenvalues):
        e.extend(5)
    assert e.extend(3) is e


def test_eisenstein_screen_at_11():
    e = level_systems(11)[0]
    m5 = reduce_system(e, residue_ring(5, 1))
    assert is_eisenstein(m5.extend(50), {11, 5}, 50)
    assert not residually_irreducible_screen(m5)
    assert residually_irreducible_screen(reduce_system(e, residue_ring(3, 1)))
    # the bound is large enough to see a non-Eisenstein prime
    assert screen_bound(reduce_system(e, residue_ring(2, 2))) >= 3


def test_screen_with_nothing_to_test_fails():
    e = EigenSystem(11, 2, {2: 0}, source="user")
    m = reduce_system(e, residue_ring(2, 1))
    assert not residually_irreducible_screen(m, bound=2)


def test_eigenvalues_respect_weil_bound():
    for e in level_systems(57):
        e = e.extend(100)
        for q in primes_up_to(100):
            if 57 % q:
                assert e.a[q] ** 2 <= 4 * q
