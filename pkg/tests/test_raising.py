import json
import random
import subprocess
import sys

import numpy as np
import pytest

from hecke_raise.arith import residue_ring
from hecke_raise.eigen import EigenSystem, level_systems, reduce_system
from hecke_raise.errors import HypothesisFailed, LevelMismatch, ParseError, UnknownFormatVersion
from hecke_raise.hecke import new_subspace
from hecke_raise.modsym import modsym_space
from hecke_raise.raising import (
    RaiseCertificate,
    ScreenFailed,
    _unit_minor,
    canonical_json,
    certify,
    raising_primes,
    verify,
)
from oracles import ap_table, mutate_certificate


def _m(N=11, ell=3, n=1, form=0):
    return reduce_system(level_systems(N)[form], residue_ring(ell, n))


@pytest.fixture(scope="module")
def cert_11_7():
    return certify(11, 7, residue_ring(3, 1), _m(), -1)


def test_raising_primes_for_11_mod_3():
    got = raising_primes(_m(), 11, 60)
    assert got == [(7, -1), (13, -1), (29, 1), (29, -1), (31, -1), (53, 1), (53, -1)]
    # cross-check the condition against point counts
    a = ap_table("11a1", 60)
    for p, s in got:
        assert (a[p] - s * (p + 1)) % 3 == 0
    assert (3, -1) in raising_primes(_m(), 11, 5, include_ell=True)
    assert raising_primes(_m(), 11, 1) == []
    with pytest.raises(LevelMismatch):
        raising_primes(_m(), 37, 10)


def test_certificate_verifies(cert_11_7):
    c = cert_11_7
    assert (c.N, c.p, c.ell, c.n, c.sign, c.up_eigenvalue) == (11, 7, 3, 1, -1, 2)
    assert c.screen == "passed" and c.source == {"kind": "computed", "form": "0", "sign": "1"}
    rep = verify(c)
    assert rep.ok, rep.lines()
    assert any(name.startswith("U_7") for name, ok, _ in rep.checks if ok)


def test_certificate_is_byte_deterministic(cert_11_7):
    again = certify(11, 7, residue_ring(3, 1), _m(), -1)
    assert again.to_json() == cert_11_7.to_json()
    code = (
        "from hecke_raise.arith import residue_ring\n"
        "from hecke_raise.eigen import level_systems, reduce_system\n"
        "from hecke_raise.raising import certify\n"
        "R = residue_ring(3, 1)\n"
        "print(certify(11, 7, R, reduce_system(level_systems(11)[0], R), -1).to_json())\n"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout.strip()
    assert out == cert_11_7.to_json()


def test_certificate_round_trip(cert_11_7):
    text = cert_11_7.to_json()
    back = RaiseCertificate.from_json(text)
    assert back == cert_11_7
    assert back.to_json() == text
    d = json.loads(text)
    assert all(isinstance(x, str) for x in d["witness"])
    assert text == canonical_json(d)


def _redigest(d):
    body = {k: v for k, v in d.items() if k != "digest"}
    c = RaiseCertificate.from_dict(body)
    d["digest"] = c.digest()
    return RaiseCertificate.from_dict(d)


def test_tampered_eigenvalue_fails_its_equation(cert_11_7):
    d = cert_11_7.to_dict()
    q, a = d["eigenvalues"][0]
    d["eigenvalues"][0] = [q, str((int(a) + 1) % 3)]
    rep = verify(_redigest(d))
    assert not rep.ok
    assert f"T_{q} eigen-equation" in rep.failures


def test_witness_times_ell_is_not_primitive():
    c = certify(11, 13, residue_ring(3, 2), _m(n=2), -1)
    d = c.to_dict()
    d["witness"] = [str(int(x) * 3 % 9) for x in d["witness"]]
    rep = verify(_redigest(d))
    assert "witness primitive" in rep.failures
    # 3 w still satisfies every eigen-equation; only primitivity catches it
    assert not any(name.endswith("eigen-equation") for name in rep.failures)


def test_digest_mismatch_is_reported(cert_11_7):
    d = cert_11_7.to_dict()
    d["digest"] = "0" * 64
    assert verify(RaiseCertificate.from_dict(d)).failures == ["digest"]


def test_format_version_and_parse_errors(cert_11_7):
    d = cert_11_7.to_dict()
    d["format_version"] = "2"
    with pytest.raises(UnknownFormatVersion):
        RaiseCertificate.from_dict(d)
    with pytest.raises(ParseError):
        RaiseCertificate.from_json("{")
    d = cert_11_7.to_dict()
    d["p"] = 7.5
    with pytest.raises(ParseError):
        RaiseCertificate.from_dict(d)
    del d["witness"]
    with pytest.raises(ParseError):
        RaiseCertificate.from_dict(d)


def test_hypothesis_and_screen_are_enforced():
    R3, R5 = residue_ring(3, 1), residue_ring(5, 1)
    with pytest.raises(HypothesisFailed):
        certify(11, 7, R3, _m(), 1)
    with pytest.raises(LevelMismatch):
        certify(11, 11, R3, _m(), -1)
    with pytest.raises(ScreenFailed):
        certify(11, 7, R5, _m(ell=5), 1)


def test_user_supplied_system():
    a = ap_table("11a1", 30)
    a[11] = 1
    e = EigenSystem(11, 30, a, source="user")
    c = certify(11, 7, residue_ring(3, 1), reduce_system(e, residue_ring(3, 1)), -1)
    assert c.source == {"kind": "user"}
    rep = verify(c)
    assert rep.ok, rep.lines()


def test_prime_power_modulus():
    R = residue_ring(3, 2)
    m = _m(n=2)
    primes = [p for p, s in raising_primes(m, 11, 100)]
    assert primes[0] == 13
    c = certify(11, 13, R, m, -1)
    assert verify(c).ok


def test_non_identity_coordinates():
    # the 3-new basis at level 33 (sign +) has no identity columns
    assert new_subspace(modsym_space(33, 1), 11).free is None
    R = residue_ring(3, 1)
    c = certify(11, 3, R, _m(), -1)
    assert verify(c).ok


def test_unit_minor_inverse():
    B = np.array([[3, 1, 2], [1, 0, 4]], dtype=np.int64)
    J, inv = _unit_minor(B, 3, 9)
    assert (B[:, J] @ inv % 9 == np.eye(2, dtype=np.int64)).all()


def test_redigested_mutations_fail_a_mathematical_check():
    # re-signing a mutated certificate must not help: some check other than
    # the digest still fails (screen and source only weaken the claim)
    bases = [
        certify(11, 7, residue_ring(3, 1), _m(), -1).to_dict(),
        certify(17, 29, residue_ring(3, 2), _m(17, 3, 2), -1).to_dict(),
    ]
    rnd = random.Random(5)
    tried = 0
    while tried < 150:
        d, key = mutate_certificate(bases[tried % 2], rnd)
        if key in ("digest", "screen", "source"):
            continue
        tried += 1
        try:
            c = _redigest(d)
        except (ParseError, UnknownFormatVersion):
            continue
        rep = verify(c)
        assert rep.failures and rep.failures != ["digest"], (key, d[key])
