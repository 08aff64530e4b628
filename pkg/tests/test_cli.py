import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from hecke_raise import cache
from hecke_raise.cli import dump_system, load_system, parse_system, run
from hecke_raise.errors import CoverageGap, ParseError
from hecke_raise.modsym import set_space_loader
from oracles import ap_table

DATA = Path(__file__).parent / "data"


@pytest.fixture(autouse=True)
def _fresh_loader():
    yield
    set_space_loader(None)


@pytest.fixture
def cache_root(tmp_path, monkeypatch):
    root = tmp_path / "cache"
    monkeypatch.setenv(cache.CACHE_ENV, str(root))
    return root


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def _space_fields(text):
    return dict(line.rsplit(" ", 1) for line in text.strip().splitlines())


# ---------------------------------------------------------------------------
# eigen-system files


def test_load_system_fixture():
    e = load_system(DATA / "11a.json")
    assert e.N == 11 and e.bound == 100 and e.source == "user"
    assert e.a[2] == -2
    assert {q: a for q, a in e.a.items() if q != 11} == ap_table("11a1", 100)


def test_system_file_round_trip():
    e = load_system(DATA / "11a.json")
    text = dump_system(e)
    again = parse_system(text)
    assert again.a == e.a and (again.N, again.bound) == (e.N, e.bound)
    assert dump_system(again) == text


def test_eigen_json_output_is_a_system_file():
    _, out, _ = cli("eigen", 11, "--bound", 30, "--json")
    e = parse_system(out)
    assert e.N == 11 and e.bound == 30 and e.a[29] == 0
    _, out37, _ = cli("eigen", 37, "--json")
    with pytest.raises(ParseError):
        parse_system(out37)


def test_system_accepts_plain_integers():
    e = parse_system('{"level": 11, "bound": 3, "pairs": [[2, -2], [3, -1]]}')
    assert e.a == {2: -2, 3: -1}


@pytest.mark.parametrize(
    "text,err",
    [
        ('{"level": "11", "bound": "3", "pairs": [["2", "-2"]]}', CoverageGap),
        ('{"level": "11", "bound": "4", "pairs": [["2", "-2"], ["3", "-1"], ["4", "0"]]}', ParseError),
        ('{"level": "11", "bound": "2", "pairs": [["2", "-2"], ["2", "-2"]]}', ParseError),
        ('{"level": "11", "pairs": []}', ParseError),
        ('{"level": "11", "bound": "2", "pairs": [["2", "x"]]}', ParseError),
        ('{"level": "11", "bound": "2", "pairs": [["2", 1.5]]}', ParseError),
        ("[1, 2]", ParseError),
        ("not json", ParseError),
    ],
)
def test_system_file_errors(text, err):
    with pytest.raises(err):
        parse_system(text)


def test_missing_system_file():
    with pytest.raises(ParseError):
        load_system("/nonexistent/system.json")


# ---------------------------------------------------------------------------
# commands


def test_genus():
    assert cli("genus", 77) == (0, "7\n", "")


def test_space_uses_cache(cache_root):
    code, out1, _ = cli("space", 77)
    assert code == 0
    f1 = _space_fields(out1)
    assert f1["cache"] == "miss" and f1["dimension"] == "10" and f1["genus"] == "7"
    _, out2, _ = cli("space", 77)
    f2 = _space_fields(out2)
    assert f2["cache"] == "hit" and f2["fingerprint"] == f1["fingerprint"]
    assert _space_fields(cli("space", 77, "--sign", "0")[1])["dimension"] == "17"


def test_corrupted_cache_is_rebuilt(cache_root):
    _, out1, _ = cli("space", 31)
    for f in cache_root.glob("*.npz"):
        blob = bytearray(f.read_bytes())
        blob[-10] ^= 0xFF
        f.write_bytes(bytes(blob))
    code, out2, err = cli("space", 31)
    assert code == 0
    assert "warning" in err and "recomputing" in err
    assert _space_fields(out2)["fingerprint"] == _space_fields(out1)["fingerprint"]
    assert _space_fields(out2)["cache"] == "miss"
    assert _space_fields(cli("space", 31)[1])["cache"] == "hit"


def test_cache_disabled(monkeypatch, tmp_path):
    monkeypatch.setenv(cache.CACHE_ENV, "off")
    assert cache.cache_dir() is None
    for _ in range(2):
        assert _space_fields(cli("space", 11)[1])["cache"] == "miss"


def test_unwritable_cache_warns_and_continues(monkeypatch, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    monkeypatch.setenv(cache.CACHE_ENV, str(blocker / "sub"))
    code, out, err = cli("space", 11)
    assert code == 0 and "could not write" in err


def test_concurrent_processes_share_the_cache(cache_root):
    env = dict(os.environ, **{cache.CACHE_ENV: str(cache_root)})
    procs = [
        subprocess.Popen(
            [sys.executable, "-m", "hecke_raise.cli", "space", "143"],
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        for _ in range(4)
    ]
    results = [p.communicate() for p in procs]
    assert all(p.returncode == 0 for p in procs)
    assert all("warning" not in err for _, err in results)
    assert len({_space_fields(out)["fingerprint"] for out, _ in results}) == 1
    assert not list(cache_root.glob(".tmp-*"))


def test_eigen():
    code, out, _ = cli("eigen", 37)
    assert code == 0
    assert "form 0: a2=-2 a3=-3" in out and "form 1: a2=0 a3=1" in out
    code, out, _ = cli("eigen", 11, "--bound", 13, "--json")
    (system,) = json.loads(out)
    assert system["pairs"][-1] == ["13", "4"]


def test_search():
    code, out, _ = cli("search", "--level", 11, "--ell", 3, "--n", 1, "--pmax", 40)
    assert code == 0
    assert out.splitlines() == ["screen passed", "7 -", "13 -", "29 +", "29 -", "31 -"]
    code, out, _ = cli("search", "--level", 11, "--ell", 5, "--n", 1, "--pmax", 10)
    assert out.splitlines()[0].startswith("screen failed")


def test_certify_and_verify(tmp_path):
    cert = tmp_path / "c.json"
    args = ["certify", "--level", 11, "--p", 7, "--ell", 3, "--n", 1, "--sign", "-"]
    assert cli(*args, "--out", cert)[0] == 0
    code, out, _ = cli("verify", cert)
    assert code == 0 and out.rstrip().endswith("VERIFIED")
    # the same invocation gives the same bytes
    code, out, _ = cli(*args)
    assert out == cert.read_text()


def test_certify_from_system_file(tmp_path):
    cert = tmp_path / "c.json"
    code, _, err = cli(
        "certify", "--level", 11, "--p", 13, "--ell", 3, "--n", 2, "--sign", "-",
        "--system", DATA / "11a.json", "--out", cert,
    )
    assert code == 0, err
    assert json.loads(cert.read_text())["source"] == {"kind": "user"}
    assert cli("verify", cert)[0] == 0


def test_verify_rejects_tampering(tmp_path):
    cert = tmp_path / "c.json"
    cli("certify", "--level", 11, "--p", 7, "--ell", 3, "--n", 1, "--sign", "-", "--out", cert)
    d = json.loads(cert.read_text())
    d["up_eigenvalue"] = "1"
    cert.write_text(json.dumps(d))
    code, out, _ = cli("verify", cert)
    assert code == 1 and "NOT VERIFIED" in out
    d["format_version"] = "9"
    cert.write_text(json.dumps(d))
    assert cli("verify", cert)[0] == 1


@pytest.mark.parametrize(
    "argv,code,needle",
    [
        (["certify", "--level", 11, "--p", 11, "--ell", 3, "--n", 1, "--sign", "-"], 2, "divides"),
        (["certify", "--level", 11, "--p", 9, "--ell", 3, "--n", 1, "--sign", "-"], 2, "not prime"),
        (["certify", "--level", 11, "--p", 7, "--ell", 4, "--n", 1, "--sign", "-"], 2, "not prime"),
        (["certify", "--level", 37, "--p", 7, "--ell", 3, "--n", 1, "--sign", "-"], 2, "--form"),
        (["certify", "--level", 11, "--p", 7, "--ell", 3, "--n", 1, "--sign", "+"], 1, "is not"),
        (["certify", "--level", 11, "--p", 7, "--ell", 5, "--n", 1, "--sign", "+"], 1, "screen"),
        (["certify", "--level", 11, "--p", 7, "--ell", 3, "--n", 1, "--sign", "x"], 2, "sign"),
        (["search", "--level", 11, "--ell", 3, "--n", 1, "--pmax", 300, "--system", DATA / "11a.json"], 2, "known up to"),
        (["verify", "/nonexistent.json"], 2, "cannot read"),
        (["genus", 0], 2, "positive"),
        (["frobnicate"], 2, "invalid choice"),
    ],
)
def test_exit_codes(argv, code, needle, capsys):
    got, out, err = cli(*argv)
    assert got == code
    assert needle in err + capsys.readouterr().err
