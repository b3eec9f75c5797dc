import io as stdio
import json
import subprocess
import sys

import numpy as np
import pytest

from vnsplit import cli
from vnsplit import documents as docs
from vnsplit.errors import DimensionMismatch, ParseError, UnknownFixture
from vnsplit.fixtures import (
    FIXTURES,
    algebra_oplus_generators,
    chi_oplus,
    chi_tensor,
    entangled_balanced,
    fg_counterexample,
    fixture,
    product_channel_kraus,
    unbalanced_00_10,
)


def run(argv, stdin="", monkeypatch=None, capsys=None):
    monkeypatch.setattr(sys, "stdin", stdio.StringIO(stdin))
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def cli_run(monkeypatch, capsys):
    def _run(*argv, stdin=""):
        code, out, err = run(list(argv), stdin, monkeypatch, capsys)
        report = json.loads(out) if out.strip().startswith("{") else None
        return code, report, err

    return _run


def fixture_text(name):
    return docs.encode(cli.fixture_document(name))


@pytest.fixture
def files(tmp_path):
    def write(name, doc):
        p = tmp_path / name
        p.write_text(doc if isinstance(doc, str) else docs.encode(doc))
        return str(p)

    return write


# --- documents ---------------------------------------------------------------


def test_matrix_save_load_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    m[0, 0] = np.nextafter(1.0, 2.0)
    path = tmp_path / "m.json"
    docs.save_matrix(m, path)
    back = docs.load_matrix(path)
    assert back.dtype == complex
    assert np.array_equal(back, m)


def test_identity_round_trip(tmp_path):
    docs.save_matrix(np.eye(2), tmp_path / "i.json")
    assert np.array_equal(docs.load_matrix(tmp_path / "i.json"), np.eye(2))


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"rows": 2,\n  "cols": }')
    with pytest.raises(ParseError) as info:
        docs.load_matrix(path)
    assert (info.value.line, info.value.column) == (2, 11)


def test_matrix_entry_count_checked():
    with pytest.raises(DimensionMismatch):
        docs.matrix_from_doc({"rows": 2, "cols": 2, "data": [[1, 0]] * 3})


@pytest.mark.parametrize("bad", [[["a", 0]], [[1, 2, 3]], [[float("inf"), 0]]])
def test_matrix_entries_checked(bad):
    with pytest.raises(ParseError):
        docs.matrix_from_doc({"rows": 1, "cols": 1, "data": bad})


def test_unknown_fixture():
    with pytest.raises(UnknownFixture):
        fixture("nope")


# --- fixtures ------------------------------------------------------------------


@pytest.mark.parametrize(
    "name,builder",
    [
        ("chi-tensor", chi_tensor),
        ("chi-oplus", chi_oplus),
        ("fg-counterexample", fg_counterexample),
        ("unbalanced-00-10", unbalanced_00_10),
        ("entangled-balanced", entangled_balanced),
    ],
)
def test_splitting_map_fixtures_match_library(cli_run, name, builder):
    code, doc, _ = cli_run("fixture", name)
    assert code == 0
    chi = docs.splitting_map_from_doc(doc)
    assert np.array_equal(chi.isometry, builder().isometry)
    assert (chi.d_L, chi.d_R) == (builder().d_L, builder().d_R)


def test_algebra_and_channel_fixtures_match_library(cli_run):
    _, doc, _ = cli_run("fixture", "algebra-oplus")
    gens = [docs.matrix_from_doc(g) for g in doc["generators"]]
    assert all(np.array_equal(a, b) for a, b in zip(gens, algebra_oplus_generators(), strict=True))
    _, doc, _ = cli_run("fixture", "product-channel")
    kraus = [docs.matrix_from_doc(k) for k in doc["kraus"]]
    assert all(np.array_equal(a, b) for a, b in zip(kraus, product_channel_kraus(), strict=True))


def test_counterexample_fixture_values(cli_run):
    _, doc, _ = cli_run("fixture", "fg-counterexample")
    v = docs.matrix_from_doc(doc["isometry"])
    s = 2**-0.5
    expected = np.zeros((16, 2))
    expected[[0, 5], 0] = s  # |00>, |11>
    expected[[8, 15], 1] = s  # |20>, |33>
    assert np.allclose(v, expected)


def test_every_fixture_is_listed():
    assert set(FIXTURES) == {
        "chi-tensor",
        "chi-oplus",
        "fg-counterexample",
        "unbalanced-00-10",
        "algebra-otimes",
        "algebra-oplus",
        "entangled-balanced",
        "swap-unitary",
        "product-channel",
    }


# --- commands ------------------------------------------------------------------


def _check_report(report, command):
    assert set(report) == {"command", "inputs", "verdicts", "artifacts", "tolerance_used"}
    assert report["command"] == command
    assert all(v.startswith("sha256:") for v in report["inputs"].values())
    for art in report["artifacts"].values():
        kind = docs.document_kind(art)
        assert kind is not None
        # every artifact parses and re-encodes to the same text
        if kind == "matrix":
            assert docs.matrix_to_doc(docs.matrix_from_doc(art)) == art


def _documented_verdicts(group, command):
    _, _, documented, _ = cli.COMMANDS[group][command]
    return {k.strip() for k in documented.split(",")} - {"(none)"}


def test_stloc_of_oplus_fixture(cli_run):
    code, report, _ = cli_run("split", "stloc", "--side", "left", "--json", stdin=fixture_text("chi-oplus"))
    assert code == 0
    assert report["verdicts"]["dim"] == 5
    _check_report(report, "split stloc")


def test_balanced_false_exits_one(cli_run):
    code, report, _ = cli_run("split", "balanced", "--json", stdin=fixture_text("fg-counterexample"))
    assert code == 1
    assert report["verdicts"] == {"balanced": False}


def test_aw_blocks_of_direct_sum(cli_run):
    code, report, _ = cli_run("algebra", "aw", "--json", stdin=fixture_text("algebra-oplus"))
    assert code == 0
    assert report["verdicts"]["blocks"] == [[2, 1], [1, 2]]


def test_parse_error_exit_two(cli_run):
    code, report, err = cli_run("split", "make", stdin='{"rows": 2,\n "cols": ')
    assert code == 2 and report is None
    assert "ParseError" in err


def test_wrong_document_kind_exit_two(cli_run):
    code, _, err = cli_run("split", "make", stdin=fixture_text("algebra-oplus"))
    assert code == 2
    assert "splitting_map" in err


def test_usage_error_exit_two(monkeypatch, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["split", "frobnicate"])
    assert info.value.code == 2


def test_operator_of_wrong_size_exit_two(cli_run, files):
    op = files("op.json", docs.matrix_to_doc(np.eye(2)))
    code, _, err = cli_run("split", "check-local", "--operator", op, stdin=fixture_text("chi-oplus"))
    assert code == 2 and "DimensionMismatch" in err


def test_missing_file_exit_two(cli_run, tmp_path):
    code, _, err = cli_run("split", "make", "-i", str(tmp_path / "absent.json"))
    assert code == 2 and err


def test_tolerance_flag_and_env(cli_run, monkeypatch):
    monkeypatch.setenv("VNSPLIT_TOL", "1e-7")
    _, report, _ = cli_run("split", "lean", "--json", stdin=fixture_text("chi-oplus"))
    assert report["tolerance_used"]["absolute"] == 1e-7
    _, report, _ = cli_run("--tol", "1e-6", "split", "lean", "--json", stdin=fixture_text("chi-oplus"))
    assert report["tolerance_used"]["absolute"] == 1e-6
    _, report, _ = cli_run("split", "lean", "--tol", "1e-5", "--json", stdin=fixture_text("chi-oplus"))
    assert report["tolerance_used"]["absolute"] == 1e-5


def test_out_flag_writes_report(cli_run, tmp_path):
    out = tmp_path / "r.json"
    code, _, _ = cli_run("split", "canonical", "--out", str(out), stdin=fixture_text("algebra-oplus"))
    assert code == 0
    report = json.loads(out.read_text())
    chi = docs.splitting_map_from_doc(report["artifacts"]["splitting_map"])
    assert (chi.d_L, chi.d_R) == (3, 3)


def test_human_output_lists_verdicts(cli_run, capsys):
    code, report, _ = cli_run("split", "balanced", stdin=fixture_text("chi-oplus"))
    assert code == 0 and report is None


def _scenarios(files):
    """One invocation per documented subcommand, with its inputs."""
    rng = np.random.default_rng(0)
    oplus_alg = fixture_text("algebra-oplus")
    chi = files("chi.json", fixture_text("chi-oplus"))
    entangled = fixture_text("entangled-balanced")
    op4 = files("op4.json", docs.matrix_to_doc(rng.standard_normal((4, 4))))
    op_left = files("opl.json", docs.matrix_to_doc(np.kron(np.diag([1.0, 2.0]), np.eye(2))))
    op_diag = files("opd.json", docs.matrix_to_doc(np.diag([1.0, 1.0, 3.0, 3.0])))
    product = files("product.json", fixture_text("product-channel"))
    tensor22 = files("t22.json", docs.splitting_map_to_doc(chi_tensor(2, 2)))
    small = files("small.json", docs.algebra_to_doc(4, [np.diag([1, 1, 2, 2])]))
    big = files("big.json", oplus_alg)
    from vnsplit.splitmap import comprehension_nested_canonical
    from vnsplit.channels import channel_from_kraus, semi_localise
    from vnsplit.vnalg import generate_algebra

    nc = comprehension_nested_canonical(generate_algebra([np.diag([1, 1, 2, 2])], 4), generate_algebra(algebra_oplus_generators(), 4))
    zeta_f = files("zeta.json", docs.splitting_map_to_doc(nc.zeta))
    chi_f = files("chi_nc.json", docs.splitting_map_to_doc(nc.chi))
    wit_f = files("wit.json", docs.witness_to_doc(nc.witness))
    e = channel_from_kraus(product_channel_kraus(), 4, 4)
    sl = files("sl.json", docs.semilocalisation_to_doc(semi_localise(e, chi_tensor(2, 2), chi_tensor(2, 2))))
    return {
        ("algebra", "close"): (["-i", big], "", {"dim": 5}),
        ("algebra", "commutant"): ([], oplus_alg, {"dim": 5}),
        ("algebra", "center"): ([], oplus_alg, {"dim": 2}),
        ("algebra", "atoms"): ([], oplus_alg, {"count": 2}),
        ("algebra", "aw"): ([], oplus_alg, {"blocks": [[2, 1], [1, 2]]}),
        ("algebra", "trace"): (["--operator", op4], oplus_alg, {}),
        ("split", "make"): (["-i", chi], "", {"isometry": True}),
        ("split", "check-local"): (["-i", chi, "--operator", op_diag, "--side", "right"], "", {"local": True}),
        ("split", "check-strict"): (["-i", tensor22, "--operator", op_left], "", {"strictly_local": True}),
        ("split", "cons"): (["-i", chi], "", {"dim": 5}),
        ("split", "stloc"): (["-i", chi, "--side", "right"], "", {"dim": 5}),
        ("split", "balanced"): ([], entangled, {"balanced": True}),
        ("split", "lean"): ([], entangled, {"lean": False}),
        ("split", "canonical"): ([], oplus_alg, {"d_L": 3, "d_R": 3}),
        ("split", "comprehend-verify"): (["--zeta", zeta_f, "--chi", chi_f, "--witness", wit_f], "", {"comprehended": True}),
        ("split", "comprehend-nested"): (["--small", small, "--big", big], "", {"comprehended": True, "d_M": 3}),
        ("split", "comprehend-balanced"): ([], entangled, {"forward": True, "backward": True}),
        ("split", "decompose"): ([], entangled, {"reconstructed": True, "blocks": [[2, 1, 2]]}),
        ("channel", "validate"): (["-i", product], "", {"trace_preserving": True, "completely_positive": True}),
        ("channel", "stinespring"): (["-i", product, "--d-env", "10"], "", {"d_env": 10}),
        ("channel", "chi-trace"): (["--chi", chi, "--operator", op4], "", {}),
        ("channel", "semicausal"): (["-i", product, "--chi-a-prime", tensor22, "--chi-b", tensor22], "", {"semicausal": True}),
        ("channel", "semilocalise"): (["-i", product, "--chi-a-prime", tensor22, "--chi-b", tensor22], "", {"verified": True}),
        ("channel", "verify-sl"): (["-i", product, "--chi-a-prime", tensor22, "--semilocalisation", sl], "", {"verified": True}),
    }


def test_every_subcommand_round_trips(cli_run, files):
    scenarios = _scenarios(files)
    assert set(scenarios) == {(g, c) for g, cmds in cli.COMMANDS.items() for c in cmds}
    for (group, command), (extra, stdin, expected) in scenarios.items():
        code, report, err = cli_run(group, command, "--json", *extra, stdin=stdin)
        assert code == (1 if False in expected.values() else 0), (group, command, err)
        _check_report(report, f"{group} {command}")
        assert set(report["verdicts"]) <= _documented_verdicts(group, command), (group, command)
        for k, v in expected.items():
            assert report["verdicts"][k] == v, (group, command, k)
        # a report can be fed back as the input of a command expecting its artifact kind
        text = json.dumps(report)
        assert json.loads(text) == report


def test_report_artifact_selection(cli_run, files):
    _, report, _ = cli_run("split", "comprehend-balanced", "--json", stdin=fixture_text("entangled-balanced"))
    rep = files("rep.json", report)
    code, out, _ = cli_run(
        "split", "comprehend-verify", "--json",
        "--zeta", rep + "#zeta", "--chi", files("e.json", fixture_text("entangled-balanced")), "--witness", rep + "#forward",
    )
    assert code == 0 and out["verdicts"]["comprehended"] is True
    code, _, err = cli_run("split", "make", "-i", rep + "#missing")
    assert code == 2 and "missing" in err


def test_verdicts_equal_library_calls(cli_run):
    from vnsplit.splitmap import is_balanced, is_lean

    for name in ["chi-oplus", "fg-counterexample", "unbalanced-00-10", "entangled-balanced"]:
        chi = docs.splitting_map_from_doc(json.loads(fixture_text(name)))
        _, rb, _ = cli_run("split", "balanced", "--json", stdin=fixture_text(name))
        _, rl, _ = cli_run("split", "lean", "--json", stdin=fixture_text(name))
        assert rb["verdicts"]["balanced"] == is_balanced(chi)
        assert rl["verdicts"]["lean"] == is_lean(chi)


def test_shell_pipeline():
    exe = [sys.executable, "-m", "vnsplit"]
    fx = subprocess.run(exe + ["fixture", "chi-oplus"], capture_output=True, text=True, check=True)
    st = subprocess.run(exe + ["split", "stloc", "--json"], input=fx.stdout, capture_output=True, text=True)
    assert st.returncode == 0
    canon = subprocess.run(exe + ["split", "canonical", "--json"], input=st.stdout, capture_output=True, text=True)
    assert canon.returncode == 0
    lean = subprocess.run(exe + ["split", "lean", "--json"], input=canon.stdout, capture_output=True, text=True)
    assert json.loads(lean.stdout)["verdicts"] == {"lean": True}
    bal = subprocess.run(exe + ["split", "balanced"], input=fixture_text("fg-counterexample"), capture_output=True, text=True)
    assert bal.returncode == 1
    assert "balanced: False" in bal.stdout
