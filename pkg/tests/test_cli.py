"""
End-to-end tests of the command-line front end
"""
import io
import json

import pytest

from src.cli.app import build_parser, run

GRID = ["--grid", "0.75,0.1,16"]


@pytest.fixture
def cache_args(tmp_path):
    return ["--cache", str(tmp_path / "cache")]


def _report(capsys):
    return json.loads(capsys.readouterr().out)["report"]


def test_unknown_flag_is_a_usage_error():
    stream = io.StringIO()
    assert run(["family", "compute", "--level", "11", "--bogus"], stream) == 1
    line = stream.getvalue().strip()
    assert line.startswith("error category=validation type=UsageError")
    assert "\n" not in line


def test_bad_seed_is_a_validation_error():
    stream = io.StringIO()
    assert run(["model", "sample", "--seed", "zz"], stream) == 1
    assert "category=validation" in stream.getvalue()


def test_every_subcommand_parses():
    parser = build_parser()
    for argv in (
        ["model", "sample"],
        ["family", "import", "--path", "x"],
        ["compare", "--level", "11"],
        ["support-approx", "--target", "const:1"],
        ["check", "petersson", "--level", "11", "--pairs", "2:3"],
        ["check", "reflection", "--level", "11"],
    ):
        assert parser.parse_args(argv).command == argv[0]


def test_family_compute(capsys, cache_args, tmp_path):
    assert run(["family", "compute", "--level", "11", "--coeffs", "1000", *cache_args]) == 0
    report = _report(capsys)
    assert report["g"] == 1 and report["q"] == 11 and report["nmax"] == 1000
    assert report["a_2"] == [pytest.approx(-2.0)]
    assert (tmp_path / "cache" / "q11" / "meta.json").exists()


def test_family_export_and_import(capsys, cache_args, tmp_path):
    target = tmp_path / "exported"
    assert run(["family", "export", "--level", "11", "--coeffs", "500", "--path", str(target), *cache_args]) == 0
    capsys.readouterr()
    assert run(["family", "import", "--path", str(target), "--cache", str(tmp_path / "other")]) == 0
    assert _report(capsys)["nmax"] == 500


def test_import_with_unnormalized_weights(capsys, cache_args, tmp_path):
    target = tmp_path / "exported"
    assert run(["family", "export", "--level", "11", "--coeffs", "200", "--path", str(target), *cache_args]) == 0
    capsys.readouterr()
    meta = json.loads((target / "meta.json").read_text())
    meta["weights"] = [0.5]
    (target / "meta.json").write_text(json.dumps(meta))
    assert run(["family", "import", "--path", str(target)]) == 1
    err = capsys.readouterr().err
    assert "category=validation" in err and "FamilyValidationError" in err


def test_nonprime_level(capsys, cache_args):
    assert run(["family", "compute", "--level", "12", "--coeffs", "100", *cache_args]) == 1
    assert "category=validation" in capsys.readouterr().err


def test_model_ensemble_is_reproducible(tmp_path):
    out = tmp_path / "ensemble.json"
    argv = ["model", "ensemble", "--nmax", "512", "--samples", "10", "--seed", "3", "--threads", "2", "--out", str(out), *GRID]
    assert run(argv) == 0
    first = out.read_bytes()
    assert run([*argv[:-4], "--threads", "1", "--out", str(out), *GRID]) == 0
    second = json.loads(out.read_bytes())
    assert json.loads(first)["samples"] == second["samples"]
    assert run(argv) == 0
    assert out.read_bytes() == first


def test_universality_constant_target(capsys, cache_args):
    argv = ["universality", "--level", "11", "--target", "const:1", "--eps", "0,1000", "--N", "1024", "--coeffs", "4096", *GRID, *cache_args]
    assert run(argv) == 0
    counts = _report(capsys)["counts"]
    assert counts[0]["count"] == 0
    assert counts[1]["count"] == 1


def test_cache_hit_report_matches_cold_run(capsys, cache_args):
    argv = ["universality", "--level", "11", "--target", "const:1", "--eps", "0.5,1,2", "--N", "1024", "--coeffs", "4096", *GRID, *cache_args]
    assert run(argv) == 0
    cold = _report(capsys)
    assert run(argv) == 0
    assert _report(capsys) == cold


def test_inadmissible_target(capsys, cache_args):
    argv = ["universality", "--level", "11", "--target", "const:-1", "--eps", "0.5", *GRID, *cache_args]
    assert run(argv) == 1
    assert "InadmissibleTargetError" in capsys.readouterr().err


def test_second_moment(capsys):
    assert run(["check", "second-moment", "--u-list", "100,1000", "--samples", "50", "--seed", "1"]) == 0
    estimates = _report(capsys)["estimates"]
    assert [e["u"] for e in estimates] == [100, 1000]


def test_report_file(tmp_path, capsys):
    out = tmp_path / "moment.json"
    assert run(["check", "second-moment", "--u-list", "100", "--samples", "20", "--out", str(out)]) == 0
    saved = json.loads(out.read_text())
    assert saved["kind"] == "second-moment"
    assert saved["config"]["command"] == "check second-moment"
    assert (tmp_path / "moment.csv").exists()


@pytest.mark.slow
def test_universality_at_level_101(capsys, cache_args):
    argv = ["universality", "--level", "101", "--target", "const:1", "--eps", "0.5,1,2", "--coeffs", "16384", *cache_args]
    assert run(argv) == 0
    counts = [row["count"] for row in _report(capsys)["counts"]]
    assert counts == sorted(counts)
