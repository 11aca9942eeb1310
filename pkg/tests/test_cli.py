import json
import subprocess
import sys

import pytest

from qlrenorm.cli import OUT_ENV, main


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path))
    return tmp_path


def jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_trees_enumerate(out, capsys):
    assert main(["trees", "enumerate", "--max-noises", "4", "--negative", "--no-x"]) == 0
    text = capsys.readouterr().out
    counts = [line.split() for line in text.splitlines()[1:5]]
    assert counts == [["1", "1"], ["2", "2"], ["3", "6"], ["4", "23"]]
    assert (out / "trees.txt").read_text().startswith("noises count")


def test_trees_jsonl(out):
    assert main(["--format", "jsonl", "trees", "enumerate", "--max-noises", "2", "--no-x"]) == 0
    recs = jsonl(out / "trees.jsonl")
    assert {r["kind"] for r in recs} == {"count", "tree"}
    two = [r for r in recs if r["kind"] == "tree" and r["noises"] == 2]
    assert {r["tree"] for r in two} == {"Xi*I[Xi]", "Ip[Xi]*Ip[Xi]"}
    assert all(r["null"] == "-" for r in two)


def test_null_flag_changes_report(out):
    assert main(["--format", "jsonl", "--null-off", "odd_noise_count", "trees", "enumerate",
                 "--max-noises", "3", "--no-x"]) == 0
    recs = [r for r in jsonl(out / "trees.jsonl") if r["kind"] == "tree" and r["noises"] == 3]
    assert recs and all(r["null"] != "odd_noise_count" for r in recs)


def test_identities(out):
    assert main(["--format", "jsonl", "renorm", "identities", "--name", "i", "--name", "vii"]) == 0
    recs = jsonl(out / "identities.jsonl")
    assert {r["name"] for r in recs} == {"i", "vii"} and all(r["certified"] for r in recs)


def test_expand(out):
    assert main(["expand", "--max-noises", "2"]) == 0
    assert "2 trees, 0 mismatches" in (out / "expansion.txt").read_text()
    assert main(["expand", "--max-noises", "0"]) == 0
    assert "0 trees, 0 mismatches" in (out / "expansion.txt").read_text()


def test_reduce_run(out, capsys):
    assert main(["reduce", "run"]) == 0
    assert "residual on no tree" in capsys.readouterr().out
    assert (out / "ledger.txt").read_text().startswith("step 1: i(l=0)")
    fams = (out / "counterterms.txt").read_text().splitlines()
    assert [f.split(":")[0] for f in fams] == ["a1", "a1^3", "a1a2"]


def test_reduce_jsonl_kinds(out):
    assert main(["--format", "jsonl", "reduce", "run"]) == 0
    kinds = {r["kind"] for r in jsonl(out / "reduce.jsonl")}
    assert kinds == {"step", "dropped", "counterterm"}


def test_reduce_disabled_step_fails(out):
    assert main(["--format", "jsonl", "reduce", "run", "--disable", "xiii"]) == 1
    recs = jsonl(out / "reduce.jsonl")
    assert recs[0] == {"kind": "error", "message": "non-zero residual on AAM, BAM"}
    assert {r["tree"] for r in recs if r["kind"] == "residual"} == {"AAM", "BAM"}
    assert (out / "ledger.txt").exists()


def test_reduce_is_deterministic(tmp_path):
    files = []
    for seed in ("1", "2"):
        d = tmp_path / seed
        env = {"PYTHONHASHSEED": seed, OUT_ENV: str(d), "PATH": ""}
        subprocess.run([sys.executable, "-m", "qlrenorm.cli", "reduce", "run"], env=env, check=True,
                       capture_output=True)
        files.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert files[0] == files[1]


def test_numeric_check(out):
    assert main(["--format", "jsonl", "numeric", "check", "--identity", "i", "--eps", "0.1,0.05,0.025"]) == 0
    recs = jsonl(out / "numeric.jsonl")
    rows = [r for r in recs if r["kind"] == "numeric_residual"]
    assert [r["eps"] for r in rows] == [0.1, 0.05, 0.025]
    assert recs[-1] == {"kind": "numeric_summary", "cauchy_decreasing": True}


def test_numeric_unsupported_identity(out, capsys):
    assert main(["numeric", "check", "--identity", "iii"]) == 2
    assert "no remainder formula" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["--kappa", "2", "trees", "enumerate"],
    ["--truncation", "7", "expand"],
    ["--registry", "/nonexistent.yaml", "renorm", "identities"],
    ["trees", "enumerate", "--max-noises", "9"],
    ["numeric", "check", "--eps", "0.1,-0.05"],
    ["renorm", "identities", "--name", "xv"],
    ["verify-all", "--only", "nothing"],
    ["frobnicate"],
    ["numeric", "check", "--eps", "a,b"],
])
def test_usage_errors_exit_2(out, argv, capsys):
    assert main(argv) == 2


def test_custom_registry(out, tmp_path):
    from importlib import resources

    text = resources.files("qlrenorm").joinpath("data/registry.yaml").read_text()
    bad = tmp_path / "registry.yaml"
    bad.write_text(text.replace('lhs: "T(l) @ g3"', 'lhs: "2*T(l) @ g3"', 1))
    try:
        assert main(["--registry", str(bad), "renorm", "identities", "--name", "i"]) == 1
    finally:
        main(["renorm", "identities", "--name", "i"])
    assert "0 failures" in (out / "identities.txt").read_text()


def test_verify_all_subset(out, capsys):
    assert main(["verify-all", "--only", "census", "--only", "pipeline"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[:2] for line in lines] == [["PASS", "census"], ["PASS", "pipeline"]]
    written = (out / "verify.txt").read_text()
    assert " s," not in written and written.startswith("PASS census:")
