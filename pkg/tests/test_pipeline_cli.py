import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from coolscreen import cli
from coolscreen.pipeline import STAGES, ChainBroken, load_config, run_pipeline, verify_chain

ROOT = Path(__file__).resolve().parents[1]

SMALL = {
    "seed": 3,
    "oracle": True,
    "demo": {
        "n_alcohols": 12, "n_chlorides": 5, "n_acids": 5, "n_purchasables": 6,
        "corpus_molecules": 60, "corpus_products": 60, "teacher_epochs": 3,
        "surrogate_epochs": 20, "surrogate_fraction": 0.05, "fidelity_pairs": 50,
    },
    "bias_sim": {"k": 3, "rho": -0.3, "threshold": -1.0, "sigma_pred": 0.3, "n": 20000},
}


def _write_config(path, out_dir, **extra):
    cfg = dict(SMALL, out_dir=str(out_dir), **extra)
    path.write_text(json.dumps(cfg))
    return path


def _manifests(out_dir):
    mdir = Path(out_dir) / "manifests"
    return {p.name: p.read_bytes() for p in sorted(mdir.glob("*.json"))}


@pytest.fixture(scope="module")
def small_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("runs")
    outs = []
    for name in ("a", "b"):
        cfg = load_config(_write_config(base / f"{name}.json", base / name))
        code, manifests = run_pipeline(cfg)
        assert code == 0, manifests
        outs.append(base / name)
    return outs


def test_full_run_writes_every_stage(small_runs):
    out = small_runs[0]
    assert set(_manifests(out)) == {f"{s}.json" for s in STAGES}
    for stage in STAGES:
        m = json.loads((out / "manifests" / f"{stage}.json").read_text())
        assert m["status"] == "ok" and m["stage"] == stage and m["seed"] == 3
        assert len(m["config_sha256"]) == 64
    for name in ("products.csv", "teacher.cfw", "reactants.emb1", "surrogate.cfw", "fidelity.csv",
                 "screen_report.json", "candidates.csv", "bias.json", "fp_inflation.csv", "timings.json"):
        assert (out / name).exists(), name
    react = json.loads((out / "manifests" / "react.json").read_text())
    assert react["counts"]["total"] == react["counts"]["ethers"] + react["counts"]["esters"]
    assert verify_chain(out) == list(STAGES)


def test_reruns_are_byte_identical(small_runs):
    a, b = small_runs
    assert _manifests(a) == _manifests(b)
    assert (a / "candidates.csv").read_bytes() == (b / "candidates.csv").read_bytes()


def test_tampering_breaks_chain(small_runs, tmp_path):
    import shutil

    copy = tmp_path / "copy"
    shutil.copytree(small_runs[0], copy)
    verify_chain(copy)
    with open(copy / "candidates.csv", "a") as fh:
        fh.write("x\n")
    with pytest.raises(ChainBroken):
        verify_chain(copy)
    assert cli.main(["report", str(copy)]) == 1
    assert cli.main(["report", str(small_runs[1])]) == 0


def test_filter_only_run(tmp_path):
    lib = tmp_path / "lib.smi"
    lib.write_text("\n".join(["CCO", "CCCCCC", "c1ccccc1", "C1CCC1", "CCCl", "CCSCC", "CCCCO",
                              "C[Si](C)(C)O[Si](C)(C)C", "CCCCBr", "CC(=O)O"]) + "\n")
    cfg_path = _write_config(tmp_path / "c.json", "out", library="lib.smi", stages=["filter"])
    code, manifests = run_pipeline(load_config(cfg_path))
    assert code == 0
    counts = manifests[0]["counts"]
    assert counts["in"] == 10 and counts["out"] <= 10
    assert counts["out"] == 6
    assert (tmp_path / "out" / "library.filtered.smi").exists()


def test_failed_stage_is_recorded(tmp_path):
    cfg_path = _write_config(tmp_path / "c.json", "out", library="missing.smi", stages=["filter", "react"])
    code, manifests = run_pipeline(load_config(cfg_path))
    assert code == 1 and len(manifests) == 1
    m = json.loads((tmp_path / "out" / "manifests" / "filter.json").read_text())
    assert m["status"] == "error" and "missing.smi" in m["error"]
    assert cli.main(["run", "--config", str(cfg_path)]) == 1


def test_unknown_stage_rejected(tmp_path):
    cfg_path = _write_config(tmp_path / "c.json", "out", stages=["nope"])
    with pytest.raises(ValueError):
        run_pipeline(load_config(cfg_path))


def test_bench(small_runs):
    empty = cli_bench(["--empty"])
    assert all(empty[k]["per_second"] == 0.0 for k in ("parse", "filter", "react", "teacher", "surrogate"))
    res = cli_bench(["--teacher", str(small_runs[0] / "teacher.cfw")])
    assert all(res[k]["per_second"] > 0 for k in ("parse", "filter", "react", "teacher", "surrogate"))
    assert res["surrogate"]["per_second"] > res["teacher"]["per_second"]


def cli_bench(extra):
    import io
    from contextlib import redirect_stdout

    buf = io.StringIO()
    with redirect_stdout(buf):
        assert cli.main(["bench", *extra]) == 0
    return json.loads(buf.getvalue())


def _run_cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "coolscreen.cli", *args], capture_output=True, text=True,
                          env={**os.environ, **(env or {})}, cwd=ROOT)


def test_exit_codes(tmp_path):
    ok = _run_cli("parse", "CCO", "OCC")
    assert ok.returncode == 0
    lines = ok.stdout.splitlines()
    assert len(lines) == 3 and lines[1].split(",")[0] == lines[2].split(",")[0] == "CCO"
    assert _run_cli("no-such-command").returncode == 2
    assert _run_cli("parse").returncode == 2
    assert _run_cli("react", "--alcohols", "x.smi", "--shard", "3/2").returncode == 2
    bad = _run_cli("parse", "C1CC")
    assert bad.returncode == 1 and "error" in bad.stderr
    assert _run_cli("parse", "CCO", env={"COOLANT_THREADS": "0"}).returncode == 2


def test_thread_cap():
    env = {"COOLANT_THREADS": "3"}
    assert cli.apply_thread_cap(env) == 3
    assert env["OMP_NUM_THREADS"] == env["OPENBLAS_NUM_THREADS"] == env["MKL_NUM_THREADS"] == "3"
    assert cli.apply_thread_cap({}) is None
    with pytest.raises(ValueError):
        cli.apply_thread_cap({"COOLANT_THREADS": "-1"})


def test_filter_and_react_commands(tmp_path, capsys):
    (tmp_path / "in.smi").write_text("CCO\nc1ccccc1\nCCCl\n")
    assert cli.main(["filter", "--in", str(tmp_path / "in.smi"), "--stage", "post", "--out",
                     str(tmp_path / "o.smi"), "--report", str(tmp_path / "r.json")]) == 0
    assert (tmp_path / "o.smi").read_text() == "CCO\n"
    assert json.loads((tmp_path / "r.json").read_text())["total"] == 3

    (tmp_path / "a.smi").write_text("CCO\nCCCO\n")
    (tmp_path / "c.smi").write_text("CCCl\n")
    (tmp_path / "x.smi").write_text("CC(=O)O\n")
    base = ["react", "--alcohols", str(tmp_path / "a.smi"), "--chlorides", str(tmp_path / "c.smi"),
            "--acids", str(tmp_path / "x.smi")]
    capsys.readouterr()
    assert cli.main(base + ["--count-only"]) == 0
    assert json.loads(capsys.readouterr().out)["total"] == 4
    assert cli.main(base + ["--out", str(tmp_path / "p.csv")]) == 0
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "smiles,reaction,alcohol,partner" and len(rows) == 5
    assert cli.main(base) == 2


def test_bias_commands(tmp_path, capsys):
    assert cli.main(["bias", "check", "--summary", str(tmp_path / "c.json")]) == 0
    summary = json.loads((tmp_path / "c.json").read_text())
    assert summary["cells"] == 150 and summary["failed"] == []
    assert cli.main(["bias", "scan", "--steps", "5", "--csv", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "rho,joint,err"
    assert cli.main(["bias", "sim", "--k", "3", "--n", "20000", "--csv", str(tmp_path / "f.csv")]) == 0
    assert len((tmp_path / "f.csv").read_text().splitlines()) == 4
    assert cli.main(["bias", "sim", "--structure", "equi", "--k", "6", "--n", "100"]) == 1


def test_train_and_screen_commands(small_runs, tmp_path, capsys):
    out = small_runs[0]
    assert cli.main(["train-gate", "--synthetic", "40", "--epochs", "2", "--out", str(tmp_path / "g")]) == 0
    assert (tmp_path / "g" / "gate.cfw").exists()
    assert cli.main(["train-stl", "--synthetic", "40", "--epochs", "2", "--task", "B",
                     "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "stl_B.cfw").exists()
    assert cli.main(["train-gate", "--out", str(tmp_path / "x")]) == 2
    reactants = ["--alcohols", str(out / "alcohols.filtered.smi"), "--chlorides", str(out / "chlorides.filtered.smi"),
                 "--acids", str(out / "acids.filtered.smi")]
    assert cli.main(["train-surrogate", "--teacher", str(out / "teacher.cfw"), *reactants, "--epochs", "5",
                     "--fraction", "0.05", "--fidelity-pairs", "20", "--out", str(tmp_path / "sur")]) == 0
    assert (tmp_path / "sur" / "fidelity.csv").exists()
    capsys.readouterr()
    assert cli.main(["screen", "--teacher", str(out / "teacher.cfw"), "--surrogate", str(tmp_path / "sur" / "surrogate.cfw"),
                     *reactants, "--relax", "0.3", "--oracle", "--report", str(tmp_path / "rep.json"),
                     "--candidates", str(tmp_path / "cand.csv")]) == 0
    rep = json.loads((tmp_path / "rep.json").read_text())
    assert rep["stages"]["library_size"] >= rep["stages"]["surrogate_pass"] >= rep["stages"]["teacher_pass"]
    assert rep["missed_candidates"] is not None
    assert cli.main(["screen", "--teacher", str(out / "teacher.cfw"), "--surrogate",
                     str(tmp_path / "sur" / "surrogate.cfw"), *reactants, "--relax", "-0.1"]) == 1


def test_shipped_demo_config(demo_runs):
    code, out = demo_runs[0]
    assert code == 0
    lines = (out / "candidates.csv").read_text().splitlines()
    assert len(lines) > 1
    assert verify_chain(out) == list(STAGES)
