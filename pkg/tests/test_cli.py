import json
import subprocess
import sys

import pytest

from manifold_rewiring.cli import main
from manifold_rewiring.graph import read_edge_list


def run(argv):
    code = main([str(a) for a in argv])
    return code


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


@pytest.fixture(scope="module")
def model(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "train"
    assert main(["train", "--m", "200", "--k", "6", "--epochs", "3", "--out", str(out)]) == 0
    return out / "model.json"


@pytest.fixture(scope="module")
def target(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "target"
    assert main(["target-graph", "--m", "150", "--k", "6", "--out", str(out)]) == 0
    return out / "target.edges"


def test_target_graph_outputs(target):
    out = target.parent
    assert {p.name for p in out.iterdir()} == {"target.edges", "points.csv", "degrees.csv", "manifest.json"}
    m = manifest(out)
    assert m["command"] == "target-graph" and m["config"]["k"] == 6
    assert "out" not in m["config"]
    assert m["metrics"]["min_degree"] >= 6
    assert read_edge_list(target).n_vertices == 150


def test_train_outputs(model):
    out = model.parent
    m = manifest(out)
    assert m["metrics"]["n_val"] > 0 and 0 <= m["metrics"]["val_auc"] <= 1
    lines = (out / "loss.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss" and len(lines) == 4
    assert json.loads(model.read_text())["hops"] == 2


def test_train_from_graph_with_features(tmp_path, target):
    out = tmp_path / "t"
    assert run(["train", "--graph", target, "--epochs", "2", "--val", "0", "--dump-features",
                 "--hops", "1", "--out", out]) == 0
    assert (out / "training.csv").read_text().startswith("label,plus_2,minus_2\n")


@pytest.mark.parametrize("method", ["iterative", "threshold"])
def test_rewire_outputs(tmp_path, model, target, method):
    out = tmp_path / "r"
    assert run(["rewire", "--graph", target, "--model", model, "--method", method,
                 "--trustworthy", "5", "--out", out]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"rewired.edges", "removed.csv", "removals.csv", "degrees.csv", "trustworthy.csv",
            "manifest.json"} <= names
    m = manifest(out)["metrics"]
    assert m["hops"] == 2 and m["edges_after"] <= m["edges_before"]


def test_hops_mismatch_is_usage_error(tmp_path, model, target, capsys):
    code = main(["rewire", "--graph", str(target), "--model", str(model), "--hops", "3",
                 "--out", str(tmp_path / "r")])
    assert code == 1
    assert "--hops" in capsys.readouterr().err
    assert not (tmp_path / "r").exists()


def test_simulate_outputs(tmp_path):
    out = tmp_path / "s"
    assert main(["simulate", "--n", "16", "--m", "20", "--snr", "0.1", "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"volume.mrv", "stack.mrs", "angles.csv", "manifest.json"}
    assert len((out / "angles.csv").read_text().splitlines()) == 21


def test_synth_circle_outputs(tmp_path):
    out = tmp_path / "c"
    assert main(["synth-circle", "--m", "40", "--k", "6", "--sigmas", "0.05", "--copies", "2",
                 "--epochs", "3", "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"points.csv", "noisy_0.edges", "denoised_0.edges", "arc_hist.csv", "summary.csv"} <= names


def test_synth_grid_outputs(tmp_path):
    out = tmp_path / "g"
    assert main(["synth-grid", "--side", "6", "--copies", "1", "--epochs", "2", "--out", str(out)]) == 0
    assert (out / "length_hist.csv").read_text().startswith("set,bin_center,count\n")


def test_cryoem_eval_smoke(tmp_path, model):
    out = tmp_path / "e"
    assert main(["cryoem-eval", "--n", "16", "--m", "60", "--k", "6", "--model", str(model),
                 "--max-iters", "50", "--out", str(out)]) == 0
    m = manifest(out)["metrics"]
    for key in ("median_view_deg_before", "median_view_deg_after", "mann_whitney_p", "iterations"):
        assert key in m
    assert (out / "hist_before.csv").read_text().startswith("bin_center,density\n")


def test_verify_prop1(tmp_path, capsys):
    out = tmp_path / "v"
    assert main(["verify-prop1", "--count", "5000", "--out", str(out)]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["metrics"]["count"] == 5000
    assert len((out / "bins.csv").read_text().splitlines()) == 49


def test_rerun_byte_identical(tmp_path, target, model):
    for name in ("a", "b"):
        assert main(["rewire", "--graph", str(target), "--model", str(model), "--seed", "3",
                     "--out", str(tmp_path / name)]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


@pytest.mark.parametrize("argv,flag", [
    (["target-graph", "--m", "-3"], "--m"),
    (["target-graph", "--sigma", "nan"], "--sigma"),
    (["rewire", "--graph", "x", "--model", "y", "--tau", "1.5"], "--tau"),
    (["train", "--val", "1.0"], "--val"),
    (["simulate", "--seed", "-1"], "--seed"),
    (["synth-circle", "--sigmas", "0.1,abc"], "--sigmas"),
    (["target-graph", "--m", "10", "--k", "10"], "--k"),
    (["rewire", "--graph", "missing.edges", "--model", "m.json"], "--graph"),
])
def test_usage_errors(tmp_path, capsys, argv, flag):
    assert main(argv + ["--out", str(tmp_path / "o")]) == 1
    assert flag in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_out_and_command(capsys):
    assert main(["simulate"]) == 1
    assert main([]) == 1


def test_runtime_failure_removes_partial_output(tmp_path, model, capsys):
    bad = tmp_path / "bad.edges"
    bad.write_text("0 1\nnot an edge\n")
    out = tmp_path / "r"
    assert main(["rewire", "--graph", str(bad), "--model", str(model), "--out", str(out)]) == 2
    assert "failed" in capsys.readouterr().err
    assert not out.exists()
    assert not any(p.name.startswith(".r.stage") for p in tmp_path.iterdir())


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "manifold_rewiring", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip().endswith("0.1.0")
