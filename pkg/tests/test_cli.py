import csv
import io
import json
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from gcr import checkpoint as ck
from gcr.bench import parse_shapes, run_benchmark
from gcr.cli import main
from gcr.grassmann import ProductGrassmannParam
from gcr.heads import GcrHead
from gcr.linalg import qf
from gcr.train import Model


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def blob_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    code, _, err = run("gen-data", "--classes", 3, "--dim", 10, "--per-class", 60,
                       "--spread", 0.6, "--test-per-class", 30, "--seed", 4, "--out", d)
    assert code == 0, err
    return d


@pytest.fixture(scope="module")
def gcr_run(blob_dir, tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("runs") / "gcr"
    code, out, err = run("train", "--features", blob_dir / "features.csv", "--labels",
                         blob_dir / "labels.csv", "--run-dir", run_dir, "--epochs", 8,
                         "--k", 8, "--gamma", 25, "--hidden", 32, "--feature-dim", 16)
    assert code == 0, err
    return run_dir


def test_gen_data_point_masses(tmp_path):
    code, _, _ = run("gen-data", "--classes", 2, "--dim", 4, "--per-class", 10, "--spread", 0,
                     "--out", tmp_path)
    assert code == 0
    x = np.loadtxt(tmp_path / "features.csv", delimiter=",", skiprows=1)
    y = np.loadtxt(tmp_path / "labels.csv", delimiter=",", skiprows=1)
    assert len(np.unique(x[y == 0], axis=0)) == 1 and len(np.unique(x[y == 1], axis=0)) == 1


def test_gen_data_balanced_and_deterministic(tmp_path):
    args = ["gen-data", "--classes", 10, "--dim", 64, "--per-class", 500, "--spread", 0.5,
            "--seed", 9]
    assert run(*args, "--out", tmp_path / "a")[0] == 0
    assert run(*args, "--out", tmp_path / "b")[0] == 0
    y = np.loadtxt(tmp_path / "a" / "labels.csv", skiprows=1)
    assert np.array_equal(np.bincount(y.astype(int)), [500] * 10)
    for name in ("features.csv", "labels.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_gen_data_invalid_spec(tmp_path):
    code, _, err = run("gen-data", "--classes", 0, "--dim", 4, "--per-class", 3, "--out", tmp_path)
    assert code == 2 and err.startswith("error: InvalidSpec:")


def test_train_writes_run_directory(gcr_run):
    rows = read_csv(gcr_run / "metrics.csv")
    assert rows[0] == ["epoch", "step", "loss", "top1", "ortho_error", "wall_ms"]
    assert float(rows[-1][4]) <= 1e-6
    manifest = json.loads((gcr_run / "manifest.json").read_text())
    assert manifest["config"]["k"] == 8 and manifest["config"]["gamma"] == 25.0
    meta = ck.load(gcr_run / "checkpoint.gcr").metadata
    assert meta["run_hash"] == manifest["run_hash"]


def test_train_linear_has_same_schema(blob_dir, tmp_path):
    code, _, _ = run("train", "--features", blob_dir / "features.csv", "--labels",
                     blob_dir / "labels.csv", "--run-dir", tmp_path / "lin", "--head", "linear",
                     "--epochs", 2)
    assert code == 0
    assert read_csv(tmp_path / "lin" / "metrics.csv")[0] == [
        "epoch", "step", "loss", "top1", "ortho_error", "wall_ms"]


def test_train_refuses_existing_run(gcr_run, blob_dir):
    code, _, err = run("train", "--features", blob_dir / "features.csv", "--labels",
                       blob_dir / "labels.csv", "--run-dir", gcr_run)
    assert code == 2 and "append-only" in err


def test_train_config_file_and_default_root(blob_dir, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"head": "cosine", "epochs": 1, "seed": 3}))
    monkeypatch.setenv("GCR_OUTPUT_ROOT", str(tmp_path / "root"))
    code, out, _ = run("train", "--config", cfg, "--features", blob_dir / "features.csv",
                       "--labels", blob_dir / "labels.csv", "--epochs", 2)
    assert code == 0
    (run_dir,) = (tmp_path / "root").iterdir()
    assert json.loads((run_dir / "manifest.json").read_text())["config"]["epochs"] == 2
    assert ck.load(run_dir / "checkpoint.gcr").model.head.kind == "cosine"


def test_train_bad_config_key(blob_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"depth": 3}))
    code, _, err = run("train", "--config", cfg, "--features", blob_dir / "features.csv",
                       "--labels", blob_dir / "labels.csv", "--run-dir", tmp_path / "r")
    assert code == 2 and err.count("\n") == 1 and err.startswith("error: InvalidSpec:")


def test_retraction_parity(blob_dir, tmp_path):
    accs = {}
    for retraction in ("geodesic", "qr"):
        run_dir = tmp_path / retraction
        assert run("train", "--features", blob_dir / "features.csv", "--labels",
                   blob_dir / "labels.csv", "--run-dir", run_dir, "--epochs", 8, "--k", 2,
                   "--retraction", retraction)[0] == 0
        accs[retraction] = float(read_csv(run_dir / "metrics.csv")[-1][3])
    assert abs(accs["geodesic"] - accs["qr"]) <= 0.01


def test_eval_matches_training_log_and_is_deterministic(gcr_run, blob_dir):
    args = ("eval", "--checkpoint", gcr_run / "checkpoint.gcr", "--features",
            blob_dir / "features.csv", "--labels", blob_dir / "labels.csv")
    code, out, _ = run(*args)
    assert code == 0
    logged = read_csv(gcr_run / "metrics.csv")[-1][3]
    assert out.splitlines()[0] == f"top1={logged}"
    assert out.splitlines()[1] == "class,count,accuracy"
    assert run(*args)[1] == out


def test_eval_truncated_checkpoint(gcr_run, blob_dir, tmp_path):
    bad = tmp_path / "bad.gcr"
    bad.write_bytes((gcr_run / "checkpoint.gcr").read_bytes()[:200])
    code, out, err = run("eval", "--checkpoint", bad, "--features", blob_dir / "features.csv",
                         "--labels", blob_dir / "labels.csv")
    assert code == 2 and out == "" and err.startswith("error: CorruptContainer:")


def test_angles_of_orthogonal_k1_head(tmp_path):
    q = qf(np.random.default_rng(0).standard_normal((8, 5)))
    head = GcrHead(ProductGrassmannParam(q, [1] * 5))
    ck.save(tmp_path / "h.gcr", ck.Checkpoint(Model(None, head), None))
    code, _, _ = run("angles", "--checkpoint", tmp_path / "h.gcr", "--out", tmp_path / "ang")
    assert code == 0
    mins = np.loadtxt(tmp_path / "ang" / "min_angle.csv", delimiter=",", skiprows=1)
    off = ~np.eye(5, dtype=bool)
    np.testing.assert_allclose(mins[off], 90.0, atol=1e-8)
    assert read_csv(tmp_path / "ang" / "angles.csv")[0] == ["i", "j", "theta1"]


def test_angles_rejects_vector_head(blob_dir, tmp_path):
    code = run("train", "--features", blob_dir / "features.csv", "--labels",
               blob_dir / "labels.csv", "--run-dir", tmp_path / "l", "--head", "linear",
               "--epochs", 1)[0]
    assert code == 0
    code, _, err = run("angles", "--checkpoint", tmp_path / "l" / "checkpoint.gcr", "--out",
                       tmp_path / "o")
    assert code == 2


def test_feature_stats(gcr_run, blob_dir):
    code, out, _ = run("feature-stats", "--checkpoint", gcr_run / "checkpoint.gcr",
                       "--features", blob_dir / "features.csv", "--labels",
                       blob_dir / "labels.csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["metric", "value"] and [r[0] for r in rows[1:]] == ["variability", "r2"]
    assert 0 < float(rows[1][1]) < 180 and float(rows[2][1]) <= 1


def test_feature_stats_single_class(tmp_path):
    feats = tmp_path / "f.csv"
    feats.write_text("a,b\n1,0\n0,1\n1,1\n")
    labels = tmp_path / "l.csv"
    labels.write_text("label\n0\n0\n0\n")
    code, _, err = run("feature-stats", "--feature-csv", feats, "--labels", labels)
    assert code == 2 and err.startswith("error: EmptyClass:")


def test_feature_stats_gcr_vs_linear_variability(tmp_path):
    """Directional check on a spread-rich set: median over 5 seeds."""
    data = tmp_path / "d"
    assert run("gen-data", "--classes", 5, "--dim", 16, "--per-class", 80, "--spread", 1.5,
               "--modes", 3, "--seed", 1, "--out", data)[0] == 0
    var = {"gcr": [], "linear": []}
    for seed in range(5):
        for head in var:
            run_dir = tmp_path / f"{head}{seed}"
            assert run("train", "--features", data / "features.csv", "--labels",
                       data / "labels.csv", "--run-dir", run_dir, "--head", head, "--k", 8,
                       "--epochs", 10, "--hidden", 32, "--feature-dim", 16,
                       "--seed", seed)[0] == 0
            out = run("feature-stats", "--checkpoint", run_dir / "checkpoint.gcr", "--features",
                      data / "features.csv", "--labels", data / "labels.csv")[1]
            var[head].append(float(out.splitlines()[1].split(",")[1]))
    assert np.median(var["gcr"]) >= np.median(var["linear"])


def test_bench_covers_grid_and_is_stable(tmp_path):
    code, _, _ = run("bench", "--shapes", "20x64x1,20x64x4", "--repeats", 3, "--out",
                     tmp_path / "b.csv")
    assert code == 0
    rows = read_csv(tmp_path / "b.csv")
    assert rows[0] == ["C", "n", "k", "svd_ms", "qr_ms"]
    assert [tuple(map(int, r[:3])) for r in rows[1:]] == [(20, 64, 1), (20, 64, 4)]
    assert all(float(v) > 0 for r in rows[1:] for v in r[3:])
    shapes = parse_shapes("50x128x4")
    a = run_benchmark(shapes, repeats=9)[0]
    b = run_benchmark(shapes, repeats=9)[0]
    for key in ("svd_ms", "qr_ms"):
        assert 0.5 <= a[key] / b[key] <= 1.5


def test_usage_errors():
    assert run()[0] == 1
    code, _, err = run("bench", "--shapes", "3x4")
    assert code == 1 and err.startswith("error: Usage:")


def test_missing_input_file(tmp_path):
    code, _, err = run("eval", "--checkpoint", tmp_path / "nope.gcr", "--features", "x",
                       "--labels", "y")
    assert code == 2 and err.startswith("error: DataError:")
