import csv
import json

import numpy as np
import pytest

from quiverlearn.cli import main
from quiverlearn.errors import ConfigError
from quiverlearn.persist import (load_checkpoint, load_config, parse_config, save_checkpoint,
                                 signature_from_doc, signature_to_doc)
from quiverlearn.quiver import diamond_quiver
from quiverlearn.representation import random_rep
from quiverlearn.trainer import predict

BASE = {
    "quiver": {"vertices": [{"id": 1, "n": 2, "d": 1, "role": "input"},
                            {"id": 2, "n": 2, "d": 1, "role": "output"}],
               "arrows": [{"id": 1, "src": 1, "dst": 2}]},
    "algorithm": "eout* . a1 . ein",
    "signature": "hyperbolic",
    "train": {"lr": 0.5, "steps": 15, "seed": 1},
    "data": {"teacher": {"samples": 8, "seed": 0}},
}


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_dim(capsys):
    assert main(["dim", "--config", "diamond"]) == 0
    out = capsys.readouterr().out
    assert "moduli dimension 11" in out
    assert "vertex 4: n=2 d=1 m=4 N=12" in out


def test_check_bundled(tmp_path, capsys):
    assert main(["check", "--config", "diamond", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 6
    report = json.loads((tmp_path / "report.json").read_text())
    assert {c["name"] for c in report["checks"]} >= {"equivariance", "gradient_fd", "grassmann_roundtrip"}


def test_check_failure_exit_code(tmp_path):
    assert main(["check", "--config", "diamond", "--out", str(tmp_path),
                 "--tolerance-scale", "1e-30"]) == 1


def test_train_eval_map(tmp_path, capsys):
    cfg = _write(tmp_path, BASE)
    out = tmp_path / "run"
    assert main(["train", "--config", cfg, "--out", str(out)]) == 0
    with open(out / "history.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["step"] == "0" and len(rows) == 16
    costs = [float(r["cost"]) for r in rows]
    assert all(b < a for a, b in zip(costs, costs[1:]))
    report = json.loads((out / "report.json").read_text())
    assert set(report) == {"config", "checks", "history", "metrics"}

    inputs = tmp_path / "x.csv"
    inputs.write_text("x0,x1\n1.0,0.5\n-0.25,2.0\n")
    preds = tmp_path / "pred.csv"
    assert main(["eval", "--checkpoint", str(out / "checkpoint.json"), "--inputs", str(inputs),
                 "--out", str(preds)]) == 0
    with open(preds) as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["y0_re", "y0_im", "y1_re", "y1_im"]
    p, _ = load_checkpoint(out / "checkpoint.json")
    rc = load_config(cfg)
    want = predict(rc.train_config(rc.dataset()), p, np.array([[1.0, -0.25], [0.5, 2.0]]))
    expected = np.column_stack([want[0].real, want[0].imag, want[1].real, want[1].imag])
    # 17 significant digits round-trip exactly
    assert np.array_equal(np.array([[float(v) for v in r] for r in got[1:]]), expected)

    assert main(["map", "--checkpoint", str(out / "checkpoint.json"), "--out", str(tmp_path / "g")]) == 0
    doc = json.loads((tmp_path / "g" / "grassmann.json").read_text())
    assert doc["roundtrip_residual"] < 1e-10 and doc["metric_residual"] < 1e-10


def test_rerun_reproduces_history(tmp_path):
    cfg = _write(tmp_path, BASE)
    main(["train", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["train", "--config", cfg, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "history.csv").read_bytes() == (tmp_path / "b" / "history.csv").read_bytes()
    assert (tmp_path / "a" / "checkpoint.json").read_bytes() == (tmp_path / "b" / "checkpoint.json").read_bytes()


def test_seed_override_changes_run(tmp_path):
    cfg = _write(tmp_path, BASE)
    main(["train", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["train", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5"])
    assert (tmp_path / "a" / "history.csv").read_bytes() != (tmp_path / "b" / "history.csv").read_bytes()


def test_real_mode_eval_columns(tmp_path):
    doc = dict(BASE, real=True, signature="euclidean")
    cfg = _write(tmp_path, doc)
    main(["train", "--config", cfg, "--out", str(tmp_path / "r")])
    (tmp_path / "x.csv").write_text("x0,x1\n1,2\n")
    main(["eval", "--checkpoint", str(tmp_path / "r" / "checkpoint.json"),
          "--inputs", str(tmp_path / "x.csv"), "--out", str(tmp_path / "p.csv")])
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "y0,y1"


@pytest.mark.parametrize("real", [False, True])
def test_checkpoint_roundtrip_bit_exact(tmp_path, real):
    q = diamond_quiver(n=(3, 2, 2, 2), d=(2, 1, 1, 1))
    p = random_rep(q, 3, "hyperbolic", real=real)
    save_checkpoint(tmp_path / "c.json", p, "eout*.a3.a1.ein", "hyperbolic")
    back, doc = load_checkpoint(tmp_path / "c.json")
    assert back.equals(p)
    assert doc["algorithm"] == "eout*.a3.a1.ein" and doc["signature"] == "hyperbolic"


def test_cyclic_config_names_cycle(tmp_path, capsys):
    doc = json.loads(json.dumps(BASE))
    doc["quiver"]["arrows"].append({"id": 2, "src": 2, "dst": 1})
    with pytest.raises(ConfigError, match="1 -> 2 -> 1"):
        parse_config(doc)
    assert main(["dim", "--config", _write(tmp_path, doc)]) == 2
    assert "cycle" in capsys.readouterr().err


@pytest.mark.parametrize("signature", ["hyperbolic", "euclidean", -0.5])
def test_short_framing_rejected(signature):
    doc = json.loads(json.dumps(BASE))
    doc["quiver"]["vertices"][0]["n"] = 0
    doc["signature"] = signature
    with pytest.raises(ConfigError, match="n_i >= d_i"):
        parse_config(doc)


def test_short_framing_allowed_for_compact():
    doc = json.loads(json.dumps(BASE))
    doc["quiver"]["vertices"][1].update(n=1, d=2)
    doc["signature"] = "compact"
    rc = parse_config(doc)
    assert rc.quiver.vertex(2).n < rc.quiver.vertex(2).d


@pytest.mark.parametrize("patch, message", [
    ({"algorithm": "eout* . a1 ."}, "algorithm"),
    ({"algorithm": "ein"}, "algorithm"),
    ({"signature": "spherical"}, "unknown signature"),
    ({"signature": {"alpha": -1, "alpha_paths": {"7": 1.0}}}, "unknown paths"),
    ({"data": {}}, None),
])
def test_config_errors(patch, message):
    doc = dict(json.loads(json.dumps(BASE)), **patch)
    if message is None:
        with pytest.raises(ConfigError):
            parse_config(doc).dataset()
    else:
        with pytest.raises(ConfigError, match=message):
            parse_config(doc)


def test_missing_files(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "nope.json")]) == 2
    assert main(["eval", "--checkpoint", str(tmp_path / "nope.json"), "--inputs", "x.csv"]) == 2
    assert "not found" in capsys.readouterr().err


def test_signature_documents_roundtrip():
    for doc in ["compact", {"alpha": -1.0, "default": -0.5, "alpha_paths": {"1,3": 0.25}},
                {"alpha": -0.5, "default": -0.5, "alpha_paths": {}, "learnable": True}]:
        sig, learnable = signature_from_doc(doc)
        assert signature_from_doc(signature_to_doc(sig, learnable)) == (sig, learnable)


def test_csv_data_source(tmp_path):
    (tmp_path / "d.csv").write_text("x0,x1,y0,y1\n1,0,0.5,0.1\n0,1,0.2,-0.3\n")
    doc = dict(json.loads(json.dumps(BASE)), data={"csv": "d.csv"}, real=True)
    rc = load_config(_write(tmp_path, doc))
    data = rc.dataset()
    assert data.X.shape == (2, 2) and np.allclose(data.Y[:, 1], [0.2, -0.3])


def test_xor_config_loads():
    rc = load_config("xor")
    data = rc.dataset()
    assert rc.real and data.X.shape == (3, 4)
