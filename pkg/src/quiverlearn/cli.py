"""Command line interface: ``quiverlearn {check,train,eval,dim,map}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import checks
from .errors import ConfigError, QuiverLearnError
from .metric import as_signature, in_domain, metric_state
from .nearring import parse_algorithm
from .persist import (fmt, load_checkpoint, load_config, matrix_to_pairs, read_csv_matrix,
                      save_checkpoint, signature_from_doc)
from .quiver import frame_multiplicity, local_dimension, moduli_dimension
from .trainer import predict, train
from .uniformize import grassmann_inverse, grassmann_map, metric_from_coords


def _overrides(args):
    sig = args.signature
    if sig is not None:
        try:
            sig = float(sig)
        except ValueError:
            pass
    return {"seed": args.seed, "signature": sig, "real": True if args.real else None}


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _metric_dump(p, sig):
    try:
        st = metric_state(p, sig)
    except QuiverLearnError as exc:
        return {"error": str(exc)}
    rep = in_domain(p, sig)
    return {str(i): {"H": matrix_to_pairs(st.H[i]), "min_eig_form": rep.min_eig[i]}
            for i in p.quiver.vertex_ids}


def _write_report(path, cfg, results=(), history=None, metrics=None):
    doc = {
        "config": cfg.source,
        "checks": [r.to_dict() for r in results],
        "history": history,
        "metrics": metrics or {},
    }
    Path(path).write_text(json.dumps(doc, indent=1, default=float))


def cmd_check(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    seed = int(cfg.train.get("seed", 0))
    data = cfg.dataset() if cfg.data else None
    results = checks.run_all(cfg.quiver, cfg.algorithm, cfg.signature, seed, cfg.real,
                             args.tolerance_scale, data)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: deviation {r.deviation:.3e} (tolerance {r.tolerance:.1e}) {r.note}".rstrip())
    out = _out_dir(args)
    _write_report(out / "report.json", cfg, results)
    return 0 if all(r.passed for r in results) else 1


def cmd_train(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    data = cfg.dataset()
    tc = cfg.train_config(data)
    hist = train(tc)
    out = _out_dir(args)
    hist.to_csv(out / "history.csv")
    save_checkpoint(out / "checkpoint.json", hist.point, cfg.algorithm, cfg.signature, hist.s)
    sig = as_signature(tc.signature if hist.s is None else hist.s)
    _write_report(out / "report.json", cfg, history=str(out / "history.csv"),
                  metrics=_metric_dump(hist.point, sig))
    print(f"steps {len(hist.rows) - 1}  initial cost {fmt(hist.costs[0])}  final cost {fmt(hist.costs[-1])}")
    return 0


def _checkpoint_signature(doc):
    if "s" in doc:
        return signature_from_doc(float(doc["s"]))[0], float(doc["s"])
    return signature_from_doc(doc.get("signature", "hyperbolic"))[0], None


def cmd_eval(args) -> int:
    from .machine import Dataset
    from .trainer import TrainConfig

    p, doc = load_checkpoint(args.checkpoint)
    if "algorithm" not in doc:
        raise ConfigError("checkpoint has no algorithm")
    if args.inputs is None:
        raise ConfigError("eval needs --inputs")
    if not Path(args.inputs).exists():
        raise ConfigError(f"inputs file not found: {args.inputs}")
    X = read_csv_matrix(args.inputs, "x")
    if p.real:
        X = np.real(X).astype(float)
    sig, s = _checkpoint_signature(doc)
    tree = parse_algorithm(doc["algorithm"], p.quiver)
    dummy = Dataset(X, np.zeros((p.quiver.vertex(tree.output_vertex).n, X.shape[1])))
    tc = TrainConfig(p.quiver, doc["algorithm"], dummy, sig, real=p.real, learnable=s is not None)
    Y = np.atleast_2d(predict(tc, p, X, s))
    out = Path(args.out or "predictions.csv")
    if out.is_dir():
        out = out / "predictions.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        if p.real:
            w.writerow([f"y{k}" for k in range(Y.shape[0])])
            for col in Y.T:
                w.writerow([fmt(v) for v in col])
        else:
            w.writerow([f"y{k}_{part}" for k in range(Y.shape[0]) for part in ("re", "im")])
            for col in Y.T:
                w.writerow([fmt(x) for v in col for x in (v.real, v.imag)])
    print(f"wrote {Y.shape[1]} predictions to {out}")
    return 0


def cmd_dim(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    q = cfg.quiver
    m = local_dimension(q)
    N = frame_multiplicity(q)
    print(f"moduli dimension {moduli_dimension(q)}")
    for v in q.vertices:
        print(f"vertex {v.id}: n={v.n} d={v.d} m={m[v.id]} N={N[v.id]}")
    return 0


def cmd_map(args) -> int:
    p, _ = load_checkpoint(args.checkpoint)
    c = grassmann_map(p)
    back = grassmann_inverse(c, p.quiver, real=p.real)
    residual = back.max_deviation(p)
    H = metric_state(p, "hyperbolic").H
    Hc = metric_from_coords(c)
    metric_dev = max(float(np.max(np.abs(H[i] - Hc[i]))) for i in H)
    doc = {"W": {str(i): matrix_to_pairs(W) for i, W in c.W.items()},
           "positivity": {str(i): v for i, v in c.positivity().items()},
           "roundtrip_residual": residual, "metric_residual": metric_dev}
    out = Path(args.out or "grassmann.json")
    if out.is_dir() or not out.suffix:
        out.mkdir(parents=True, exist_ok=True)
        out = out / "grassmann.json"
    out.write_text(json.dumps(doc, indent=1))
    print(f"round-trip residual {residual:.3e}  metric residual {metric_dev:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quiverlearn",
                                     description="Learning on moduli of framed quiver representations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True,
                           help="JSON config path, or the name of a bundled config such as 'diamond'")
        p.add_argument("--out", help="output directory or file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--signature", help="override: compact, euclidean, hyperbolic or a number")
        p.add_argument("--real", action="store_true", help="real-scalar mode")
        p.add_argument("--tolerance-scale", type=float, default=1.0,
                       help="multiply every check tolerance")

    common(sub.add_parser("check", help="run the invariant suites"))
    common(sub.add_parser("train", help="train and write history, checkpoint and report"))
    common(sub.add_parser("dim", help="print the moduli dimension and per-vertex counts"))
    p = sub.add_parser("eval", help="evaluate a checkpoint on input rows")
    common(p, config=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--inputs", required=True, help="CSV with x-prefixed columns")
    p = sub.add_parser("map", help="write Grassmannian coordinates of a checkpoint")
    common(p, config=False)
    p.add_argument("--checkpoint", required=True)
    return parser


COMMANDS = {"check": cmd_check, "train": cmd_train, "eval": cmd_eval, "dim": cmd_dim, "map": cmd_map}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except QuiverLearnError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
