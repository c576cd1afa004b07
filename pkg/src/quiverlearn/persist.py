"""JSON configs, JSON checkpoints and CSV data files."""

from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, CycleError
from .machine import Dataset
from .metric import MetricSignature, as_signature
from .nearring import parse_algorithm
from .quiver import ArrowSpec, Quiver, VertexSpec, topological_order
from .representation import FramedRep

CHECKPOINT_FORMAT = "quiverlearn-checkpoint"


# Quivers and signatures.

def quiver_to_dict(q: Quiver) -> dict:
    return {"vertices": [{"id": v.id, "n": v.n, "d": v.d, "role": v.role} for v in q.vertices],
            "arrows": [{"id": a.id, "src": a.src, "dst": a.dst} for a in q.arrows]}


def quiver_from_dict(doc: dict) -> Quiver:
    try:
        vs = [VertexSpec(int(v["id"]), int(v["n"]), int(v["d"]), v.get("role", "plain"))
              for v in doc["vertices"]]
        arr = [ArrowSpec(int(a["id"]), int(a["src"]), int(a["dst"])) for a in doc.get("arrows", [])]
        return Quiver(tuple(vs), tuple(arr))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid quiver: {exc}") from None


def signature_from_doc(doc):
    """``(signature, learnable)`` from a preset name or an ``{alpha, ...}`` object."""
    if isinstance(doc, (str, int, float)):
        try:
            return as_signature(doc), False
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if not isinstance(doc, dict):
        raise ConfigError("signature must be a preset name or an object")
    try:
        alpha = float(doc["alpha"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError("signature object needs a numeric 'alpha'") from None
    paths = doc.get("alpha_paths", {})
    coeffs = {}
    if isinstance(paths, dict):
        for key, val in paths.items():
            coeffs[tuple(int(k) for k in str(key).replace(" ", "").split(",") if k)] = float(val)
    else:
        for item in paths:
            coeffs[tuple(int(k) for k in item["path"])] = float(item["alpha"])
    default = doc.get("default")
    sig = MetricSignature(alpha, None if default is None else float(default), coeffs)
    return sig, bool(doc.get("learnable", False))


def signature_to_doc(sig: MetricSignature, learnable=False):
    if sig.preset and not learnable:
        return sig.preset
    doc = {"alpha": sig.bias_coeff, "default": sig.default,
           "alpha_paths": {",".join(str(k) for k in key): v for key, v in sig.path_coeffs.items()}}
    if learnable:
        doc["learnable"] = True
    return doc


# Numbers.

def _number(v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", "")) if "j" in v else float(v)
    return float(v)


def matrix_to_pairs(m) -> list:
    """Nested rows of ``[re, im]`` pairs."""
    m = np.asarray(m)
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.atleast_2d(m)]


def matrix_from_pairs(rows, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)
    for r, row in enumerate(rows):
        for c, pair in enumerate(row):
            out[r, c] = complex(pair[0], pair[1])
    return out


# Run configuration.

@dataclass
class RunConfig:
    """Parsed JSON config driving every subcommand."""

    quiver: Quiver
    algorithm: str
    signature: MetricSignature
    learnable: bool = False
    train: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    real: bool = False
    source: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def train_config(self, data: Dataset, init=None):
        from .trainer import TrainConfig

        t = self.train
        return TrainConfig(
            quiver=self.quiver, algorithm=self.algorithm, data=data,
            signature=self.signature, lr=float(t.get("lr", 0.1)), steps=int(t.get("steps", 100)),
            backtrack=float(t.get("backtrack", 0.5)), max_halvings=int(t.get("max_halvings", 30)),
            seed=int(t.get("seed", 0)), refresh=int(t.get("refresh", 10)), real=self.real,
            batch=t.get("batch"), learnable=self.learnable,
            init_scale=float(t.get("init_scale", 0.5)), init=init)

    def dataset(self) -> Dataset:
        return load_dataset(self)


def bundled_config_path(name: str) -> Path | None:
    ref = resources.files("quiverlearn") / "configs" / f"{name}.json"
    return Path(str(ref)) if ref.is_file() else None


def _read_json(path) -> tuple[dict, Path]:
    p = Path(path)
    if not p.exists():
        bundled = bundled_config_path(str(path))
        if bundled is None:
            raise ConfigError(f"config file not found: {path}")
        p = bundled
    try:
        return json.loads(p.read_text()), p.parent
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None


def parse_config(doc: dict, base_dir=".", seed=None, signature=None, real=None) -> RunConfig:
    """Validate a config document; overrides mirror the CLI flags.

    Raises
    ------
    ConfigError
        For malformed documents, cyclic quivers, ill-typed algorithms, and
        ``n_i < d_i`` under a Euclidean or hyperbolic preset.
    """
    doc = copy.deepcopy(doc)
    if "quiver" not in doc or "algorithm" not in doc:
        raise ConfigError("config needs 'quiver' and 'algorithm'")
    q = quiver_from_dict(doc["quiver"])
    try:
        topological_order(q)
    except CycleError as exc:
        raise ConfigError(f"{exc}; metrics and moduli need an acyclic quiver") from None
    sig, learnable = signature_from_doc(signature if signature is not None
                                        else doc.get("signature", "hyperbolic"))
    try:
        sig.validate(q)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if sig.preset in ("euclidean", "hyperbolic") or learnable or sig.sign <= 0:
        short = [v.id for v in q.vertices if v.n < v.d]
        if short:
            raise ConfigError(
                f"vertices {short} have n < d; the {sig} signature assumes n_i >= d_i "
                f"so that each framing has an invertible basis part")
    algorithm = doc["algorithm"]
    try:
        parse_algorithm(algorithm, q)
    except Exception as exc:
        raise ConfigError(f"algorithm: {exc}") from None
    train = dict(doc.get("train", {}))
    if seed is not None:
        train["seed"] = int(seed)
    is_real = bool(doc.get("real", False)) if real is None else bool(real)
    doc["signature"] = signature_to_doc(sig, learnable)
    doc["real"] = is_real
    doc["train"] = train
    return RunConfig(q, algorithm, sig, learnable, train, dict(doc.get("data", {})), is_real,
                     doc, Path(base_dir))


def load_config(path, **overrides) -> RunConfig:
    doc, base = _read_json(path)
    return parse_config(doc, base, **overrides)


# Data.

def read_csv_matrix(path, prefix):
    """Columns whose header starts with ``prefix``, samples as columns."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    cols = [k for k, h in enumerate(header) if h.startswith(prefix)]
    if not cols:
        raise ConfigError(f"{path}: no columns starting with {prefix!r}")
    vals = [[_number(r[k]) for k in cols] for r in rows[1:] if r]
    return np.array(vals).T


def load_dataset(cfg: RunConfig) -> Dataset:
    from .trainer import teacher_dataset

    spec = cfg.data
    tree = parse_algorithm(cfg.algorithm, cfg.quiver)
    if "samples" in spec:
        pairs = [([_number(v) for v in s["x"]], [_number(v) for v in s["y"]]) for s in spec["samples"]]
        data = Dataset.from_pairs(pairs)
    elif "csv" in spec:
        path = Path(spec["csv"])
        if not path.is_absolute():
            path = cfg.base_dir / path
        if not path.exists():
            raise ConfigError(f"data file not found: {path}")
        data = Dataset(read_csv_matrix(path, "x"), read_csv_matrix(path, "y"))
    elif "teacher" in spec:
        t = spec["teacher"] or {}
        sig = cfg.signature if cfg.signature.scalar is not None else as_signature("compact")
        data, _ = teacher_dataset(cfg.quiver, cfg.algorithm, sig, int(t.get("samples", 32)),
                                  int(t.get("seed", 0)), cfg.real, float(t.get("scale", 0.5)))
    else:
        raise ConfigError("data needs 'samples', 'csv' or 'teacher'")
    if cfg.real:
        if np.iscomplexobj(data.X) and np.any(data.X.imag != 0) or \
                np.iscomplexobj(data.Y) and np.any(data.Y.imag != 0):
            raise ConfigError("real mode needs real data")
        data = Dataset(np.real(data.X).astype(float), np.real(data.Y).astype(float))
    try:
        data.check(tree)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return data


# Checkpoints.

def save_checkpoint(path, p: FramedRep, algorithm=None, signature=None, s=None, extra=None):
    """Write a point as JSON with matrices stored as ``[re, im]`` pairs."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "quiver": quiver_to_dict(p.quiver),
        "real": p.real,
        "w": {str(k): matrix_to_pairs(m) for k, m in p.w.items()},
        "e": {str(k): matrix_to_pairs(m) for k, m in p.e.items()},
    }
    if algorithm is not None:
        doc["algorithm"] = algorithm
    if signature is not None:
        doc["signature"] = signature_to_doc(as_signature(signature), s is not None)
    if s is not None:
        doc["s"] = s
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1))


def checkpoint_from_doc(doc) -> FramedRep:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError("not a checkpoint file")
    q = quiver_from_dict(doc["quiver"])
    d = q.d
    w = {a.id: matrix_from_pairs(doc["w"][str(a.id)], (d[a.dst], d[a.src])) for a in q.arrows}
    e = {v.id: matrix_from_pairs(doc["e"][str(v.id)], (v.d, v.n)) for v in q.vertices}
    return FramedRep(q, w, e, bool(doc.get("real", False)))


def load_checkpoint(path):
    """``(point, document)`` from a checkpoint file."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"checkpoint not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return checkpoint_from_doc(doc), doc


def fmt(x) -> str:
    """17 significant digits, the width that round-trips a double."""
    return f"{x:.17g}"
