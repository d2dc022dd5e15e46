"""On-disk artifacts: data bundles, result tables and summaries.

Every file records the config hash and the seeds that produced it.  Tables
are written with a fixed column order and ``repr``-exact floats so that
reruns with the same configuration give byte-identical files.
"""

from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, ShapeError
from .tomography import CountData, PovmModel

Q_FILE = "povm_q.f64"
BUNDLE_FILE = "bundle.json"


@dataclass
class DataBundle:
    povm: PovmModel
    counts: CountData
    true_state: np.ndarray
    config_hash: str
    seeds: dict


def save_bundle(out_dir, bundle: DataBundle) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    q = np.ascontiguousarray(bundle.povm.q, dtype="<f8")
    (out / Q_FILE).write_bytes(q.tobytes())
    doc = {
        "config_hash": bundle.config_hash,
        "seeds": bundle.seeds,
        "D": bundle.povm.dim_hilbert,
        "M": bundle.povm.M,
        "t": [float(x) for x in bundle.povm.t],
        "q_path": Q_FILE,
        "q_shape": list(q.shape),
        "q_dtype": "float64-le",
        "counts": [int(x) for x in bundle.counts.n],
        "true_state": [float(x) for x in bundle.true_state],
        "numpy_version": np.__version__,
    }
    path = out / BUNDLE_FILE
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def load_bundle(path) -> DataBundle:
    path = Path(path)
    if path.is_dir():
        path = path / BUNDLE_FILE
    try:
        doc = json.loads(path.read_text())
        raw = (path.parent / doc["q_path"]).read_bytes()
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read data bundle {path}: {exc}") from exc
    shape = tuple(doc["q_shape"])
    q = np.frombuffer(raw, dtype="<f8")
    if q.size != int(np.prod(shape)):
        raise ShapeError(f"q-matrix file holds {q.size} values, expected shape {shape}")
    povm = PovmModel(int(doc["D"]), np.asarray(doc["t"], dtype=float), q.reshape(shape).astype(float))
    return DataBundle(
        povm=povm,
        counts=CountData(np.asarray(doc["counts"], dtype=np.int64)),
        true_state=np.asarray(doc["true_state"], dtype=float),
        config_hash=doc["config_hash"],
        seeds=doc["seeds"],
    )


def _fmt(v) -> str:
    if isinstance(v, (str, bytes)):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def format_csv(table: dict, meta: dict | None = None) -> str:
    """CSV text: optional ``# key=value`` provenance lines, a header row, then data rows."""
    cols = list(table)
    n = {len(np.atleast_1d(table[c])) for c in cols if not isinstance(table[c], str)}
    if len(n) > 1:
        raise ShapeError("all table columns must have the same length")
    rows = max(n) if n else 0
    buf = _io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for i in range(rows):
        w.writerow([table[c] if isinstance(table[c], str) else _fmt(np.atleast_1d(table[c])[i]) for c in cols])
    return buf.getvalue()


def write_csv(path, table: dict, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(table, meta), encoding="utf-8")
    return path


def read_csv(path, required=()) -> dict:
    """Read a table written by :func:`write_csv` into column arrays (floats where possible)."""
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise ShapeError(f"{path} has no header row")
    reader = csv.reader(lines)
    header = next(reader)
    for col in required:
        if col not in header:
            raise ShapeError(f"{path} is missing column {col!r}")
    data = list(reader)
    out = {}
    for j, name in enumerate(header):
        vals = [row[j] for row in data]
        try:
            out[name] = np.array([float(v) for v in vals])
        except ValueError:
            out[name] = np.array(vals)
    return out


def write_json(path, doc: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")
