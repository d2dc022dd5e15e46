"""Experiment configuration: one JSON document, dot-path overrides, stable hash."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import numpy as np

from .certify import LambdaGrid
from .exceptions import ConfigError
from .hitrun import Prior

POVM_KINDS = ("pauli6", "random", "sqrt")
GRID_KINDS = ("loglog", "log")
STATE_KINDS = ("maximally-mixed", "pure-random")

DEFAULTS = {
    "system": {
        "D": 2,
        "M": 6,
        "N": 500,
        "N_per_outcome": None,
        "povm": "pauli6",
        "true_state": "maximally-mixed",
    },
    "prior": {"kind": "uniform", "mean": None, "covariance": None},
    "grid": {"kind": "loglog", "lo": 1e-6, "hi": 0.999, "n": 200},
    "sampler": {
        "k_samples": 2000,
        "burn_in": None,
        "inflation": 2.0,
        "chains_per_region": 8,
        "smooth": False,
        "u_form": "cap",
    },
    "oracle": {"n_samples": 1_000_000},
    "seeds": {"simulation": 1, "povm": 2, "chain": 3, "oracle": 4},
    "output": "out",
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config field {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config field {where!r} must be an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def parse_override(text: str) -> tuple[list[str], object]:
    """Split ``a.b.c=value``; the value is read as JSON when possible, else kept as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form dot.path=value")
    path, raw = text.split("=", 1)
    keys = [k for k in path.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {text!r} has an empty path")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return keys, value


def apply_override(doc: dict, keys: list[str], value) -> dict:
    doc = copy.deepcopy(doc)
    node = doc
    for i, k in enumerate(keys[:-1]):
        if not isinstance(node.get(k), dict):
            raise ConfigError(f"unknown config field {'.'.join(keys[: i + 1])!r}")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError(f"unknown config field {'.'.join(keys)!r}")
    node[keys[-1]] = value
    return doc


class ExperimentConfig:
    """Validated experiment settings backed by a plain nested dict."""

    def __init__(self, doc: dict | None = None):
        self.doc = _merge(DEFAULTS, doc or {})
        self.validate()

    # -- construction --

    @classmethod
    def load(cls, path, overrides=()) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_doc(doc, overrides)

    @classmethod
    def from_doc(cls, doc: dict, overrides=()) -> "ExperimentConfig":
        merged = _merge(DEFAULTS, doc)
        for text in overrides:
            merged = apply_override(merged, *parse_override(text))
        return cls(merged)

    def with_overrides(self, overrides) -> "ExperimentConfig":
        return ExperimentConfig.from_doc(self.doc, overrides)

    # -- serialization --

    def to_json(self) -> str:
        return json.dumps(self.doc, sort_keys=True, indent=2)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def __eq__(self, other) -> bool:
        return isinstance(other, ExperimentConfig) and self.doc == other.doc

    def __getitem__(self, dotted: str):
        node = self.doc
        for k in dotted.split("."):
            node = node[k]
        return node

    # -- validation --

    def validate(self) -> None:
        sys_ = self.doc["system"]
        D, M = sys_["D"], sys_["M"]
        if not isinstance(D, int) or D < 2:
            raise ConfigError("system.D must be an integer >= 2")
        if sys_["povm"] not in POVM_KINDS:
            raise ConfigError(f"system.povm must be one of {POVM_KINDS}")
        if sys_["povm"] == "pauli6":
            if D != 2 or M != 6:
                raise ConfigError("system.povm=pauli6 requires D=2 and M=6")
        elif not isinstance(M, int) or M < D * D:
            raise ConfigError(f"system.M must be an integer >= D^2 = {D * D} for an informationally complete POVM")
        if sys_["N_per_outcome"] is None:
            if not isinstance(sys_["N"], int) or sys_["N"] < 1:
                raise ConfigError("system.N must be a positive integer")
        elif not isinstance(sys_["N_per_outcome"], int) or sys_["N_per_outcome"] < 1:
            raise ConfigError("system.N_per_outcome must be a positive integer")
        ts = sys_["true_state"]
        if isinstance(ts, str):
            if ts not in STATE_KINDS:
                raise ConfigError(f"system.true_state must be one of {STATE_KINDS} or a Bloch vector")
        elif not (isinstance(ts, list) and len(ts) == D * D - 1):
            raise ConfigError(f"system.true_state Bloch vector must have length {D * D - 1}")
        pr = self.doc["prior"]
        if pr["kind"] not in ("uniform", "gaussian"):
            raise ConfigError("prior.kind must be 'uniform' or 'gaussian'")
        if pr["kind"] == "gaussian":
            self.prior()
        gr = self.doc["grid"]
        if gr["kind"] not in GRID_KINDS:
            raise ConfigError(f"grid.kind must be one of {GRID_KINDS}")
        if not (0 < gr["lo"] < gr["hi"] < 1):
            raise ConfigError("grid requires 0 < lo < hi < 1")
        if not isinstance(gr["n"], int) or gr["n"] < 2:
            raise ConfigError("grid.n must be an integer >= 2")
        sm = self.doc["sampler"]
        if not isinstance(sm["k_samples"], int) or sm["k_samples"] < 1:
            raise ConfigError("sampler.k_samples must be a positive integer")
        if sm["burn_in"] is not None and (not isinstance(sm["burn_in"], int) or sm["burn_in"] < 0):
            raise ConfigError("sampler.burn_in must be null or a non-negative integer")
        if not isinstance(sm["inflation"], (int, float)) or sm["inflation"] < 1:
            raise ConfigError("sampler.inflation must be >= 1")
        if not isinstance(sm["chains_per_region"], int) or sm["chains_per_region"] < 1:
            raise ConfigError("sampler.chains_per_region must be a positive integer")
        if sm["u_form"] not in ("cap", "ratio"):
            raise ConfigError("sampler.u_form must be 'cap' or 'ratio'")
        if not isinstance(self.doc["oracle"]["n_samples"], int) or self.doc["oracle"]["n_samples"] < 1:
            raise ConfigError("oracle.n_samples must be a positive integer")
        for k, v in self.doc["seeds"].items():
            if not isinstance(v, int) or v < 0:
                raise ConfigError(f"seeds.{k} must be a non-negative integer")

    # -- derived objects --

    @property
    def D(self) -> int:
        return self.doc["system"]["D"]

    @property
    def M(self) -> int:
        return self.doc["system"]["M"]

    @property
    def N(self) -> int:
        sys_ = self.doc["system"]
        if sys_["N_per_outcome"] is not None:
            return sys_["N_per_outcome"] * sys_["M"]
        return sys_["N"]

    def grid(self) -> LambdaGrid:
        gr = self.doc["grid"]
        make = LambdaGrid.loglog_spaced if gr["kind"] == "loglog" else LambdaGrid.log_spaced
        return make(gr["lo"], gr["hi"], gr["n"])

    def prior(self) -> Prior:
        pr = self.doc["prior"]
        if pr["kind"] == "uniform":
            return Prior.uniform()
        d = self.D * self.D - 1
        try:
            mean = np.asarray(pr["mean"], dtype=float).reshape(d)
            cov = np.asarray(pr["covariance"], dtype=float).reshape(d, d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"prior.mean/prior.covariance must have sizes {d} and {d}x{d}") from exc
        return Prior.gaussian(mean, cov)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Derive every stage seed from one master seed."""
        children = np.random.SeedSequence(seed).generate_state(4)
        keys = ("simulation", "povm", "chain", "oracle")
        return self.with_overrides([f"seeds.{k}={int(v)}" for k, v in zip(keys, children)])
