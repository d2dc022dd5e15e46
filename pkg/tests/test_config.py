import json

import numpy as np
import pytest

from credregion.config import DEFAULTS, ExperimentConfig, apply_override, parse_override
from credregion.exceptions import ConfigError


def test_defaults_validate_and_hash_is_stable():
    a = ExperimentConfig()
    b = ExperimentConfig.from_doc({})
    assert a == b
    assert a.config_hash == b.config_hash and len(a.config_hash) == 16
    assert a.D == 2 and a.M == 6 and a.N == 500
    assert a["sampler.chains_per_region"] == 8
    assert len(a.grid()) == 200


def test_hash_changes_with_content():
    assert ExperimentConfig().config_hash != ExperimentConfig.from_doc({}, ["system.N=501"]).config_hash


@pytest.mark.parametrize(
    "text,keys,value",
    [
        ("system.N=100", ["system", "N"], 100),
        ("grid.lo=1e-4", ["grid", "lo"], 1e-4),
        ("system.povm=random", ["system", "povm"], "random"),
        ("sampler.burn_in=null", ["sampler", "burn_in"], None),
        ("system.true_state=[0, 0, 0.1]", ["system", "true_state"], [0, 0, 0.1]),
    ],
)
def test_parse_override(text, keys, value):
    assert parse_override(text) == (keys, value)


@pytest.mark.parametrize("text", ["system.N", "=3"])
def test_parse_override_rejects_malformed(text):
    with pytest.raises(ConfigError):
        parse_override(text)


def test_apply_override_unknown_paths():
    with pytest.raises(ConfigError):
        apply_override(DEFAULTS, ["system", "nope"], 1)
    with pytest.raises(ConfigError):
        apply_override(DEFAULTS, ["nope", "N"], 1)
    out = apply_override(DEFAULTS, ["system", "N"], 7)
    assert out["system"]["N"] == 7 and DEFAULTS["system"]["N"] == 500


def test_load_roundtrip(tmp_path):
    cfg = ExperimentConfig.from_doc({"system": {"D": 3, "M": 12, "povm": "random"}})
    path = tmp_path / "c.json"
    cfg.save(path)
    again = ExperimentConfig.load(path)
    assert again == cfg
    assert ExperimentConfig.load(path, ["system.M=10"]).M == 10


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"sytem": {}}))
    with pytest.raises(ConfigError):
        ExperimentConfig.load(unknown)


@pytest.mark.parametrize(
    "override",
    [
        "system.D=1",
        "system.M=5",
        "system.povm=other",
        "system.povm=random",  # with D = 3 (below) six outcomes are too few
        "system.N=0",
        "system.N_per_outcome=0",
        "system.true_state=[0, 0]",
        "system.true_state=\"pure\"",
        "prior.kind=flat",
        "grid.kind=linear",
        "grid.lo=0.9999",
        "grid.n=1",
        "sampler.k_samples=0",
        "sampler.burn_in=-1",
        "sampler.inflation=0.5",
        "sampler.chains_per_region=0",
        "sampler.u_form=other",
        "oracle.n_samples=0",
        "seeds.chain=-1",
    ],
)
def test_validation_errors(override):
    base = ["system.D=3"] if override == "system.povm=random" else []
    with pytest.raises(ConfigError):
        ExperimentConfig.from_doc({}, base + [override])


def test_gaussian_prior_from_config():
    cfg = ExperimentConfig.from_doc(
        {"prior": {"kind": "gaussian", "mean": [0, 0, 0], "covariance": np.eye(3).tolist()}}
    )
    p = cfg.prior()
    assert p.kind == "gaussian"
    with pytest.raises(ConfigError):
        ExperimentConfig.from_doc({"prior": {"kind": "gaussian", "mean": [0, 0], "covariance": [[1]]}})


def test_counts_per_outcome_and_log_grid():
    cfg = ExperimentConfig.from_doc({}, ["system.N_per_outcome=50", "grid.kind=log", "grid.n=5"])
    assert cfg.N == 300
    np.testing.assert_allclose(np.diff(np.log(cfg.grid().values)), np.diff(np.log(cfg.grid().values))[0])


def test_master_seed_derivation():
    a = ExperimentConfig().with_seed(11)
    b = ExperimentConfig().with_seed(11)
    c = ExperimentConfig().with_seed(12)
    assert a.doc["seeds"] == b.doc["seeds"] != c.doc["seeds"]
    assert len(set(a.doc["seeds"].values())) == 4
