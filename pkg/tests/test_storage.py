import numpy as np
import pytest

from credregion.exceptions import ConfigError, ShapeError
from credregion.storage import DataBundle, format_csv, load_bundle, read_csv, save_bundle, write_csv, write_json
from credregion.tomography import CountData, make_random_povm


def test_bundle_roundtrip_is_bit_exact(tmp_path):
    povm = make_random_povm(3, 10, seed=1)
    b = DataBundle(povm, CountData(np.arange(10)), np.linspace(0, 0.1, 8), "abc", {"povm": 1})
    save_bundle(tmp_path, b)
    back = load_bundle(tmp_path)
    np.testing.assert_array_equal(back.povm.q, povm.q)
    np.testing.assert_array_equal(back.povm.t, povm.t)
    np.testing.assert_array_equal(back.counts.n, np.arange(10))
    assert back.config_hash == "abc" and back.seeds == {"povm": 1}
    assert (tmp_path / "povm_q.f64").stat().st_size == 10 * 8 * 8


def test_bundle_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_bundle(tmp_path)
    povm = make_random_povm(2, 4, seed=1)
    save_bundle(tmp_path, DataBundle(povm, CountData(np.ones(4, int)), np.zeros(3), "h", {}))
    (tmp_path / "povm_q.f64").write_bytes(b"\0" * 16)
    with pytest.raises(ShapeError):
        load_bundle(tmp_path / "bundle.json")


def test_csv_format_exact():
    text = format_csv({"lambda": np.array([0.1, 0.5]), "n": np.array([3, 4]), "case": "A"}, {"config_hash": "x"})
    assert text == "# config_hash=x\nlambda,n,case\n0.1,3,A\n0.5,4,A\n"


def test_csv_roundtrip_preserves_floats(tmp_path):
    vals = np.random.default_rng(0).random(20)
    path = write_csv(tmp_path / "sub" / "t.csv", {"a": vals, "b": vals * 2}, {"k": 1})
    back = read_csv(path, required=("a", "b"))
    np.testing.assert_array_equal(back["a"], vals)
    assert path.read_text().startswith("# k=1\n")


def test_csv_errors(tmp_path):
    with pytest.raises(ShapeError):
        format_csv({"a": np.zeros(2), "b": np.zeros(3)})
    path = write_csv(tmp_path / "t.csv", {"a": np.zeros(2)})
    with pytest.raises(ShapeError):
        read_csv(path, required=("b",))
    empty = tmp_path / "e.csv"
    empty.write_text("# only=comments\n")
    with pytest.raises(ShapeError):
        read_csv(empty)
    with pytest.raises(ConfigError):
        read_csv(tmp_path / "missing.csv")


def test_write_json_handles_numpy(tmp_path):
    from credregion.tomography import Case

    path = write_json(tmp_path / "s.json", {"x": np.arange(3), "y": np.float64(1.5), "c": Case.B})
    assert '"c": "B"' in path.read_text()
    with pytest.raises(TypeError):
        write_json(tmp_path / "bad.json", {"x": object()})
