import numpy as np
import pytest

from tandemnet.networks import ModelParams, build_anet_mini, init_params
from tandemnet.params_io import load_mean_image, load_params, save_mean_image, save_params


def test_round_trip_is_byte_exact(tmp_path):
    params = init_params(build_anet_mini(), 11)
    p1 = tmp_path / "a.tnp"
    p2 = tmp_path / "b.tnp"
    save_params(p1, params)
    loaded = load_params(p1)
    assert loaded.spec_name == params.spec_name
    assert loaded.seed == params.seed
    assert list(loaded.tensors) == list(params.tensors)
    for k in params.tensors:
        assert np.array_equal(loaded.tensors[k], params.tensors[k])
        assert loaded.tensors[k].shape == params.tensors[k].shape
    save_params(p2, loaded)
    assert p1.read_bytes() == p2.read_bytes()


def test_scalar_and_negative_values_survive(tmp_path):
    params = ModelParams("one-fc", -3, {"w": np.array([[1.5, -2.25]]), "b": np.array([0.0])})
    path = tmp_path / "p.tnp"
    save_params(path, params)
    loaded = load_params(path)
    assert loaded.seed == -3
    assert np.array_equal(loaded.tensors["w"], params.tensors["w"])


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.tnp"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ValueError, match="magic"):
        load_params(path)


def test_truncated_file_rejected(tmp_path):
    params = init_params(build_anet_mini(), 0)
    path = tmp_path / "p.tnp"
    save_params(path, params)
    clipped = tmp_path / "clipped.tnp"
    clipped.write_bytes(path.read_bytes()[: path.stat().st_size // 2])
    with pytest.raises(ValueError):
        load_params(clipped)


def test_mean_image_container(tmp_path):
    mean = np.random.default_rng(0).uniform(0, 255, size=(3, 8, 8))
    path = tmp_path / "mean.tnp"
    save_mean_image(path, mean)
    assert np.array_equal(load_mean_image(path), mean)


def test_mean_loader_rejects_model_params(tmp_path):
    path = tmp_path / "p.tnp"
    save_params(path, init_params(build_anet_mini(), 0))
    with pytest.raises(ValueError, match="mean"):
        load_mean_image(path)
