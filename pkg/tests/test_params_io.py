import numpy as np
import pytest

from adaptive_traces.learner import ActorCritic, LearnerConfig
from adaptive_traces.params_io import MAGIC, load_params, save_params


def model():
    return ActorCritic(3, 2, LearnerConfig(hidden_width=5, hidden_layers=2))


def test_round_trip(tmp_path):
    m = model()
    theta = m.init_params(4)
    save_params(tmp_path / "p.bin", [m.actor, m.critic], theta)
    specs, loaded = load_params(tmp_path / "p.bin")
    assert specs == [m.actor, m.critic]
    assert np.array_equal(loaded, theta)


def test_layout_is_little_endian(tmp_path):
    m = model()
    theta = np.arange(m.n_params, dtype=np.float64)
    save_params(tmp_path / "p.bin", [m.actor, m.critic], theta)
    raw = (tmp_path / "p.bin").read_bytes()
    assert raw.startswith(MAGIC)
    assert raw[len(MAGIC) : len(MAGIC) + 4] == (1).to_bytes(4, "little")
    assert raw[-8 * m.n_params :] == theta.astype("<f8").tobytes()


def test_rejects_corrupt_files(tmp_path):
    m = model()
    path = tmp_path / "p.bin"
    save_params(path, [m.actor, m.critic], m.init_params(0))
    raw = path.read_bytes()
    path.write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(ValueError, match="magic"):
        load_params(path)
    path.write_bytes(raw[:-3])
    with pytest.raises(ValueError):
        load_params(path)
    with pytest.raises(ValueError):
        save_params(path, [m.actor], m.init_params(0))
