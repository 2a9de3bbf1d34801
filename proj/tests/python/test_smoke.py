import math

import numpy as np
import pytest

import flowam


def test_oracles():
    assert flowam.rf_peak_time(1.0) == 0.5
    assert flowam.rf_peak_time(2.0) == 0.8
    assert flowam.rf_relative_strength(5.0, 2.0, 0.0) == pytest.approx(26 ** -0.5)
    assert flowam.rf_adjoint(0.0, 1.0, 1.0, 0.5) == pytest.approx(math.sqrt(2.0))
    assert flowam.toy_argmax("ve", 5.0, 1.0) == pytest.approx(5 - 1 / math.sqrt(3))
    assert flowam.tilted_gaussian(1.0, 2.0) == pytest.approx((1.0, 0.5))
    with pytest.raises(flowam.DomainError):
        flowam.tilted_gaussian(-2.0, 0.0)


def test_control_map():
    u = flowam.control_from_adjoint(np.array([3.0, 4.0]), p=4.0)
    assert u == pytest.approx([-1.025986, -1.367981], abs=1e-6)
    assert flowam.check_pmp_optimality(np.array([3.0, 4.0]), u, p=4.0) < 1e-10
    with pytest.raises(flowam.ConfigError):
        flowam.control_from_adjoint(np.array([1.0]), p=1.0)


def test_metrics():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(300, 2))
    assert flowam.knn_coverage_recall(a, a) == (1.0, 1.0)
    assert flowam.energy_distance(a, a) == pytest.approx(0.0, abs=1e-12)
    assert flowam.wasserstein1_1d([0.0, 1.0], [1.0, 2.0]) == pytest.approx(1.0)
    assert flowam.diversity_mpd(np.array([[0.0], [2.0]])) == 2.0


def test_config_validation():
    text = flowam.resolve_config("p = 3\n")
    assert "p = 3" in text
    with pytest.raises(flowam.ValidationError):
        flowam.resolve_config("n_truncate = 100\nn_steps = 50\n")


def test_cli_pretrain_and_sample(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f'data = gauss1d\nhidden = [8]\npretrain_iterations = 10\noutdir = "{tmp_path / "out"}"\n')
    code, out, err = flowam.run_cli(["--threads", "1", "pretrain", "--config", str(cfg)])
    assert code == 0, err
    model = flowam.load_checkpoint(str(tmp_path / "out" / "ckpt_base.bin"))
    assert model.state_dim == 1
    xs = model.sample(64, seed=3, n_steps=10)
    assert xs.shape == (64, 1)
    assert np.array_equal(xs, model.sample(64, seed=3, n_steps=10))
    assert np.isfinite(model.sample(16, seed=1, n_steps=10, noise="memoryless")).all()
    code, _, _ = flowam.run_cli(["--no-such-flag"])
    assert code == 1
