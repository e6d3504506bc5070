import numpy as np
import pytest

import astn


@pytest.fixture(scope="module")
def sched():
    return astn.linear_schedule()


def test_schedule_values(sched):
    assert sched.steps == 1000
    ab = sched.alpha_bars
    assert ab.shape == (1001,) and ab[0] == 1.0
    assert abs(ab[150] - 0.78832135088740311186) < 1e-13
    assert abs(sched.log_snr(500) + 1.2308493579052360175) < 1e-12
    t = sched.timestep_for_log_snr(sched.log_snr(321))
    assert abs(t - 321) < 1e-8


def test_grid():
    assert astn.timestep_grid(150, 7) == [150, 125, 100, 75, 51, 26, 1]


def test_oracle_prediction(sched):
    pred = astn.gaussian_oracle(np.full((1, 1), 0.3), 0.04)
    eps = pred.predict(np.full((1, 1), 0.5), 500, sched)
    assert abs(eps[0, 0] - 0.43179979680071819106) < 1e-12


def test_invert_then_sample_round_trip(sched):
    x0 = astn.phantom(size=32, seed=3)
    # a point-mass oracle makes every DDIM step exact
    pred = astn.gaussian_oracle(x0, 0.0)
    steps = astn.timestep_grid(150, 150)
    latent = astn.ddim_invert(x0, pred, sched, steps)
    back = astn.sample("ddim", latent, pred, sched, steps)
    assert astn.rmse(x0, back) < 1e-6


def test_ast_reconstruction_beats_noise(sched):
    x0 = astn.phantom(size=32, seed=1)
    low = astn.simulate_low_dose(x0, 0.25, seed=2)
    noise = np.sqrt(np.mean((low - x0) ** 2))
    pred = astn.conditioned_oracle(np.full_like(x0, x0.mean()), float(x0.var()), float(noise))
    out = astn.reconstruct(low, pred, sched, regime="ast", budget=25, sampler="unipc", seed=5)
    assert out.shape == x0.shape
    assert np.all(np.isfinite(out))
    assert astn.psnr(x0, out) > 20.0
    assert 0.0 < astn.ssim(x0, out) <= 1.0


def test_image_io(tmp_path):
    img = np.arange(12, dtype=np.float64).reshape(3, 4) / 16
    path = tmp_path / "x.astimg"
    astn.write_image(path, img)
    np.testing.assert_array_equal(astn.read_image(path), img)


def test_errors(sched):
    with pytest.raises(ValueError):
        astn.sample("euler", np.zeros((2, 2)), astn.zero_predictor(), sched, [10, 1])
    with pytest.raises(ValueError):
        astn.zero_predictor().predict(np.zeros((2, 2)), 0, sched)
