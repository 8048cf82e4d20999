import math
import os
from pathlib import Path

import numpy as np
import pytest

import bobsled

DATA = Path(os.environ.get("BOBSLED_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def test_longitudinal_coefficient():
    assert bobsled.mu_x(7.7) == pytest.approx(1e-3 * (0.088 * 7.7**2 - 2.01 * 7.7 + 14.66), rel=1e-14)
    assert bobsled.mu_x(30.0) == 0.007
    with pytest.raises(ValueError):
        bobsled.mu_x(0.0)


def test_lateral_law_vectorized_and_odd():
    p = bobsled.LateralFrictionParams.front_reference()
    alpha = np.linspace(-0.05, 0.05, 101)
    fy = bobsled.force_y(5000.0, alpha, p)
    assert fy.shape == alpha.shape
    np.testing.assert_allclose(fy, -fy[::-1], rtol=0, atol=1e-9)
    h = 1e-7
    slope = (bobsled.force_y(5000.0, h, p) - bobsled.force_y(5000.0, -h, p)) / (2 * h)
    assert slope == pytest.approx(p.K_y, rel=1e-4)
    assert bobsled.force_y_braghin(1000.0, 0.02) == pytest.approx(250.0)


def test_drag_and_rotation():
    assert bobsled.drag_force(10.0, 0.5) == pytest.approx(29.97, rel=1e-3)
    ratio = bobsled.drag_area_at_beta(0.3, math.radians(1.0)) / bobsled.drag_area_at_beta(0.3, 0.0)
    assert ratio == pytest.approx(1.0694, abs=1e-12)
    A = bobsled.rotation_f0_to_f(0.2, -0.1)
    np.testing.assert_allclose(A.T @ A, np.eye(3), atol=1e-12)


def test_fit_lateral_round_trip():
    rng = np.random.default_rng(3)
    p = bobsled.LateralFrictionParams.front_reference()
    alpha = rng.uniform(-math.radians(3), math.radians(3), 1500)
    fz = rng.uniform(1000.0, 15000.0, 1500)
    fy = np.array([bobsled.force_y(z, a, p) for a, z in zip(alpha, fz)])
    r = bobsled.fit_lateral(alpha, fz, fy)
    assert r["converged"]
    assert r["params"].K_y == pytest.approx(p.K_y, rel=1e-2)
    assert r["params"].mu_zeta_y == pytest.approx(p.mu_zeta_y, rel=1e-2)


def test_quadratic_fit_and_glide():
    p = [6.0, 10.0, 15.0]
    mu = [1e-3 * (0.1 * x * x - 2.3 * x + 15.0) for x in p]
    q = bobsled.fit_quadratic_mu_p(p, mu)
    assert q.B_x == pytest.approx(0.1, rel=1e-10)
    up = bobsled.estimate_glide_friction(str(DATA / "glide" / "alpha1_up.csv"))
    down = bobsled.estimate_glide_friction(str(DATA / "glide" / "alpha1_down.csv"))
    assert (up + down) / 2 == pytest.approx(4.5e-3, abs=1e-4)


def test_simulate_energy_audit():
    out = bobsled.simulate(str(DATA / "scenarios" / "step_steer.kv"))
    assert out["v"].size == out["t"].size > 100
    assert abs(out["energy_residual"]) < 5e-4 * out["energy_dissipated"]


def test_cli_exit_codes(tmp_path):
    code, _, err = bobsled.run_cli(["--out-dir", str(tmp_path), "friction-table"])
    assert code == 0, err
    assert (tmp_path / "mu_x_curve.csv").exists()
    code, _, _ = bobsled.run_cli(["fit"])
    assert code == 1
