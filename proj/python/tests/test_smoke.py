import math

import numpy as np
import pytest

import energia


def test_step_closed_form():
    theta, r, status = energia.aepg_step(np.array([1.0, -2.0]), 1.5, np.array([0.5, 0.25]), 0.2)
    r_expected = 1.5 / (1 + 2 * 0.2 * 0.3125)
    assert status == "converged"
    assert r == pytest.approx(r_expected, rel=1e-15)
    assert np.allclose(theta, [1.0 - 2 * 0.2 * r_expected * 0.5, -2.0 - 2 * 0.2 * r_expected * 0.25])


def test_minimize_quadratic_with_metric():
    A = np.diag([1.0, 100.0])
    res = energia.minimize(
        lambda x: 0.5 * x @ A @ x,
        lambda x: A @ x,
        np.array([1.0, 1.0]),
        eta=0.5,
        metric=A,
        optimum_value=0.0,
        tol=1e-10,
        max_iter=5000,
    )
    assert res["status"] == "converged"
    assert np.linalg.norm(res["theta"]) < 1e-4
    tr = res["trace"]
    assert tr.shape[1] == 8
    assert np.all(np.diff(tr[:, 2]) <= 0.0)
    assert res["columns"] == "k,L,r,v_norm,grad_norm,dtheta_norm,eta_eff,t_us"


def test_simplex_and_projection():
    v = energia.simplex_apply(np.array([0.5, 0.5]), np.array([1.0, 0.0]))
    assert np.allclose(v, [0.25, -0.25])
    P = energia.projection_matrix(np.diag([1.0, 4.0]), np.array([[1.0, 1.0]]))
    assert np.allclose(P @ P, P)
    assert np.allclose(np.array([[1.0, 1.0]]) @ P, 0.0)


def test_run_config_and_errors():
    res = energia.run({"problem": "quad", "alpha": 10, "eta": 1.58, "tol": 1e-6, "max_iter": 100000})
    assert res["status"] == "converged"
    assert res["gap"] < 1e-6
    with pytest.raises(energia.EnergiaError):
        energia.run({"problem": "quad", "speed": 3})
    with pytest.raises(energia.EnergiaError):
        energia.run({"problem": "quad"}, version=7)


def test_doptimal_gradient():
    U = energia.doptimal_data(3, 8, seed=5)
    assert U.shape == (8, 3)
    th = np.full(8, 1 / 8)
    L, g = energia.doptimal_eval(U, th)
    h = 1e-6
    e = np.zeros(8)
    e[2] = h
    fd = (energia.doptimal_eval(U, th + e)[0] - energia.doptimal_eval(U, th - e)[0]) / (2 * h)
    assert g[2] == pytest.approx(fd, rel=1e-6)
    assert math.isfinite(L)


def test_verify_suite():
    assert "pl_example" in energia.verify_suites()
    checks = energia.verify("projections")
    assert checks and all(c["pass"] for c in checks)
