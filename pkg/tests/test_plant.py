import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import base_dict
from degmpc.config import config_from_dict, load_config
from degmpc.plant import (
    ModelValidityWarning,
    derivative,
    electric_field,
    extended_state,
    rk4_foh_step,
    simulate,
    storage,
    storage_series,
)

P = load_config().plant


def rhs_reference(xi, u, d, p):
    """Independent evaluation of the flap, radiation and cost-rate equations."""
    n = p.n
    th, dl, z = xi[0], xi[1], xi[2 : 2 + n]
    out = np.zeros(n + 4)
    out[0] = dl
    out[1] = (-p.K_h * th - p.B_h * dl - (p.C_r @ z)[0] + d - p.C_0 * th * u) / p.I_h
    out[2 : 2 + n] = p.A_r @ z + p.B_r[:, 0] * dl
    out[2 + n] = p.B_h * dl**2 + z @ p.S_r @ z + u / p.R_0 - d * dl
    out[3 + n] = p.alpha * max(u - p.u_th, 0.0)
    return out


def linear_matrix(p):
    """State matrix of (theta, delta, z) with the input frozen at zero."""
    n = p.n
    M = np.zeros((n + 2, n + 2))
    M[0, 1] = 1.0
    M[1, 0] = -p.K_h / p.I_h
    M[1, 1] = -p.B_h / p.I_h
    M[1, 2:] = -p.C_r[0] / p.I_h
    M[2:, 1] = p.B_r[:, 0]
    M[2:, 2:] = p.A_r
    return M


def random_state(rng, p, scale=0.1):
    return extended_state(rng.normal(0, scale), rng.normal(0, scale), rng.normal(0, scale, p.n), p=p)


def test_equilibrium():
    np.testing.assert_array_equal(derivative(extended_state(p=P), 0.0, 0.0, P), 0.0)


def test_unit_excitation():
    f = derivative(extended_state(p=P), 0.0, 1.0, P)
    expect = np.zeros(P.state_dim)
    expect[1] = 1.0 / P.I_h
    np.testing.assert_allclose(f, expect, rtol=1e-15, atol=0)


def test_two_active_terms():
    f = derivative(extended_state(theta=0.1, p=P), P.u_max, 0.0, P)
    assert f[1] == pytest.approx((-0.1 * P.K_h - 0.1 * P.C_0 * P.u_max) / P.I_h, rel=1e-14)


def test_derivative_matches_reference(rng):
    for _ in range(50):
        xi = random_state(rng, P)
        u = rng.uniform(0, P.u_max)
        d = rng.normal(0, 3e4)
        np.testing.assert_allclose(derivative(xi, u, d, P), rhs_reference(xi, u, d, P), rtol=1e-12, atol=1e-12)


def test_smooth_damage_rate_upper_bounds_exact(rng):
    kappa = 1.0 / (0.01 * P.u_max)
    for u in rng.uniform(0, P.u_max, 50):
        exact = derivative(extended_state(p=P), u, 0.0, P)[-1]
        smooth = derivative(extended_state(p=P), u, 0.0, P, smooth=True, kappa=kappa)[-1]
        assert exact <= smooth <= exact + P.alpha * np.log(2) / kappa * (1 + 1e-12)


def test_rest_is_fixed_point():
    xi = extended_state(p=P)
    np.testing.assert_array_equal(rk4_foh_step(xi, 0, 0, 0, 0, 0.1, P), xi)


def decoupled_config():
    # one radiation state with zero input coupling: z' = -z
    d = base_dict()
    d["radiation"] = {"A_r": [[-1.0]], "B_r": [[0.0]], "C_r": [[0.0]], "Q_r": [[1.0]], "S_r": [[1.0]]}
    return config_from_dict(d).plant


def test_scalar_decay_step():
    p = decoupled_config()
    xi = extended_state(z=[1.0], p=p)
    z1 = rk4_foh_step(xi, 0, 0, 0, 0, 0.1, p)[2]
    h = 0.1
    assert z1 == pytest.approx(1 - h + h**2 / 2 - h**3 / 6 + h**4 / 24, rel=1e-15)
    assert z1 == pytest.approx(0.9048375, abs=1e-7)
    assert abs(z1 - np.exp(-0.1)) == pytest.approx(8.2e-8, rel=0.02)


def endpoint_error(h, T=10.0, seed=0):
    rng = np.random.default_rng(seed)
    xi0 = random_state(rng, P)
    n = int(round(T / h)) + 1
    traj = simulate(xi0, np.zeros(n), np.zeros(n), h, P, check_validity=False)
    exact = scipy.linalg.expm(linear_matrix(P) * T) @ xi0[: P.n + 2]
    return np.linalg.norm(traj[-1, : P.n + 2] - exact)


def test_rk4_order_linear_subsystem():
    hs = np.array([0.2, 0.1, 0.05, 0.025])
    errs = np.array([endpoint_error(h) for h in hs])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 3.8 <= slope <= 4.2
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.1)


def test_storage_values():
    assert storage(extended_state(p=P), 0.0, P) == 0.0
    assert storage(extended_state(p=P), P.u_max, P) == pytest.approx(0.5 * P.C_0 * P.u_max, rel=1e-15)


@pytest.mark.parametrize("theta", [-0.2, 0.05, 0.1])
def test_electrostatic_torque_is_storage_gradient(theta):
    u = 0.7 * P.u_max
    h = 1e-6
    x = lambda th: extended_state(theta=th, p=P)
    # electrostatic part of the storage gradient; the hydrostatic part is removed analytically
    g = (storage(x(theta + h), u, P) - storage(x(theta - h), u, P)) / (2 * h) - P.K_h * theta
    assert g == pytest.approx(-P.C_0 * theta * u, rel=1e-6)


def test_storage_series_matches_pointwise(rng):
    traj = np.array([random_state(rng, P) for _ in range(5)])
    u = rng.uniform(0, P.u_max, 5)
    np.testing.assert_allclose(storage_series(traj, u, P), [storage(traj[k], u[k], P) for k in range(5)], rtol=1e-13)


def test_simulate_edge_cases():
    xi = extended_state(theta=0.01, p=P)
    np.testing.assert_array_equal(simulate(xi, [0.0], [0.0], 0.1, P), xi[None, :])
    np.testing.assert_array_equal(simulate(extended_state(p=P), np.zeros(30), np.zeros(30), 0.1, P), 0.0)
    with pytest.raises(ValueError, match="lengths"):
        simulate(xi, np.zeros(3), np.zeros(4), 0.1, P)
    with pytest.raises(ValueError, match="u_max"):
        simulate(xi, np.full(3, 1.01 * P.u_max), np.zeros(3), 0.1, P)
    with pytest.raises(ValueError, match="u_max"):
        simulate(xi, np.array([0.0, -1.0]), np.zeros(2), 0.1, P)


def test_validity_warning():
    xi = extended_state(theta=0.5, p=P)
    with pytest.warns(ModelValidityWarning):
        simulate(xi, np.zeros(3), np.zeros(3), 0.1, P)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        simulate(xi, np.zeros(3), np.zeros(3), 0.1, P, check_validity=False)


def test_electric_field():
    assert electric_field(P.u_max, P) == pytest.approx(P.E_bd)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_energy_bookkeeping_unforced(seed):
    rng = np.random.default_rng(seed)
    xi0 = random_state(rng, P)
    n = 201
    traj = simulate(xi0, np.zeros(n), np.zeros(n), 0.05, P, check_validity=False)
    psi = storage_series(traj, np.zeros(n), P)
    assert abs(psi[-1] - psi[0] + traj[-1, -2]) <= 1e-6 * psi[0]
    # passivity
    assert np.all(np.diff(psi) <= 1e-9 * psi[0])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_damage_integral_monotone(seed):
    rng = np.random.default_rng(seed)
    n = 60
    u = rng.uniform(0, P.u_max, n)
    d = rng.normal(0, 2e4, n)
    for smooth in (False, True):
        traj = simulate(random_state(rng, P, 0.02), u, d, 0.1, P, smooth=smooth, kappa=1e-6, check_validity=False)
        assert np.all(np.diff(traj[:, -1]) >= 0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), a=st.floats(-2, 2), b=st.floats(-2, 2))
def test_superposition_without_input(seed, a, b):
    rng = np.random.default_rng(seed)
    n = 40
    x1, x2 = random_state(rng, P), random_state(rng, P)
    d1, d2 = rng.normal(0, 1e4, n), rng.normal(0, 1e4, n)
    zero = np.zeros(n)
    k = P.n + 2
    run = lambda x, d: simulate(x, zero, d, 0.1, P, check_validity=False)[:, :k]
    lhs = run(a * x1 + b * x2, a * d1 + b * d2)
    rhs = a * run(x1, d1) + b * run(x2, d2)
    scale = np.abs(run(x1, d1)).max() + np.abs(run(x2, d2)).max()
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-11 * scale * (abs(a) + abs(b) + 1))
