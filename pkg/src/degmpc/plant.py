"""Flap/DEG dynamics, the cost-augmented state and the RK4 integrator.

States are plain numpy vectors. A plant state is ``[theta, delta, z...]`` and an
extended state appends the running cost integrals ``Upsilon1`` (energy) and
``Upsilon2`` (damage).
"""
from __future__ import annotations

import warnings

import numpy as np

from . import _kernels
from .config import PlantParams

THETA, DELTA = 0, 1
UPS1, UPS2 = -2, -1


class ModelValidityWarning(UserWarning):
    pass


def kernel_params(p: PlantParams, kappa: float = 1.0):
    return (
        float(p.I_h), float(p.K_h), float(p.B_h), float(p.C_0), float(p.R_0),
        float(p.alpha), float(p.u_th), float(kappa),
        np.ascontiguousarray(p.A_r, dtype=float),
        np.ascontiguousarray(p.B_r.ravel(), dtype=float),
        np.ascontiguousarray(p.C_r.ravel(), dtype=float),
        np.ascontiguousarray(p.S_r, dtype=float),
    )


def extended_state(theta=0.0, delta=0.0, z=None, p: PlantParams | None = None, ups1=0.0, ups2=0.0):
    """Build an extended state vector; ``z`` defaults to zeros of the radiation order."""
    if z is None:
        if p is None:
            raise ValueError("need z or plant params to size the radiation state")
        z = np.zeros(p.n)
    return np.concatenate(([theta, delta], np.asarray(z, dtype=float), [ups1, ups2]))


def radiation_state(xi: np.ndarray) -> np.ndarray:
    return xi[2:-2]


def derivative(xi, u, d, p: PlantParams, smooth: bool = False, kappa: float = 1.0) -> np.ndarray:
    out = np.empty(p.state_dim)
    _kernels.deriv(np.asarray(xi, dtype=float), float(u), float(d), kernel_params(p, kappa), smooth, out)
    return out


def rk4_foh_step(xi, u_k, u_k1, d_k, d_k1, delta, p: PlantParams, smooth=False, kappa=1.0) -> np.ndarray:
    """One classical RK4 step with inputs linearly interpolated across the step."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    out = np.empty(p.state_dim)
    _kernels.rk4_step(
        np.asarray(xi, dtype=float), float(u_k), float(u_k1), float(d_k), float(d_k1),
        float(delta), kernel_params(p, kappa), smooth, out,
    )
    return out


def storage(x, u, p: PlantParams) -> float:
    """Stored energy: kinetic, hydrostatic, radiation and electrostatic terms."""
    x = np.asarray(x, dtype=float)
    theta, delta, z = x[0], x[1], x[2 : 2 + p.n]
    return float(
        0.5 * p.I_h * delta**2
        + 0.5 * p.K_h * theta**2
        + 0.5 * z @ p.Q_r @ z
        + 0.5 * p.C_0 * (1.0 - theta**2) * u
    )


def storage_series(traj: np.ndarray, u: np.ndarray, p: PlantParams) -> np.ndarray:
    theta, delta, z = traj[:, 0], traj[:, 1], traj[:, 2 : 2 + p.n]
    zqz = np.einsum("ki,ij,kj->k", z, p.Q_r, z)
    return 0.5 * p.I_h * delta**2 + 0.5 * p.K_h * theta**2 + 0.5 * zqz + 0.5 * p.C_0 * (1.0 - theta**2) * u


def simulate(xi0, u, d, delta, p: PlantParams, smooth=False, kappa=1.0, check_validity=True) -> np.ndarray:
    """Chain RK4/FOH steps; returns an ``(N, n + 4)`` trajectory with ``traj[0] = xi0``.

    Inputs must satisfy ``0 <= u <= u_max``.
    """
    u = np.ascontiguousarray(u, dtype=float)
    d = np.ascontiguousarray(d, dtype=float)
    if u.shape != d.shape or u.ndim != 1:
        raise ValueError(f"input and excitation lengths differ: {u.shape} vs {d.shape}")
    if len(u) < 1:
        raise ValueError("empty input sequence")
    if np.any(u < 0) or np.any(u > p.u_max):
        raise ValueError("input outside [0, u_max]")
    xi0 = np.asarray(xi0, dtype=float)
    if xi0.shape != (p.state_dim,):
        raise ValueError(f"extended state must have length {p.state_dim}")
    traj = _kernels.simulate(xi0, u, d, float(delta), kernel_params(p, kappa), smooth)
    if check_validity:
        warn_if_invalid(traj, p)
    return traj


def warn_if_invalid(traj: np.ndarray, p: PlantParams) -> None:
    peak = float(np.max(np.abs(traj[:, THETA])))
    if peak > p.theta_valid:
        warnings.warn(
            f"flap angle reached {peak:.3f} rad, beyond the small-angle bound {p.theta_valid}",
            ModelValidityWarning,
            stacklevel=3,
        )


def electric_field(u, p: PlantParams):
    """Field ``sqrt(u) / h_l`` for reporting."""
    return np.sqrt(np.asarray(u, dtype=float)) / p.h_l
