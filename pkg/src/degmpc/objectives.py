"""Energy and damage costs, their discrete counterparts and an energy audit."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PlantParams
from .plant import UPS1, UPS2, storage_series

SOFTPLUS_CUTOFF = 30.0


@dataclass(frozen=True)
class CostPair:
    J1: float  # energy cost [J]; negative means energy was extracted
    J2: float  # accumulated damage, dimensionless

    @property
    def energy(self) -> float:
        return -self.J1


@dataclass(frozen=True)
class Weights:
    w1: float
    w2: float

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or abs(self.w1 + self.w2 - 1.0) > 1e-12:
            raise ValueError(f"weights must be non-negative and sum to one, got ({self.w1}, {self.w2})")

    @classmethod
    def from_w2(cls, w2: float) -> "Weights":
        return cls(1.0 - w2, w2)

    def scalarize(self, costs: CostPair, energy_scale: float) -> float:
        return self.w1 * costs.J1 / energy_scale + self.w2 * costs.J2


def damage_integrand(u, u_th: float, alpha: float, kappa: float = 1.0, smooth: bool = False):
    """Damage rate ``alpha * max(u - u_th, 0)``, or its softplus upper bound.

    The smoothed rate exceeds the exact one by at most ``alpha * ln 2 / kappa``.
    """
    e = np.asarray(u, dtype=float) - u_th
    if not smooth:
        return alpha * np.maximum(e, 0.0)
    s = kappa * e
    # linear asymptote past the cutoff keeps exp from overflowing
    out = np.where(s > SOFTPLUS_CUTOFF, e, np.log1p(np.exp(np.minimum(s, SOFTPLUS_CUTOFF))) / kappa)
    return alpha * out


def discrete_costs(traj: np.ndarray) -> CostPair:
    """Read ``(Upsilon1[N-1], Upsilon2[N-1])`` off a simulated trajectory.

    The terminal storage term is deliberately left out; costs are relative to the
    integrals stored in ``traj[0]``.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    return CostPair(float(traj[-1, UPS1] - traj[0, UPS1]), float(traj[-1, UPS2] - traj[0, UPS2]))


def energy_cost(traj: np.ndarray, u: np.ndarray, p: PlantParams) -> float:
    """Physical J1: discrete integral plus the storage change over the run."""
    psi = storage_series(traj, u, p)
    return float(traj[-1, UPS1] - traj[0, UPS1] + psi[-1] - psi[0])


@dataclass(frozen=True)
class EnergyAudit:
    delta_psi: float
    viscous: float
    radiation: float
    electrical_loss: float
    wave_input: float
    upsilon1: float
    J1_quadrature: float
    J1_bookkeeping: float
    J1_port: float
    residual: float
    port_residual: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def continuous_energy_audit(traj, u, d, delta: float, p: PlantParams) -> EnergyAudit:
    """Split J1 into its terms by trapezoidal quadrature over the sampled trajectory.

    ``residual`` compares the quadrature J1 against the RK4-integrated
    ``Upsilon1`` bookkeeping; ``port_residual`` compares the bookkeeping against
    the electrical-port power ``u/R_0 - 2 C_0 theta delta u + C_0 (1 - theta^2) du/dt / 2``,
    which must agree when the radiation storage relations hold.
    """
    traj = np.asarray(traj, dtype=float)
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    theta, vel, z = traj[:, 0], traj[:, 1], traj[:, 2 : 2 + p.n]
    psi = storage_series(traj, u, p)
    dpsi = float(psi[-1] - psi[0])
    trap = lambda y: float(np.sum(0.5 * (y[1:] + y[:-1])) * delta) if len(y) > 1 else 0.0
    visc = trap(p.B_h * vel**2)
    rad = trap(np.einsum("ki,ij,kj->k", z, p.S_r, z))
    elec = trap(u / p.R_0)
    wave = trap(d * vel)
    ups = float(traj[-1, UPS1] - traj[0, UPS1])
    j1_quad = dpsi + visc + rad + elec - wave
    j1_book = dpsi + ups
    # FOH input: du/dt is constant on each step
    if len(u) > 1:
        udot = np.diff(u) / delta
        mid = lambda y: 0.5 * (y[1:] + y[:-1])
        port = trap(u / p.R_0 - 2.0 * p.C_0 * theta * vel * u) + float(
            np.sum(0.5 * p.C_0 * (1.0 - mid(theta**2)) * udot) * delta
        )
    else:
        port = 0.0
    return EnergyAudit(
        delta_psi=dpsi, viscous=visc, radiation=rad, electrical_loss=elec, wave_input=wave,
        upsilon1=ups, J1_quadrature=j1_quad, J1_bookkeeping=j1_book, J1_port=port,
        residual=j1_quad - j1_book, port_residual=j1_book - port,
    )
