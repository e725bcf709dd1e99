"""Stochastic excitation torque from a Bretschneider spectrum."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .config import WaveSpectrumConfig, validate_wave


def bretschneider_density(omega, A_B: float, B_B: float):
    """Spectral density ``A_B w^-5 exp(-B_B w^-4)``; ``omega`` must be positive."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("Bretschneider density is only defined for omega > 0")
    out = A_B * omega**-5 * np.exp(-B_B * omega**-4)
    return out if out.ndim else float(out)


def bretschneider_peak(B_B: float) -> float:
    return (4.0 * B_B / 5.0) ** 0.25


@dataclass(frozen=True)
class WaveRealization:
    omegas: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    drift_rates: np.ndarray
    gammas: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("omegas", "amplitudes", "phases", "drift_rates", "gammas"):
            getattr(self, name).setflags(write=False)

    def torque(self, t):
        return excitation_torque(self, t)

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.omegas, self.amplitudes, self.phases, self.drift_rates, self.gammas):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:12]


def realize_wave(cfg: WaveSpectrumConfig, seed: int | None = None) -> WaveRealization:
    """Draw phases and drift rates for one sea-state realization.

    Harmonics sit at ``omega_0 + i * delta_omega`` for ``i = 1..n_f`` (the
    ``i = 0`` term is singular when ``omega_0 = 0`` and is skipped).
    """
    validate_wave(cfg)
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    omegas = cfg.omegas
    amps = np.sqrt(2.0 * bretschneider_density(omegas, cfg.A_B, cfg.B_B) * cfg.delta_omega)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=cfg.n_f)
    rho = cfg.phase_drift_rate_bound
    drift = rng.uniform(-rho, rho, size=cfg.n_f)
    tab = cfg.gamma_table
    gammas = np.full(cfg.n_f, tab[0, 1]) if tab.shape[0] == 1 else np.interp(omegas, tab[:, 0], tab[:, 1])
    return WaveRealization(omegas, amps, phases, drift, gammas, int(seed))


def excitation_torque(w: WaveRealization, t):
    """``d(t) = sum_i Gamma_i A_i sin(w_i t + phi_i0 + drift_i t)``; vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    arg = np.multiply.outer(t, w.omegas + w.drift_rates) + w.phases
    return np.sin(arg) @ (w.gammas * w.amplitudes)


def torque_bound(w: WaveRealization) -> float:
    return float(np.sum(np.abs(w.gammas) * w.amplitudes))


def dominant_frequency(w: WaveRealization) -> float:
    # np.argmax returns the first maximum, i.e. the lowest frequency on ties
    if len(w.amplitudes) == 0:
        raise ValueError("empty realization")
    return float(w.omegas[int(np.argmax(w.amplitudes))])


def sample_torque(w: WaveRealization, k0: int, n: int, delta: float) -> np.ndarray:
    """Torque at grid points ``(k0 + k) * delta``, ``k = 0..n-1``.

    Times are built from integer step indices so that overlapping windows see
    bit-identical samples.
    """
    return excitation_torque(w, (k0 + np.arange(n)) * delta)
