"""Receding-horizon loop with perfect wave preview."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .config import Config
from .objectives import CostPair, Weights
from .ocp import NonFiniteStateError, OcpInstance, solve
from .plant import UPS1, UPS2, extended_state, kernel_params, warn_if_invalid
from .waves import WaveRealization, sample_torque

log = logging.getLogger(__name__)

STEP_COLUMNS = ["t", "u_applied", "theta", "delta", "Upsilon1", "Upsilon2", "w2", "i_w",
                "iterations", "stationarity", "J_pred", "J_rate"]


@dataclass
class MpcConfig:
    N: int                 # samples per horizon (N - 1 steps)
    r: int                 # steps applied per iteration
    duration: float        # [s]
    delta: float
    xi0: np.ndarray | None = None
    u_init: float = 0.0
    warm_start: bool = True
    tol_stat: float | None = None   # None: use the solver section's tolerance

    def __post_init__(self):
        if self.N < self.r + 1:
            raise ValueError(f"horizon N={self.N} must exceed applied steps r={self.r}")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    @property
    def total_steps(self) -> int:
        return int(round(self.duration / self.delta))

    @property
    def iterations(self) -> int:
        return -(-self.total_steps // self.r)

    @classmethod
    def from_config(cls, cfg: Config, horizon: float | None = None, duration: float | None = None, r=None):
        dz = cfg.discretization
        N = dz.N if horizon is None else int(round(horizon / dz.delta)) + 1
        return cls(
            N=N, r=dz.r if r is None else r,
            duration=cfg.mpc.duration if duration is None else duration,
            delta=dz.delta, u_init=cfg.mpc.u_init, warm_start=cfg.mpc.warm_start,
            tol_stat=cfg.mpc.tol_stat,
        )


@dataclass
class MpcLog:
    t: np.ndarray
    u: np.ndarray
    states: np.ndarray          # extended states on the step grid, one row per t
    w2: np.ndarray              # damage weight active over each step (NaN on the last row)
    i_w: np.ndarray
    solves: list = field(default_factory=list)   # per-solve dicts
    wave_digest: str = ""

    @property
    def theta(self):
        return self.states[:, 0]

    @property
    def Upsilon1(self):
        return self.states[:, UPS1]

    @property
    def Upsilon2(self):
        return self.states[:, UPS2]

    @property
    def costs(self) -> CostPair:
        return CostPair(float(self.states[-1, UPS1] - self.states[0, UPS1]),
                        float(self.states[-1, UPS2] - self.states[0, UPS2]))

    def write_csv(self, path, extra: dict | None = None, every: int = 1) -> None:
        extra = extra or {}
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(STEP_COLUMNS + list(extra))
            solve_at = {s["k"]: s for s in self.solves}
            for k in range(0, len(self.t), every):
                s = solve_at.get(k)
                wr.writerow([
                    f"{self.t[k]:.6g}", repr(float(self.u[k])), repr(float(self.states[k, 0])),
                    repr(float(self.states[k, 1])), repr(float(self.states[k, UPS1])),
                    repr(float(self.states[k, UPS2])), self.w2[k], self.i_w[k],
                    s["iterations"] if s else "", s["stationarity"] if s else "",
                    s.get("J_pred", "") if s else "", s.get("J_rate", "") if s else "",
                ] + list(extra.values()))


class FixedWeights:
    """Weight provider returning one constant pair."""

    def __init__(self, weights: Weights):
        self.weights = weights

    def current(self) -> tuple[Weights, int]:
        return self.weights, 0

    def observe(self, t: float, k: int, states: np.ndarray, u: np.ndarray) -> dict:
        return {}


def run_mpc(cfg: Config, mcfg: MpcConfig, wave: WaveRealization, weights) -> MpcLog:
    """Closed loop: solve, apply ``u[0..r]`` to the plant, shift, repeat.

    ``weights`` is a :class:`Weights` pair or a controller exposing
    ``current() -> (Weights, index)`` and ``observe(t, k, states, u) -> dict``
    (see ``weight_adapt``).
    """
    p = cfg.plant
    dz = cfg.discretization
    controller = FixedWeights(weights) if isinstance(weights, Weights) else weights
    K = mcfg.total_steps
    N, r, h = mcfg.N, mcfg.r, mcfg.delta
    xi = extended_state(p=p) if mcfg.xi0 is None else np.array(mcfg.xi0, dtype=float)
    m = p.state_dim
    states = np.empty((K + 1, m))
    states[0] = xi
    u_hist = np.empty(K + 1)
    u_hist[0] = mcfg.u_init
    w2_hist = np.full(K + 1, np.nan)
    iw_hist = np.zeros(K + 1, dtype=int)
    prm_exact = kernel_params(p, dz.kappa)
    solver = cfg.solver if mcfg.tol_stat is None else replace(cfg.solver, tol_stat=mcfg.tol_stat)
    d_all = sample_torque(wave, 0, K + N, h)
    solves = []
    u_prev = None
    u0 = mcfg.u_init
    k = 0
    while k < K:
        w, iw = controller.current()
        inst = OcpInstance(states[k], u0, d_all[k : k + N], w, p, h, dz.kappa,
                           cfg.solver.energy_scale, solver)
        warm = None
        if mcfg.warm_start and u_prev is not None:
            warm = np.concatenate((u_prev[r:], np.full(r, u_prev[-1])))
            warm[0] = u0
        try:
            res = solve(inst, warm_start=warm)
            u_plan = res.u
            status = res.status
        except NonFiniteStateError as exc:
            # hold the last applied input for this sampling interval
            log.warning("solve failed at t=%.3f: %s; holding input", k * h, exc)
            u_plan = np.full(N, u0)
            res = None
            status = "failed"
        steps = min(r, K - k)
        seg = _kernels.simulate(states[k], u_plan[: steps + 1], d_all[k : k + steps + 1], h, prm_exact, False)
        states[k + 1 : k + steps + 1] = seg[1:]
        u_hist[k + 1 : k + steps + 1] = u_plan[1 : steps + 1]
        w2_hist[k : k + steps] = w.w2
        iw_hist[k : k + steps] = iw
        rec = {
            "k": k, "t": k * h, "digest": inst.digest(), "status": status,
            "cost": res.cost if res else np.nan,
            "iterations": res.iterations if res else 0,
            "stationarity": res.stationarity if res else np.nan,
        }
        u0 = float(u_plan[steps])
        u_prev = u_plan if res is not None else None
        k += steps
        info = controller.observe(k * h, k, states[: k + 1], u_hist[: k + 1])
        rec.update(info or {})
        solves.append(rec)
    warn_if_invalid(states, p)
    return MpcLog(t=np.arange(K + 1) * h, u=u_hist, states=states, w2=w2_hist, i_w=iw_hist,
                  solves=solves, wave_digest=wave.digest())


def control_deviation(u_mpc, u_ref) -> tuple[float, float]:
    """Mean absolute error and root-mean-square error between two input records."""
    a = np.asarray(u_mpc, dtype=float)
    b = np.asarray(u_ref, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    e = a - b
    return float(np.mean(np.abs(e))), float(np.sqrt(np.mean(e**2)))


def bang_bang_fraction(u, u_max: float, band: float = 0.05) -> float:
    """Share of inputs within ``band * u_max`` of either bound."""
    v = np.asarray(u, dtype=float) / u_max
    return float(np.mean((v <= band) | (v >= 1.0 - band)))
