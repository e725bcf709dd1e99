"""Weight sweeps and dominance bookkeeping for the two-objective trade-off."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace

import numpy as np

from .config import Config
from .mpc import MpcConfig, run_mpc
from .objectives import CostPair, Weights
from .ocp import NonFiniteStateError, OcpInstance, solve
from .waves import WaveRealization

log = logging.getLogger(__name__)

FRONT_COLUMNS = ["w2", "J1", "J2", "energy", "dominated", "status", "seed", "horizon", "duration"]


@dataclass(frozen=True)
class FrontPoint:
    w2: float
    costs: CostPair
    dominated: bool = False
    status: str = "converged"
    seed: int | None = None
    horizon: float | None = None
    duration: float | None = None

    @property
    def ok(self) -> bool:
        return self.status != "failed"


def dominates(a: CostPair, b: CostPair) -> bool:
    """Weak dominance with at least one strict improvement (both costs minimized)."""
    return a.J1 <= b.J1 and a.J2 <= b.J2 and (a.J1 < b.J1 or a.J2 < b.J2)


def mark_dominated(points: list[FrontPoint]) -> list[FrontPoint]:
    """Flag every point dominated by another successful point; failed points stay flagged."""
    good = [p for p in points if p.ok]
    out = []
    for p in points:
        flag = not p.ok or any(dominates(q.costs, p.costs) for q in good if q is not p)
        out.append(replace(p, dominated=flag))
    return out


def monotonicity_violations(points: list[FrontPoint], rel_tol: float = 1e-6) -> list[int]:
    """Positions where J2 increases with w2 (points sorted by w2) beyond ``rel_tol``.

    With exact global minimizers the weighted-sum exchange argument forces J2
    to be non-increasing in w2; local minima can break it.
    """
    pts = sorted((p for p in points if p.ok), key=lambda p: p.w2)
    scale = max((abs(p.costs.J2) for p in pts), default=0.0) or 1.0
    return [i for i in range(1, len(pts)) if pts[i].costs.J2 > pts[i - 1].costs.J2 + rel_tol * scale]


def sweep_ocp(template: OcpInstance, w2_list, seed=None, horizon=None) -> list[FrontPoint]:
    """One solve per weight on a shared instance; costs use the exact damage integrand."""
    pts = []
    for w2 in w2_list:
        inst = replace(template, weights=Weights.from_w2(float(w2)))
        try:
            res = solve(inst)
            pts.append(FrontPoint(float(w2), res.costs, status=res.status, seed=seed, horizon=horizon))
        except NonFiniteStateError as exc:
            log.warning("sweep point w2=%g failed: %s", w2, exc)
            pts.append(FrontPoint(float(w2), CostPair(np.nan, np.nan), status="failed", seed=seed, horizon=horizon))
    return mark_dominated(pts)


def sweep_mpc_fixed_weights(cfg: Config, mcfg: MpcConfig, wave: WaveRealization, w2_list, seed=None):
    """Full closed-loop run per fixed weight on one realization.

    Returns ``(points, logs)`` with logs keyed by ``w2``. Fixed-weight closed
    loops are not Pareto-optimal in general; flags describe this set only.
    """
    pts, logs = [], {}
    horizon = (mcfg.N - 1) * mcfg.delta
    for w2 in w2_list:
        lg = run_mpc(cfg, mcfg, wave, Weights.from_w2(float(w2)))
        logs[float(w2)] = lg
        bad = sum(s["status"] == "failed" for s in lg.solves)
        pts.append(FrontPoint(float(w2), lg.costs, status="converged" if bad == 0 else f"held-{bad}",
                              seed=seed, horizon=horizon, duration=mcfg.duration))
    return mark_dominated(pts), logs


def write_front_csv(path, points: list[FrontPoint], extra: dict | None = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(FRONT_COLUMNS + list(extra))
        for p in points:
            wr.writerow([p.w2, repr(p.costs.J1), repr(p.costs.J2), repr(p.costs.energy), int(p.dominated),
                         p.status, "" if p.seed is None else p.seed,
                         "" if p.horizon is None else p.horizon,
                         "" if p.duration is None else p.duration] + list(extra.values()))
