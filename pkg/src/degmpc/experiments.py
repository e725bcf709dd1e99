"""Seeded end-to-end studies: horizon sweep, weight-controlled runs, fixed vs adaptive.

Every study writes per-run CSVs plus one summary CSV into its output
directory. Rows carry the seed and the configuration hash. Summaries are
sorted by seed and then by horizon, budget or weight, and contain no timing
data, so identical inputs give byte-identical summaries.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config
from .mpc import MpcConfig, control_deviation, run_mpc
from .objectives import CostPair, Weights
from .ocp import OcpInstance, solve
from .pareto import FrontPoint, mark_dominated, write_front_csv
from .plant import extended_state
from .waves import realize_wave, sample_torque
from .weight_adapt import WeightController, build_default_schedule

log = logging.getLogger(__name__)

QUICK_FACTOR = 10.0
GROUND_TRUTH_MAX_ITER = 20000


def _hash(cfg: Config) -> str:
    return cfg.hash()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_rows(path, columns: list[str], rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(columns)
        for row in rows:
            wr.writerow([_fmt(row.get(c, "")) for c in columns])
    return path


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def ground_truth(cfg: Config, seed: int, duration: float):
    """Single open-loop solve over the whole window from rest; returns ``(result, d)``."""
    dz = cfg.discretization
    N = int(round(duration / dz.delta)) + 1
    wave = realize_wave(cfg.wave, seed)
    d = sample_torque(wave, 0, N, dz.delta)
    solver = cfg.replace(solver__max_iter=max(cfg.solver.max_iter, GROUND_TRUTH_MAX_ITER)).solver
    inst = OcpInstance(extended_state(p=cfg.plant), cfg.mpc.u_init, d, Weights.from_w2(cfg.experiment.pilot_w2),
                       cfg.plant, dz.delta, dz.kappa, cfg.solver.energy_scale, solver)
    return solve(inst), d


@dataclass
class HorizonSweepResult:
    rows: list = field(default_factory=list)
    logs: dict = field(default_factory=dict)        # (seed, horizon) -> MpcLog
    truth: dict = field(default_factory=dict)       # seed -> SolveResult


def _horizon_run(job):
    cfg, seed, horizon, duration = job
    wave = realize_wave(cfg.wave, seed)
    mcfg = MpcConfig.from_config(cfg, horizon=horizon, duration=duration)
    return run_mpc(cfg, mcfg, wave, Weights.from_w2(cfg.experiment.pilot_w2))


def horizon_sweep(cfg: Config, seeds=None, out=None, quick=False, horizons=None, jobs=1) -> HorizonSweepResult:
    """MPC at each horizon against the long open-loop solve on the same realization.

    Inputs are compared sample-by-sample over the ground-truth window
    (mean absolute and root-mean-square deviation); extracted energy
    ``-Upsilon1`` is compared as a ratio.
    """
    ex = cfg.experiment
    seeds = list(ex.seeds if seeds is None else seeds)
    horizons = list(ex.horizons if horizons is None else horizons)
    duration = ex.ground_truth / (QUICK_FACTOR if quick else 1.0)
    h = cfg.discretization.delta
    res = HorizonSweepResult()
    jobs_list = [(cfg, s, H, duration) for s in sorted(seeds) for H in sorted(horizons)]
    logs = _map(_horizon_run, jobs_list, jobs)
    out = Path(out) if out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    chash = _hash(cfg)
    for s in sorted(seeds):
        gt, d = ground_truth(cfg, s, duration)
        res.truth[s] = gt
        if out:
            write_rows(out / f"ground_truth_seed{s}.csv", ["t", "u", "seed", "config_hash"],
                       [{"t": k * h, "u": gt.u[k], "seed": s, "config_hash": chash} for k in range(len(gt.u))])
    for (_, s, H, _), lg in zip(jobs_list, logs):
        gt = res.truth[s]
        mae, rmse = control_deviation(lg.u, gt.u)
        e_mpc, e_gt = lg.costs.energy, gt.costs.energy
        res.logs[(s, H)] = lg
        res.rows.append({
            "seed": s, "horizon": H, "duration": duration, "MAE": mae, "RMSE": rmse,
            "energy_mpc": e_mpc, "energy_ground_truth": e_gt, "energy_ratio": e_mpc / e_gt,
            "J2_mpc": lg.costs.J2, "J2_ground_truth": gt.costs.J2, "ground_truth_status": gt.status,
            "config_hash": chash,
        })
        if out and (H == min(horizons) or H == ex.horizon):
            lg.write_csv(out / f"mpc_seed{s}_h{H:g}.csv", {"seed": s, "config_hash": chash}, ex.log_every)
    if out:
        write_rows(out / "summary.csv", list(res.rows[0]), res.rows)
    return res


@dataclass
class WeightControlResult:
    J_ref: float
    rows: list = field(default_factory=list)
    logs: dict = field(default_factory=dict)          # (seed, budget fraction) -> MpcLog
    pilot_logs: dict = field(default_factory=dict)    # seed -> MpcLog
    controllers: dict = field(default_factory=dict)   # (seed, budget fraction) -> WeightController


def _fixed_run(job):
    cfg, seed, w2, duration = job
    wave = realize_wave(cfg.wave, seed)
    mcfg = MpcConfig.from_config(cfg, horizon=cfg.experiment.horizon, duration=duration)
    return run_mpc(cfg, mcfg, wave, Weights.from_w2(w2))


def _adaptive_run(job):
    cfg, seed, J_d, duration = job
    wave = realize_wave(cfg.wave, seed)
    mcfg = MpcConfig.from_config(cfg, horizon=cfg.experiment.horizon, duration=duration)
    # the run ends at the target time, also when durations are shortened
    ctrl = WeightController.from_config(cfg.weight_control, cfg.discretization.delta, J_d=J_d, t_bd=duration)
    return run_mpc(cfg, mcfg, wave, ctrl), ctrl


def target_time(cfg: Config, quick: bool) -> float:
    return cfg.weight_control.t_bd / (QUICK_FACTOR if quick else 1.0)


def pilot_runs(cfg: Config, seeds, quick=False, jobs=1) -> dict:
    """Fixed-weight runs at the pilot weight up to the target time, keyed by seed."""
    t_bd = target_time(cfg, quick)
    seeds = sorted(seeds)
    logs = _map(_fixed_run, [(cfg, s, cfg.experiment.pilot_w2, t_bd) for s in seeds], jobs)
    return dict(zip(seeds, logs))


def reference_damage(pilots: dict) -> float:
    """Damage scale of the budgets: mean pilot damage at the target time over seeds."""
    return float(np.mean([pilots[s].costs.J2 for s in sorted(pilots)]))


def weight_control_study(cfg: Config, seeds=None, out=None, quick=False, jobs=1, pilots=None) -> WeightControlResult:
    """Weight-controlled runs for every seed and budget fraction.

    Budgets are ``fraction * J_ref`` with ``J_ref`` the mean pilot damage at
    the target time, so the budgets sit on the damage scale the shipped
    damage normalisation actually produces.
    """
    ex = cfg.experiment
    seeds = sorted(ex.seeds if seeds is None else seeds)
    t_bd = target_time(cfg, quick)
    if pilots is None:
        pilots = pilot_runs(cfg, seeds, quick, jobs)
    J_ref = reference_damage(pilots)
    res = WeightControlResult(J_ref=J_ref, pilot_logs=pilots)
    jobs_list = [(cfg, s, b * J_ref, t_bd) for s in seeds for b in sorted(ex.budgets)]
    outs = _map(_adaptive_run, jobs_list, jobs)
    chash = _hash(cfg)
    out = Path(out) if out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for (_, s, J_d, _), (lg, ctrl), b in zip(jobs_list, outs, [b for _ in seeds for b in sorted(ex.budgets)]):
        res.logs[(s, b)] = lg
        res.controllers[(s, b)] = ctrl
        c = lg.costs
        res.rows.append({
            "seed": s, "budget_fraction": b, "J_d": J_d, "J_ref": J_ref, "t_bd": t_bd,
            "Upsilon2_end": c.J2, "budget_ratio": c.J2 / J_d, "energy_end": c.energy,
            "final_index": int(ctrl.state.i_w),
            "evaluations": sum(not e["skipped"] for e in ctrl.events), "config_hash": chash,
        })
        if out:
            lg.write_csv(out / f"weight_control_seed{s}_b{b:g}.csv", {"seed": s, "J_d": J_d, "config_hash": chash},
                         ex.log_every)
    if out:
        write_rows(out / "summary.csv", list(res.rows[0]), res.rows)
        write_rows(out / "pilot.csv", ["seed", "w2", "J1", "J2", "energy", "config_hash"],
                   [{"seed": s, "w2": ex.pilot_w2, "J1": pilots[s].costs.J1, "J2": pilots[s].costs.J2,
                     "energy": pilots[s].costs.energy, "config_hash": chash} for s in seeds])
    return res


@dataclass
class ComparisonResult:
    seed: int
    J_d: float
    adaptive: CostPair
    fixed: list                      # FrontPoint per fixed weight, sorted by w2
    rows: list = field(default_factory=list)
    logs: dict = field(default_factory=dict)

    def best_admissible_energy(self) -> float:
        """Largest extracted energy among fixed weights meeting the budget (NaN if none)."""
        ok = [p.costs.energy for p in self.fixed if p.costs.J2 <= self.J_d]
        return max(ok) if ok else float("nan")

    def dominated_fixed(self) -> list[float]:
        """Weights of fixed runs weakly dominated by the adaptive endpoint."""
        a = self.adaptive
        return [p.w2 for p in self.fixed if a.J1 <= p.costs.J1 and a.J2 <= p.costs.J2]


def comparison_weights(cfg: Config) -> list[float]:
    wc = cfg.weight_control
    sched = build_default_schedule(wc.n_w, wc.w2_min, wc.w2_max)
    return sorted(set(round(w, 12) for w in list(sched.w2) + list(cfg.experiment.extreme_weights)))


def fixed_vs_adaptive(cfg: Config, seed=None, out=None, quick=False, budget=None, jobs=1,
                      J_ref=None, adaptive_log=None, fixed_logs=None) -> ComparisonResult:
    """Fixed-weight closed loops against the weight-controlled run on one realization.

    ``J_ref`` defaults to the pilot damage over the configured seeds. Logs
    already produced elsewhere for the same configuration (pilot or adaptive
    runs) can be passed in and are reused instead of recomputed.
    """
    ex = cfg.experiment
    seed = ex.seeds[0] if seed is None else seed
    budget = max(ex.budgets) if budget is None else budget
    t_bd = target_time(cfg, quick)
    fixed_logs = dict(fixed_logs or {})
    if J_ref is None:
        pilots = pilot_runs(cfg, ex.seeds, quick, jobs)
        J_ref = reference_damage(pilots)
        if seed in pilots:
            fixed_logs.setdefault(ex.pilot_w2, pilots[seed])
    J_d = budget * J_ref
    weights = comparison_weights(cfg)
    todo = [w for w in weights if w not in fixed_logs]
    for w, lg in zip(todo, _map(_fixed_run, [(cfg, seed, w, t_bd) for w in todo], jobs)):
        fixed_logs[w] = lg
    if adaptive_log is None:
        adaptive_log, _ = _adaptive_run((cfg, seed, J_d, t_bd))
    pts = mark_dominated([FrontPoint(w, fixed_logs[w].costs, seed=seed, horizon=ex.horizon, duration=t_bd)
                          for w in weights])
    res = ComparisonResult(seed=seed, J_d=J_d, adaptive=adaptive_log.costs, fixed=pts,
                           logs={**{w: fixed_logs[w] for w in weights}, "adaptive": adaptive_log})
    chash = _hash(cfg)
    digests = {lg.wave_digest for lg in res.logs.values()}
    if len(digests) != 1:
        raise RuntimeError("comparison runs used different wave realizations")
    dominated = set(res.dominated_fixed())
    for p in pts:
        res.rows.append({"seed": seed, "run": "fixed", "w2": p.w2, "J1": p.costs.J1, "J2": p.costs.J2,
                         "energy": p.costs.energy, "admissible": int(p.costs.J2 <= J_d),
                         "dominated_by_adaptive": int(p.w2 in dominated),
                         "J_d": J_d, "wave_digest": adaptive_log.wave_digest,
                         "config_hash": chash})
    res.rows.append({"seed": seed, "run": "adaptive", "w2": "", "J1": res.adaptive.J1, "J2": res.adaptive.J2,
                     "energy": res.adaptive.energy, "admissible": int(res.adaptive.J2 <= J_d),
                     "dominated_by_adaptive": "", "J_d": J_d, "wave_digest": adaptive_log.wave_digest,
                     "config_hash": chash})
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(out / "summary.csv", list(res.rows[0]), res.rows)
        write_front_csv(out / "fixed_front.csv", pts, {"config_hash": chash})
        for w, lg in res.logs.items():
            name = "adaptive" if w == "adaptive" else f"fixed_w{w:g}"
            lg.write_csv(out / f"{name}_seed{seed}.csv", {"seed": seed, "config_hash": chash}, ex.log_every)
    return res
