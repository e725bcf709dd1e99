"""Command-line entry point (``degmpc`` or ``python -m degmpc``).

The configuration comes from ``--config``, else ``$DEGMPC_CONFIG``, else the
shipped default. Every subcommand writes CSV into ``--out``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .config import ConfigError, load_config
from .mpc import MpcConfig, run_mpc
from .objectives import Weights, continuous_energy_audit, discrete_costs
from .ocp import OcpInstance, solve
from .pareto import monotonicity_violations, sweep_mpc_fixed_weights, sweep_ocp, write_front_csv
from .plant import extended_state, simulate, storage_series
from .waves import dominant_frequency, realize_wave, sample_torque, torque_bound
from .weight_adapt import WeightController


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_wave(cfg, args):
    w = realize_wave(cfg.wave, args.seed)
    h = cfg.discretization.delta
    n = int(round(args.duration / h)) + 1
    d = sample_torque(w, 0, n, h)
    out = _out(args)
    chash = cfg.hash()
    experiments.write_rows(out / f"wave_seed{args.seed}.csv", ["t", "d", "seed", "config_hash"],
                           [{"t": k * h, "d": d[k], "seed": args.seed, "config_hash": chash} for k in range(n)])
    experiments.write_rows(
        out / f"harmonics_seed{args.seed}.csv", ["omega", "amplitude", "phase", "drift_rate", "gamma", "seed"],
        [{"omega": w.omegas[i], "amplitude": w.amplitudes[i], "phase": w.phases[i],
          "drift_rate": w.drift_rates[i], "gamma": w.gammas[i], "seed": args.seed} for i in range(len(w.omegas))],
    )
    print(f"seed={args.seed} digest={w.digest()} |d|<={torque_bound(w):.6g} "
          f"dominant_omega={dominant_frequency(w):.6g}")


def _read_input_csv(path, p, delta):
    """Columns ``t, u, d`` on a uniform grid matching the configured step."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    t, u, d = (np.atleast_1d(data[c]).astype(float) for c in ("t", "u", "d"))
    if len(t) > 1 and not np.allclose(np.diff(t), delta, rtol=1e-9, atol=1e-12):
        raise ValueError(f"{path}: time column must be uniform with step {delta}")
    return u, d


def cmd_simulate(cfg, args):
    p = cfg.plant
    h = cfg.discretization.delta
    if args.input:
        u, d = _read_input_csv(args.input, p, h)
        n = len(u)
    else:
        n = int(round(args.duration / h)) + 1
        d = sample_torque(realize_wave(cfg.wave, args.seed), 0, n, h)
        u = np.full(n, args.u_fraction * p.u_max)
    xi0 = extended_state(theta=args.theta0, p=p)
    traj = simulate(xi0, u, d, h, p)
    psi = storage_series(traj, u, p)
    out = _out(args)
    chash = cfg.hash()
    zcols = [f"z{i}" for i in range(p.n)]
    rows = []
    for k in range(n):
        row = {"t": k * h, "u": u[k], "d": d[k], "theta": traj[k, 0], "delta": traj[k, 1]}
        row.update({c: traj[k, 2 + i] for i, c in enumerate(zcols)})
        row.update({"Upsilon1": traj[k, -2], "Upsilon2": traj[k, -1], "Psi": psi[k], "seed": args.seed,
                    "config_hash": chash})
        rows.append(row)
    experiments.write_rows(out / f"simulate_seed{args.seed}.csv", list(rows[0]), rows)
    c = discrete_costs(traj)
    print(f"J1={c.J1:.6g} J2={c.J2:.6g} max|theta|={np.max(np.abs(traj[:, 0])):.4g}")
    if args.audit:
        audit = continuous_energy_audit(traj, u, d, h, p)
        experiments.write_rows(out / f"audit_seed{args.seed}.csv", ["term", "value"],
                               [{"term": k, "value": v} for k, v in audit.as_dict().items()])
        print(json.dumps(audit.as_dict(), indent=2))


def cmd_ocp(cfg, args):
    dz = cfg.discretization
    n = int(round(args.horizon / dz.delta)) + 1
    d = sample_torque(realize_wave(cfg.wave, args.seed), 0, n, dz.delta)
    inst = OcpInstance(extended_state(p=cfg.plant), args.u0_fraction * cfg.plant.u_max, d,
                       Weights.from_w2(args.w2), cfg.plant, dz.delta, dz.kappa, cfg.solver.energy_scale, cfg.solver)
    res = solve(inst)
    out = _out(args)
    chash = cfg.hash()
    experiments.write_rows(out / f"ocp_seed{args.seed}_w{args.w2:g}.csv", ["t", "u", "seed", "w2", "config_hash"],
                           [{"t": k * dz.delta, "u": res.u[k], "seed": args.seed, "w2": args.w2,
                             "config_hash": chash} for k in range(n)])
    print(f"status={res.status} iterations={res.iterations} stationarity={res.stationarity:.3g} "
          f"J1={res.costs.J1:.6g} J2={res.costs.J2:.6g} digest={inst.digest()}")
    return 0 if res.ok else 2


def cmd_mpc(cfg, args):
    mcfg = MpcConfig.from_config(cfg, horizon=args.horizon, duration=args.duration)
    wave = realize_wave(cfg.wave, args.seed)
    if args.adaptive:
        J_d = cfg.weight_control.J_d if args.J_d is None else args.J_d
        weights = WeightController.from_config(cfg.weight_control, mcfg.delta, J_d=J_d)
        tag = f"adaptive_J{J_d:g}"
    else:
        weights = Weights.from_w2(args.w2)
        tag = f"w{args.w2:g}"
    lg = run_mpc(cfg, mcfg, wave, weights)
    out = _out(args)
    lg.write_csv(out / f"mpc_seed{args.seed}_{tag}.csv", {"seed": args.seed, "config_hash": cfg.hash()},
                 cfg.experiment.log_every)
    c = lg.costs
    print(f"J1={c.J1:.6g} J2={c.J2:.6g} energy={c.energy:.6g} solves={len(lg.solves)} "
          f"failed={sum(s['status'] == 'failed' for s in lg.solves)}")


def cmd_pareto(cfg, args):
    weights = _floats(args.weights) if args.weights else list(np.linspace(0.05, 0.95, 15))
    seeds = _ints(args.seeds) if args.seeds else list(cfg.experiment.seeds)
    dz = cfg.discretization
    out = _out(args)
    chash = cfg.hash()
    for s in seeds:
        wave = realize_wave(cfg.wave, s)
        if args.mode == "ocp":
            n = int(round(args.horizon / dz.delta)) + 1
            d = sample_torque(wave, 0, n, dz.delta)
            tmpl = OcpInstance(extended_state(p=cfg.plant), 0.0, d, Weights.from_w2(0.5), cfg.plant, dz.delta,
                               dz.kappa, cfg.solver.energy_scale, cfg.solver)
            pts = sweep_ocp(tmpl, weights, seed=s, horizon=args.horizon)
        else:
            mcfg = MpcConfig.from_config(cfg, horizon=args.horizon, duration=args.duration)
            pts, _ = sweep_mpc_fixed_weights(cfg, mcfg, wave, weights, seed=s)
        write_front_csv(out / f"pareto_{args.mode}_seed{s}.csv", pts, {"config_hash": chash})
        bad = monotonicity_violations(pts)
        print(f"seed={s} points={len(pts)} dominated={sum(p.dominated for p in pts)} monotonicity_violations={len(bad)}")


def cmd_horizon_sweep(cfg, args):
    seeds = _ints(args.seeds) if args.seeds else None
    res = experiments.horizon_sweep(cfg, seeds=seeds, out=_out(args), quick=args.quick, jobs=args.jobs)
    for r in res.rows:
        print(f"seed={r['seed']} horizon={r['horizon']:g} MAE={r['MAE']:.4g} energy_ratio={r['energy_ratio']:.5f}")


def cmd_weight_control(cfg, args):
    seeds = _ints(args.seeds) if args.seeds else None
    res = experiments.weight_control_study(cfg, seeds=seeds, out=_out(args), quick=args.quick, jobs=args.jobs)
    print(f"J_ref={res.J_ref:.6g}")
    for r in res.rows:
        print(f"seed={r['seed']} budget={r['budget_fraction']:g} J_d={r['J_d']:.4g} "
              f"Upsilon2={r['Upsilon2_end']:.4g} ratio={r['budget_ratio']:.4f} energy={r['energy_end']:.6g}")


def cmd_fixed_vs_adaptive(cfg, args):
    res = experiments.fixed_vs_adaptive(cfg, seed=args.seed, out=_out(args), quick=args.quick,
                                        budget=args.budget, jobs=args.jobs)
    best = res.best_admissible_energy()
    print(f"J_d={res.J_d:.4g} adaptive energy={res.adaptive.energy:.6g} J2={res.adaptive.J2:.4g} "
          f"best admissible fixed energy={best:.6g} dominated fixed weights={res.dominated_fixed()}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration (default: $DEGMPC_CONFIG or the shipped file)")
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="degmpc", description="DEG wave-energy converter control toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("wave", parents=[common], help="sample one wave realization")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--duration", type=float, default=320.0)
    p.set_defaults(func=cmd_wave)

    p = sub.add_parser("simulate", parents=[common], help="open-loop simulation under a constant input")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--u-fraction", type=float, default=0.0, help="constant input as a fraction of u_max")
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--input", help="CSV with columns t,u,d replacing the wave and constant input")
    p.add_argument("--audit", action="store_true", help="print and write the energy audit")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ocp", parents=[common], help="solve one finite-horizon problem")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--horizon", type=float, default=60.0)
    p.add_argument("--w2", type=float, default=0.5)
    p.add_argument("--u0-fraction", type=float, default=0.0)
    p.set_defaults(func=cmd_ocp)

    p = sub.add_parser("mpc", parents=[common], help="closed-loop run with fixed or adaptive weights")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--horizon", "--horizon-s", dest="horizon", type=float, default=60.0)
    p.add_argument("--duration", "--duration-s", dest="duration", type=float, default=None)
    p.add_argument("--w2", type=float, default=0.5)
    p.add_argument("--adaptive", "--weight-control", dest="adaptive", action="store_true",
                   help="use the damage-budget weight controller")
    p.add_argument("--J-d", dest="J_d", type=float, default=None, help="damage budget for --adaptive")
    p.set_defaults(func=cmd_mpc)

    p = sub.add_parser("pareto", parents=[common], help="weight sweep")
    p.add_argument("--mode", choices=["ocp", "mpc"], default="ocp")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--weights", help="comma-separated w2 values")
    p.add_argument("--horizon", type=float, default=60.0)
    p.add_argument("--duration", type=float, default=None, help="closed-loop duration for --mode mpc")
    p.set_defaults(func=cmd_pareto)

    for name, func, help_ in [("horizon-sweep", cmd_horizon_sweep, "MPC horizon against the long open-loop solve"),
                              ("weight-control", cmd_weight_control, "weight-controlled runs per seed and budget")]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--seeds", help="comma-separated seeds")
        p.add_argument("--quick", action="store_true", help="divide durations by 10")
        p.add_argument("--jobs", type=int, default=1)
        p.set_defaults(func=func)

    p = sub.add_parser("fixed-vs-adaptive", parents=[common], help="fixed weights against the weight controller")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--budget", type=float, default=None, help="budget as a fraction of the pilot damage")
    p.add_argument("--quick", action="store_true", help="divide durations by 10")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_fixed_vs_adaptive)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    return args.func(cfg, args) or 0


if __name__ == "__main__":
    sys.exit(main())
