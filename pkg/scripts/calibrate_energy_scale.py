"""Print the mean |J1| of pilot open-loop solves, the natural energy scale.

Each pilot is one horizon-length solve from rest at the pilot weight with the
energy scale currently configured. The shipped ``solver.energy_scale`` is a
round constant near these values; see the decisions ledger.
"""
import argparse

import numpy as np

from degmpc.config import load_config
from degmpc.objectives import Weights
from degmpc.ocp import OcpInstance, solve
from degmpc.plant import extended_state
from degmpc.waves import realize_wave, sample_torque


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--seeds", default="1,2,3")
    args = ap.parse_args()
    cfg = load_config(args.config)
    dz = cfg.discretization
    vals = []
    for seed in (int(s) for s in args.seeds.split(",")):
        d = sample_torque(realize_wave(cfg.wave, seed), 0, dz.N, dz.delta)
        inst = OcpInstance(extended_state(p=cfg.plant), cfg.mpc.u_init, d, Weights.from_w2(cfg.experiment.pilot_w2),
                           cfg.plant, dz.delta, dz.kappa, cfg.solver.energy_scale, cfg.solver)
        res = solve(inst)
        vals.append(abs(res.costs.J1))
        print(f"seed={seed} J1={res.costs.J1:.6g} J2={res.costs.J2:.6g} status={res.status}")
    print(f"mean |J1| = {np.mean(vals):.6g} J (configured energy_scale = {cfg.solver.energy_scale:g} J)")


if __name__ == "__main__":
    main()
