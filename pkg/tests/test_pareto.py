import csv
import random

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from degmpc.config import load_config
from degmpc.mpc import MpcConfig
from degmpc.objectives import CostPair, Weights
from degmpc.ocp import OcpInstance
from degmpc.pareto import (
    FRONT_COLUMNS,
    FrontPoint,
    dominates,
    mark_dominated,
    monotonicity_violations,
    sweep_mpc_fixed_weights,
    sweep_ocp,
    write_front_csv,
)
from degmpc.plant import extended_state
from degmpc.waves import realize_wave, sample_torque

CFG = load_config()
P = CFG.plant
DZ = CFG.discretization


def pts(pairs):
    return [FrontPoint(0.1 * i, CostPair(*c)) for i, c in enumerate(pairs)]


def test_dominance_examples():
    a, b = CostPair(-1.0, 0.2), CostPair(-0.9, 0.3)
    assert dominates(a, b) and not dominates(b, a)
    assert not dominates(a, a)
    flags = [p.dominated for p in mark_dominated(pts([(-1.0, 0.2), (-0.9, 0.3)]))]
    assert flags == [False, True]
    assert [p.dominated for p in mark_dominated(pts([(-1.0, 0.2)]))] == [False]


def test_failed_points_are_flagged_and_ignored():
    p = pts([(-1.0, 0.2), (-0.5, 0.1)])
    p.append(FrontPoint(0.9, CostPair(np.nan, np.nan), status="failed"))
    flags = [q.dominated for q in mark_dominated(p)]
    assert flags == [False, False, True]


costs = st.tuples(st.floats(-10, 0), st.floats(0, 1))


@settings(max_examples=100, deadline=None)
@given(pairs=st.lists(costs, min_size=1, max_size=12), seed=st.integers(0, 1000))
def test_dominance_order_independent_and_staircase(pairs, seed):
    p = pts(pairs)
    flags = {q.w2: q.dominated for q in mark_dominated(p)}
    shuffled = p[:]
    random.Random(seed).shuffle(shuffled)
    assert {q.w2: q.dominated for q in mark_dominated(shuffled)} == flags
    front = sorted((q for q in mark_dominated(p) if not q.dominated), key=lambda q: (q.costs.J2, q.costs.J1))
    assert front
    J1 = [q.costs.J1 for q in front]
    assert all(b <= a for a, b in zip(J1, J1[1:]))


def test_monotonicity_violations():
    good = [FrontPoint(w, CostPair(-w, 1 - w)) for w in (0.1, 0.5, 0.9)]
    assert monotonicity_violations(good) == []
    bad = [FrontPoint(0.1, CostPair(0, 0.5)), FrontPoint(0.5, CostPair(0, 0.6)), FrontPoint(0.9, CostPair(0, 0.1))]
    assert monotonicity_violations(bad) == [1]


def ocp_template(seed=1, horizon=30.0):
    N = int(round(horizon / DZ.delta)) + 1
    d = sample_torque(realize_wave(CFG.wave, seed), 50, N, DZ.delta)
    return OcpInstance(extended_state(p=P), 0.0, d, Weights.from_w2(0.5), P, DZ.delta, DZ.kappa,
                       CFG.solver.energy_scale, CFG.solver)


def test_ocp_sweep_front_shape():
    w2 = np.linspace(0.05, 0.95, 15)
    front = sweep_ocp(ocp_template(), w2, seed=1, horizon=30.0)
    assert [p.w2 for p in front] == list(w2)
    assert all(p.ok for p in front)
    assert len(monotonicity_violations(front)) <= 1
    again = sweep_ocp(ocp_template(), w2, seed=1, horizon=30.0)
    assert again == front


def test_mpc_fixed_weight_extremes(tmp_path):
    mcfg = MpcConfig.from_config(CFG, horizon=20.0, duration=60.0)
    wave = realize_wave(CFG.wave, 2)
    points, logs = sweep_mpc_fixed_weights(CFG, mcfg, wave, [0.01, 0.5, 0.99], seed=2)
    J1 = {p.w2: p.costs.J1 for p in points}
    J2 = {p.w2: p.costs.J2 for p in points}
    assert min(J2, key=J2.get) == 0.99
    assert J1[0.01] <= min(J1.values()) + 1e-6 * abs(J1[0.01])
    assert set(logs) == {0.01, 0.5, 0.99}
    assert len({lg.wave_digest for lg in logs.values()}) == 1

    path = tmp_path / "front.csv"
    write_front_csv(path, points, extra={"config_hash": "abc"})
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == FRONT_COLUMNS + ["config_hash"]
    assert [float(r["J2"]) for r in rows] == [p.costs.J2 for p in points]
    assert all(r["seed"] == "2" and r["config_hash"] == "abc" for r in rows)
