import csv

import numpy as np
import pytest

from degmpc.config import load_config
from degmpc.experiments import (
    comparison_weights,
    fixed_vs_adaptive,
    horizon_sweep,
    weight_control_study,
    write_rows,
)

CFG = load_config()
# a pocket-sized weight study: 3 weights, 100 s target time in quick mode
SMALL = CFG.replace(experiment__seeds=(1, 2), experiment__horizon=20.0, weight_control__n_w=3,
                    weight_control__initial_index=2, weight_control__t_bd=1000.0)


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_write_rows_round_trip(tmp_path):
    p = write_rows(tmp_path / "a" / "x.csv", ["a", "b"], [{"a": 0.1, "b": "s"}, {"a": 1 / 3}])
    rows = read(p)
    assert float(rows[1]["a"]) == 1 / 3
    assert rows[1]["b"] == ""


def test_degenerate_horizon_sweep_has_zero_deviation():
    cfg = CFG.replace(experiment__ground_truth=40.0, experiment__horizons=(40.0,), discretization__r=400,
                      mpc__tol_stat=CFG.solver.tol_stat)
    res = horizon_sweep(cfg, seeds=[1])
    row = res.rows[0]
    assert row["MAE"] == 0.0 and row["RMSE"] == 0.0
    assert row["energy_ratio"] == 1.0


def test_horizon_sweep_quick(tmp_path):
    cfg = CFG.replace(experiment__horizons=(10.0, 20.0), experiment__horizon=20.0)
    res = horizon_sweep(cfg, seeds=[1], out=tmp_path, quick=True)
    rows = read(tmp_path / "summary.csv")
    assert [float(r["horizon"]) for r in rows] == [10.0, 20.0]
    assert all(r["config_hash"] == cfg.hash() and r["seed"] == "1" for r in rows)
    for name in ("ground_truth_seed1.csv", "mpc_seed1_h10.csv", "mpc_seed1_h20.csv"):
        body = read(tmp_path / name)
        assert body and all(r["seed"] == "1" and r["config_hash"] == cfg.hash() for r in body)
    assert res.rows[1]["MAE"] < res.rows[0]["MAE"]
    again = tmp_path / "again"
    horizon_sweep(cfg, seeds=[1], out=again, quick=True)
    assert (again / "summary.csv").read_bytes() == (tmp_path / "summary.csv").read_bytes()


@pytest.fixture(scope="module")
def small_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("wc") / "not_yet_created"
    return out, weight_control_study(SMALL, out=out, quick=True)


def test_weight_control_quick(small_study):
    out, res = small_study
    rows = read(out / "summary.csv")
    assert [(r["seed"], float(r["budget_fraction"])) for r in rows] == [("1", 0.3), ("1", 0.5), ("2", 0.3), ("2", 0.5)]
    assert res.J_ref == pytest.approx(np.mean([lg.costs.J2 for lg in res.pilot_logs.values()]))
    for r in rows:
        assert float(r["J_d"]) == pytest.approx(float(r["budget_fraction"]) * res.J_ref)
        assert 1 <= int(r["final_index"]) <= 3
        assert r["config_hash"] == SMALL.hash()
    for (seed, b), ctrl in res.controllers.items():
        lg = res.logs[(seed, b)]
        assert all(abs(e["i_w_after"] - e["i_w_before"]) <= 1 for e in ctrl.events)
        assert set(np.unique(lg.i_w[:-1])) <= {1, 2, 3}
    assert len(read(out / "pilot.csv")) == 2
    assert (out / "weight_control_seed2_b0.5.csv").exists()


def test_fixed_vs_adaptive_quick(small_study, tmp_path):
    _, wc = small_study
    res = fixed_vs_adaptive(SMALL, seed=1, out=tmp_path, quick=True, budget=0.5, J_ref=wc.J_ref,
                            adaptive_log=wc.logs[(1, 0.5)], fixed_logs={0.5: wc.pilot_logs[1]})
    assert [p.w2 for p in res.fixed] == comparison_weights(SMALL) == [0.01, 0.05, 0.5, 0.95, 0.99]
    assert len({lg.wave_digest for lg in res.logs.values()}) == 1
    rows = read(tmp_path / "summary.csv")
    assert len(rows) == 6 and rows[-1]["run"] == "adaptive"
    assert len({r["wave_digest"] for r in rows}) == 1
    admissible = [p.costs.energy for p in res.fixed if p.costs.J2 <= res.J_d]
    assert res.best_admissible_energy() == (max(admissible) if admissible else pytest.approx(np.nan, nan_ok=True))
    J2 = {p.w2: p.costs.J2 for p in res.fixed}
    assert J2[0.99] == min(J2.values())
