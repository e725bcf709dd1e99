import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import base_dict
from degmpc.config import (
    ENV_VAR,
    ConfigError,
    ConsistencyWarning,
    config_from_dict,
    default_config_path,
    load_config,
    validate_radiation_consistency,
)


def scalar_radiation(A, B, C, Q, S):
    d = base_dict()
    d["radiation"] = {"A_r": [[A]], "B_r": [[B]], "C_r": [[C]], "Q_r": [[Q]], "S_r": [[S]]}
    return d


def test_default_loads_with_derived_bounds(cfg):
    p = cfg.plant
    assert p.u_max == pytest.approx((p.E_bd * p.h_l) ** 2, rel=1e-15)
    assert p.u_th == pytest.approx((p.E_th * p.h_l) ** 2, rel=1e-15)
    assert p.u_th < p.u_max


def test_default_radiation_residuals_tiny(cfg):
    r_lyap, r_out, ok = validate_radiation_consistency(cfg.plant)
    assert ok
    assert r_lyap < 1e-10 and r_out < 1e-10


def test_default_radiation_built_from_storage_relations(cfg):
    p = cfg.plant
    S = -0.5 * (p.A_r.T @ p.Q_r + p.Q_r @ p.A_r)
    np.testing.assert_array_equal(S, p.S_r)
    np.testing.assert_array_equal((p.Q_r @ p.B_r).T, p.C_r)


def test_threshold_above_breakdown_rejected():
    d = base_dict()
    d["plant"]["E_th"] = 2e8
    with pytest.raises(ConfigError, match="threshold exceeds breakdown"):
        config_from_dict(d)


def test_unstable_radiation_rejected():
    # characteristic polynomial s^2 - 0.1 s: roots 0 and 0.1 -> eigenvalue at +0.1
    A = [[0.1, 0.0], [1.0, 0.0]]
    coeffs = np.poly(np.array(A))
    roots = np.roots(coeffs)
    assert max(roots.real) == pytest.approx(0.1)
    d = base_dict()
    d["radiation"]["A_r"] = A
    with pytest.raises(ConfigError, match="not Hurwitz"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConsistencyWarning)
            config_from_dict(d)


def test_scalar_consistency_exact():
    cfg = config_from_dict(scalar_radiation(-1.0, 1.0, 1.0, 1.0, 1.0))
    r_lyap, r_out, ok = validate_radiation_consistency(cfg.plant)
    assert (r_lyap, r_out, ok) == (0.0, 0.0, True)


def test_scalar_consistency_violation_warns_and_reports():
    with pytest.warns(ConsistencyWarning):
        cfg = config_from_dict(scalar_radiation(-1.0, 1.0, 1.0, 1.0, 2.0))
    r_lyap, r_out, ok = validate_radiation_consistency(cfg.plant)
    assert r_lyap == pytest.approx(2.0)
    assert r_out == 0.0
    assert not ok


def test_dimension_mismatch():
    d = base_dict()
    d["radiation"]["C_r"] = [[1.0, 2.0, 3.0]]
    with pytest.raises(ConfigError, match="dimension"):
        config_from_dict(d)


def test_missing_section_and_unknown_field():
    d = base_dict()
    del d["plant"]
    with pytest.raises(ConfigError, match="plant"):
        config_from_dict(d)
    d = base_dict()
    d["solver"] = {"bogus": 1}
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict(d)


def test_parse_error(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[plant\nI_h = ")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(p)


def test_load_deterministic_and_hash_stable():
    a, b = load_config(), load_config()
    assert a.hash() == b.hash()
    assert a.replace(solver__max_iter=7).hash() != a.hash()


def test_env_override_and_flag_precedence(tmp_path, monkeypatch):
    text = default_config_path().read_text().replace("max_iter = 500", "max_iter = 123")
    alt = tmp_path / "alt.toml"
    alt.write_text(text)
    monkeypatch.setenv(ENV_VAR, str(alt))
    assert load_config().solver.max_iter == 123
    assert load_config(default_config_path()).solver.max_iter == 500


def test_gamma_csv(tmp_path):
    (tmp_path / "g.csv").write_text("omega,gamma\n0.0,5e4\n10.0,6e4\n")
    d = base_dict()
    d["wave"] = {"gamma_csv": "g.csv"}
    cfg = config_from_dict(d, base_dir=tmp_path)
    np.testing.assert_allclose(cfg.wave.gamma_table, [[0.0, 5e4], [10.0, 6e4]])


def test_kappa_from_knee(cfg):
    assert cfg.discretization.kappa == pytest.approx(1.0 / (0.01 * cfg.plant.u_max))


POSITIVE = ["I_h", "K_h", "C_0", "R_0", "h_l"]


@settings(max_examples=60, deadline=None)
@given(field=st.sampled_from(POSITIVE + ["B_h"]), value=st.floats(-2.0, 2.0))
def test_fuzz_sign_invariants(field, value):
    d = base_dict()
    d["plant"][field] = value
    must_pass = value > 0 or (field == "B_h" and value >= 0)
    if must_pass:
        config_from_dict(d)
    else:
        with pytest.raises(ConfigError):
            config_from_dict(d)


@settings(max_examples=60, deadline=None)
@given(ratio=st.floats(0.0, 2.0))
def test_fuzz_threshold(ratio):
    d = base_dict()
    d["plant"]["E_th"] = ratio * d["plant"]["E_bd"]
    if ratio <= 1.0:
        config_from_dict(d)
    else:
        with pytest.raises(ConfigError, match="threshold"):
            config_from_dict(d)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-3.0, 3.0).filter(lambda v: abs(v) > 1e-6))
def test_fuzz_hurwitz_scalar(a):
    # scalar model built to satisfy the storage relations whenever a < 0
    q = 1.0
    d = scalar_radiation(a, 1.0, q, q, -a * q)
    if a < 0:
        config_from_dict(d)
    else:
        with pytest.raises(ConfigError):
            config_from_dict(d)


def test_discretization_invariants():
    for bad in ({"delta": 0.0}, {"N": 1}, {"r": 0}, {"N": 11, "r": 11}, {"kappa": -1.0}):
        d = base_dict()
        d["discretization"] = bad
        with pytest.raises(ConfigError):
            config_from_dict(d)


def test_config_is_immutable(cfg):
    with pytest.raises(Exception):
        cfg.plant.I_h = 1.0
    with pytest.raises(ValueError):
        cfg.plant.A_r[0, 0] = 1.0
