"""Configuration loading and validation.

All physical, numerical and experiment parameters live in one TOML file with the
sections ``[plant]``, ``[radiation]``, ``[wave]``, ``[discretization]``,
``[solver]``, ``[mpc]``, ``[weight_control]`` and ``[experiment]``. The shipped
default lives in ``degmpc/data/default.toml``.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

ENV_VAR = "DEGMPC_CONFIG"
CONSISTENCY_TOL = 1e-8


class ConfigError(ValueError):
    """Raised when a configuration violates one of its invariants."""


class ConsistencyWarning(UserWarning):
    pass


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PlantParams:
    I_h: float
    K_h: float
    B_h: float
    C_0: float
    R_0: float
    h_l: float
    E_bd: float
    E_th: float
    alpha: float
    A_r: np.ndarray
    B_r: np.ndarray
    C_r: np.ndarray
    Q_r: np.ndarray
    S_r: np.ndarray
    theta_valid: float = 0.3
    consistency_tol: float = CONSISTENCY_TOL

    @property
    def n(self) -> int:
        return self.A_r.shape[0]

    @property
    def u_max(self) -> float:
        return (self.E_bd * self.h_l) ** 2

    @property
    def u_th(self) -> float:
        return (self.E_th * self.h_l) ** 2

    @property
    def state_dim(self) -> int:
        """Length of the extended state (theta, delta, z, Upsilon1, Upsilon2)."""
        return self.n + 4


@dataclass(frozen=True)
class DiscretizationConfig:
    delta: float = 0.1
    N: int = 601
    r: int = 10
    kappa: float = 1e-6

    @property
    def horizon(self) -> float:
        return (self.N - 1) * self.delta

    @property
    def t_s(self) -> float:
        return self.r * self.delta

    def steps(self, seconds: float) -> int:
        """Number of RK4 steps covering ``seconds``."""
        return int(round(seconds / self.delta))


@dataclass(frozen=True)
class SolverConfig:
    tol_stat: float = 1e-6
    max_iter: int = 500
    memory: int = 10
    armijo: float = 1e-4
    backtrack: float = 0.5
    curvature: float = 0.0
    energy_scale: float = 1e4


@dataclass(frozen=True)
class WaveSpectrumConfig:
    A_B: float = 0.0032
    B_B: float = 0.1054
    n_f: int = 50
    omega_0: float = 0.0
    delta_omega: float = 0.0628
    gamma_table: np.ndarray = field(default_factory=lambda: _frozen([[0.0, 7e4], [1e3, 7e4]]))
    phase_drift_rate_bound: float = 0.01
    seed: int = 0

    @property
    def omegas(self) -> np.ndarray:
        return self.omega_0 + self.delta_omega * np.arange(1, self.n_f + 1)


@dataclass(frozen=True)
class MpcSettings:
    duration: float = 320.0
    u_init: float = 0.0
    warm_start: bool = True
    tol_stat: float = 1e-5


@dataclass(frozen=True)
class WeightControlConfig:
    n_w: int = 15
    w2_min: float = 0.05
    w2_max: float = 0.95
    initial_index: int = 8
    window: float = 25.0
    c_d: float = 0.8
    t_bd: float = 3000.0
    J_d: float = 0.5
    decrease_every: int = 2


@dataclass(frozen=True)
class ExperimentConfig:
    seeds: tuple = (1, 2, 3)
    horizons: tuple = (10.0, 12.0, 20.0, 30.0, 45.0, 60.0, 77.0)
    ground_truth: float = 320.0
    horizon: float = 60.0
    budgets: tuple = (0.3, 0.5)
    pilot_w2: float = 0.5
    extreme_weights: tuple = (0.01, 0.99)
    bang_bang_threshold: float = 0.9  # share of inputs within 5% of a bound expected at small w2
    log_every: int = 1
    output_dir: str = "results"


@dataclass(frozen=True)
class Config:
    plant: PlantParams
    wave: WaveSpectrumConfig
    discretization: DiscretizationConfig
    solver: SolverConfig
    mpc: MpcSettings
    weight_control: WeightControlConfig
    experiment: ExperimentConfig
    source: str = "<dict>"

    def replace(self, **sections: Any) -> "Config":
        """Return a copy with whole sections or ``section__field`` entries swapped.

        >>> cfg.replace(discretization__N=121, solver__max_iter=50)  # doctest: +SKIP
        """
        updates: dict[str, dict[str, Any]] = {}
        direct = {}
        for key, value in sections.items():
            if "__" in key:
                sec, name = key.split("__", 1)
                updates.setdefault(sec, {})[name] = value
            else:
                direct[key] = value
        for sec, fields in updates.items():
            direct[sec] = dataclasses.replace(direct.get(sec, getattr(self, sec)), **fields)
        new = dataclasses.replace(self, **direct)
        validate(new)
        return new

    def hash(self) -> str:
        return config_hash(self)


# ---------------------------------------------------------------------------
# validation


def validate_radiation_consistency(params: PlantParams, tol: float | None = None):
    """Residuals of the storage relations ``A^T Q + Q A = -2 S`` and ``Q B = C^T``.

    Returns ``(r_lyap, r_out, passed)`` with absolute Frobenius residuals. The
    check passes when each residual is within ``tol`` relative to ``|S|`` and
    ``|C|`` respectively (absolute when those norms vanish).
    """
    tol = params.consistency_tol if tol is None else tol
    A, B, C, Q, S = params.A_r, params.B_r, params.C_r, params.Q_r, params.S_r
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n) or S.shape != (n, n):
        raise ConfigError(f"radiation dimension mismatch: A_r {A.shape}, Q_r {Q.shape}, S_r {S.shape}")
    if B.shape != (n, 1) or C.shape != (1, n):
        raise ConfigError(f"radiation dimension mismatch: B_r {B.shape}, C_r {C.shape} for n={n}")
    r_lyap = float(np.linalg.norm(A.T @ Q + Q @ A + 2.0 * S))
    r_out = float(np.linalg.norm(Q @ B - C.T))
    s_norm = float(np.linalg.norm(S)) or 1.0
    c_norm = float(np.linalg.norm(C)) or 1.0
    ok = r_lyap <= tol * s_norm and r_out <= tol * c_norm
    return r_lyap, r_out, bool(ok)


def _is_psd(M: np.ndarray, rtol: float = 1e-10) -> bool:
    if not np.allclose(M, M.T, rtol=0.0, atol=rtol * max(np.abs(M).max(), 1.0)):
        return False
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    return bool(eig.min() >= -rtol * max(np.abs(eig).max(), 1.0))


def validate_plant(p: PlantParams) -> None:
    for name in ("I_h", "K_h", "C_0", "R_0", "h_l", "alpha"):
        v = getattr(p, name)
        if not (np.isfinite(v) and v > 0):
            raise ConfigError(f"plant.{name} must be > 0, got {v}")
    if not (np.isfinite(p.B_h) and p.B_h >= 0):
        raise ConfigError(f"plant.B_h must be >= 0, got {p.B_h}")
    if not (p.E_th >= 0):
        raise ConfigError(f"plant.E_th must be >= 0, got {p.E_th}")
    if p.E_th > p.E_bd:
        raise ConfigError(f"plant.E_th: threshold exceeds breakdown ({p.E_th} > {p.E_bd})")
    if p.n < 1:
        raise ConfigError("radiation order n must be a positive integer")
    for name in ("A_r", "B_r", "C_r", "Q_r", "S_r"):
        if not np.all(np.isfinite(getattr(p, name))):
            raise ConfigError(f"radiation.{name} has non-finite entries")
    # dimension check raises ConfigError itself
    r_lyap, r_out, ok = validate_radiation_consistency(p)
    eig = np.linalg.eigvals(p.A_r)
    if np.max(eig.real) >= 0:
        raise ConfigError(f"radiation.A_r: radiation matrix not Hurwitz (eigenvalues {eig})")
    if not _is_psd(p.Q_r):
        raise ConfigError("radiation.Q_r must be symmetric positive semidefinite")
    if not _is_psd(p.S_r):
        raise ConfigError("radiation.S_r must be symmetric positive semidefinite")
    if not ok:
        warnings.warn(
            f"radiation storage relations violated: |A^T Q + Q A + 2S| = {r_lyap:.3e}, "
            f"|Q B - C^T| = {r_out:.3e}; J1 no longer equals extracted energy",
            ConsistencyWarning,
            stacklevel=3,
        )
    if not p.theta_valid > 0:
        raise ConfigError("plant.theta_valid must be > 0")


def validate_wave(w: WaveSpectrumConfig) -> None:
    if not w.A_B > 0:
        raise ConfigError(f"wave.A_B must be > 0, got {w.A_B}")
    if not w.B_B > 0:
        raise ConfigError(f"wave.B_B must be > 0, got {w.B_B}")
    if int(w.n_f) != w.n_f or w.n_f < 1:
        raise ConfigError(f"wave.n_f must be an integer >= 1, got {w.n_f}")
    if not w.delta_omega > 0:
        raise ConfigError(f"wave.delta_omega must be > 0, got {w.delta_omega}")
    if not w.omega_0 >= 0:
        raise ConfigError(f"wave.omega_0 must be >= 0, got {w.omega_0}")
    if not w.phase_drift_rate_bound >= 0:
        raise ConfigError("wave.phase_drift_rate_bound must be >= 0")
    tab = w.gamma_table
    if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 1:
        raise ConfigError("wave.gamma_table must be a list of (omega, value) pairs")
    if tab.shape[0] > 1 and np.any(np.diff(tab[:, 0]) <= 0):
        raise ConfigError("wave.gamma_table frequencies must be strictly increasing")
    om = w.omegas
    if tab.shape[0] > 1 and (tab[0, 0] > om[0] or tab[-1, 0] < om[-1]):
        raise ConfigError(
            f"wave.gamma_table covers [{tab[0, 0]}, {tab[-1, 0]}] but harmonics span [{om[0]}, {om[-1]}]"
        )


def validate_discretization(d: DiscretizationConfig) -> None:
    if not d.delta > 0:
        raise ConfigError(f"discretization.delta must be > 0, got {d.delta}")
    if d.N < 2:
        raise ConfigError(f"discretization.N must be >= 2, got {d.N}")
    if not 1 <= d.r <= d.N - 1:
        raise ConfigError(f"discretization.r must lie in [1, N-1], got r={d.r}, N={d.N}")
    if not d.kappa > 0:
        raise ConfigError(f"discretization.kappa must be > 0, got {d.kappa}")


def validate(cfg: Config) -> None:
    validate_plant(cfg.plant)
    validate_wave(cfg.wave)
    validate_discretization(cfg.discretization)
    s = cfg.solver
    if not (s.tol_stat > 0 and s.max_iter >= 1 and s.memory >= 1 and s.energy_scale > 0):
        raise ConfigError("solver settings must be positive")
    if not (0 < s.armijo < 1 and 0 < s.backtrack < 1):
        raise ConfigError("solver.armijo and solver.backtrack must lie in (0, 1)")
    if not 0 <= s.curvature < 1:
        raise ConfigError("solver.curvature must lie in [0, 1)")
    if not 0 <= cfg.mpc.u_init <= cfg.plant.u_max:
        raise ConfigError("mpc.u_init must lie in [0, u_max]")
    if not cfg.mpc.tol_stat > 0:
        raise ConfigError("mpc.tol_stat must be positive")
    wc = cfg.weight_control
    if wc.n_w < 2:
        raise ConfigError("weight_control.n_w must be >= 2")
    if not 0 <= wc.w2_min < wc.w2_max <= 1:
        raise ConfigError("weight_control requires 0 <= w2_min < w2_max <= 1")
    if not 1 <= wc.initial_index <= wc.n_w:
        raise ConfigError("weight_control.initial_index must lie in [1, n_w]")
    if not 0 <= wc.c_d <= 1:
        raise ConfigError("weight_control.c_d must lie in [0, 1]")
    if not (wc.window > 0 and wc.t_bd > 0 and wc.J_d > 0 and wc.decrease_every >= 1):
        raise ConfigError("weight_control window, t_bd, J_d, decrease_every must be positive")
    ex = cfg.experiment
    if ex.horizons and ex.ground_truth < max(ex.horizons):
        raise ConfigError("experiment.ground_truth must be >= max(experiment.horizons)")
    if not 0 <= ex.bang_bang_threshold <= 1:
        raise ConfigError("experiment.bang_bang_threshold must lie in [0, 1]")


# ---------------------------------------------------------------------------
# loading


def _load_gamma_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                continue  # header line
    return np.array(rows, dtype=float)


def config_from_dict(data: dict, base_dir: Path | None = None, source: str = "<dict>") -> Config:
    """Build and validate a :class:`Config` from parsed TOML sections."""
    try:
        pl = dict(data["plant"])
        rad = dict(data["radiation"])
    except KeyError as exc:
        raise ConfigError(f"missing section [{exc.args[0]}]") from None
    mats = {}
    for name in ("A_r", "B_r", "C_r", "Q_r", "S_r"):
        if name not in rad:
            raise ConfigError(f"radiation.{name} missing")
        mats[name] = _frozen(np.atleast_2d(np.array(rad[name], dtype=float)))
    n = mats["A_r"].shape[0]
    # accept flat vectors for B_r / C_r
    if mats["B_r"].shape == (1, n) and n > 1:
        mats["B_r"] = _frozen(mats["B_r"], (n, 1))
    u_max = (pl["E_bd"] * pl["h_l"]) ** 2
    alpha = pl.get("alpha")
    if alpha is None:
        t_ref = pl.get("damage_reference_time", 100.0)
        # leave degenerate inputs to the validator, which names the field
        alpha = 1.0 / (u_max * t_ref) if u_max > 0 and t_ref > 0 else float("nan")
    try:
        plant = PlantParams(
            I_h=float(pl["I_h"]), K_h=float(pl["K_h"]), B_h=float(pl["B_h"]),
            C_0=float(pl["C_0"]), R_0=float(pl["R_0"]), h_l=float(pl["h_l"]),
            E_bd=float(pl["E_bd"]), E_th=float(pl["E_th"]), alpha=float(alpha),
            theta_valid=float(pl.get("theta_valid", 0.3)),
            consistency_tol=float(rad.get("consistency_tol", CONSISTENCY_TOL)),
            **mats,
        )
    except KeyError as exc:
        raise ConfigError(f"plant.{exc.args[0]} missing") from None

    wv = dict(data.get("wave", {}))
    if "gamma_csv" in wv:
        p = Path(wv.pop("gamma_csv"))
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        table = _load_gamma_csv(p)
    elif "gamma_table" in wv:
        table = np.array(wv.pop("gamma_table"), dtype=float)
    else:
        g = float(wv.pop("gamma", 7e4))
        table = np.array([[0.0, g], [1e3, g]])
    wv.pop("gamma", None)
    wave = WaveSpectrumConfig(gamma_table=_frozen(table), **wv)

    dz = dict(data.get("discretization", {}))
    knee = dz.pop("softplus_knee_fraction", 0.01)
    if "kappa" not in dz:
        dz["kappa"] = 1.0 / (knee * plant.u_max) if knee > 0 and plant.u_max > 0 else float("nan")
    disc = DiscretizationConfig(**dz)

    ex = dict(data.get("experiment", {}))
    for key in ("seeds", "horizons", "budgets", "extreme_weights"):
        if key in ex:
            ex[key] = tuple(ex[key])
    try:
        cfg = Config(
            plant=plant,
            wave=wave,
            discretization=disc,
            solver=SolverConfig(**data.get("solver", {})),
            mpc=MpcSettings(**data.get("mpc", {})),
            weight_control=WeightControlConfig(**data.get("weight_control", {})),
            experiment=ExperimentConfig(**ex),
            source=source,
        )
    except TypeError as exc:
        raise ConfigError(f"unknown configuration field: {exc}") from None
    validate(cfg)
    return cfg


def default_config_path() -> Path:
    return Path(str(resources.files("degmpc") / "data" / "default.toml"))


def load_config(path: str | os.PathLike | None = None) -> Config:
    """Load a configuration file.

    Resolution order: explicit ``path``, then ``$DEGMPC_CONFIG``, then the shipped
    default. Raises :class:`ConfigError` on parse or validation failure.
    """
    if path is None:
        path = os.environ.get(ENV_VAR) or default_config_path()
    path = Path(path)
    raw = path.read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(data, base_dir=path.parent, source=str(path))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.name != "source"}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def config_hash(cfg: Config) -> str:
    """Short stable hash of every configuration value (source path excluded)."""
    blob = json.dumps(_jsonable(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
