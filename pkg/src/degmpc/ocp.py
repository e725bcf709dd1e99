"""Single-shooting transcription of the scalarized finite-horizon problem.

Decision variables are the input samples ``u[0..N-1]`` (``u[0]`` pinned for input
continuity); states are eliminated by forward RK4/FOH simulation and the
gradient comes from the exact reverse sweep through the same steps. The solver
works on ``u / u_max`` so tolerances are scale-free.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernels
from .config import PlantParams, SolverConfig
from .objectives import CostPair, Weights
from .optim import CONVERGED, BoxProblem, compiled_driver, minimize
from .plant import UPS1, UPS2, kernel_params


class NonFiniteStateError(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


@dataclass
class OcpInstance:
    xi0: np.ndarray
    u0: float
    d: np.ndarray
    weights: Weights
    plant: PlantParams
    delta: float
    kappa: float
    energy_scale: float = 1e4
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        self.xi0 = np.array(self.xi0, dtype=float)
        self.xi0[UPS1] = 0.0
        self.xi0[UPS2] = 0.0
        self.d = np.ascontiguousarray(self.d, dtype=float)
        if self.d.ndim != 1 or len(self.d) < 2:
            raise ValueError("excitation preview must be a 1-D sequence of length >= 2")
        if not np.all(np.isfinite(self.d)):
            raise ValueError("excitation preview contains non-finite values")
        if not 0.0 <= self.u0 <= self.plant.u_max:
            raise ValueError(f"u0 = {self.u0} outside [0, u_max]")
        self._prm = kernel_params(self.plant, self.kappa)

    @property
    def N(self) -> int:
        return len(self.d)

    @property
    def u_max(self) -> float:
        return self.plant.u_max

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.xi0, self.d, np.array([self.u0, self.weights.w1, self.weights.w2, self.delta, self.kappa])):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:12]


@dataclass
class SolveResult:
    u: np.ndarray
    cost: float
    costs: CostPair  # exact damage
    smooth_costs: CostPair
    iterations: int
    stationarity: float
    status: str
    n_evals: int
    history: list

    @property
    def ok(self) -> bool:
        return self.status == CONVERGED


def _evaluate(inst: OcpInstance, u: np.ndarray, smooth: bool = True):
    w = inst.weights
    cost, grad, J1, J2, bad = _kernels.cost_grad(
        inst.xi0, np.ascontiguousarray(u, dtype=float), inst.d, float(inst.delta), inst._prm,
        w.w1 / inst.energy_scale, w.w2, smooth,
    )
    if bad >= 0:
        raise NonFiniteStateError(bad)
    return cost, grad, J1, J2


def objective_and_gradient(inst: OcpInstance, u) -> tuple[float, np.ndarray]:
    """Scalarized cost (smoothed damage) and its gradient with respect to ``u`` [1/V^2].

    ``u[0]`` should equal the pinned ``inst.u0``; its gradient entry is still reported.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (inst.N,):
        raise ValueError(f"expected {inst.N} inputs, got {u.shape}")
    cost, grad, _, _ = _evaluate(inst, u)
    return cost, grad


def costs_of(inst: OcpInstance, u, smooth: bool = False) -> CostPair:
    _, _, J1, J2 = _evaluate(inst, u, smooth=smooth)
    return CostPair(float(J1), float(J2))


@njit(cache=True)
def _normalized_objective(v, args):
    # non-finite states come back as NaN, which the line search rejects
    xi0, d, h, prm, c1, c2, umax = args
    cost, grad, _, _, _ = _kernels.cost_grad(xi0, v * umax, d, h, prm, c1, c2, True)
    return cost, grad * umax


_solve_kernel = compiled_driver(_normalized_objective, "ocp")


def solve(inst: OcpInstance, warm_start=None) -> SolveResult:
    """Minimize the scalarized cost over ``0 <= u <= u_max`` with ``u[0] = u0``."""
    umax = inst.u_max
    N = inst.N
    w = inst.weights
    args = (inst.xi0, inst.d, float(inst.delta), inst._prm,
            float(w.w1 / inst.energy_scale), float(w.w2), float(umax))
    sc = inst.solver
    problem = BoxProblem(
        _normalized_objective, np.zeros(N), np.ones(N), pinned={0: inst.u0 / umax}, args=args,
        kernel=_solve_kernel,
        tol=sc.tol_stat, max_iter=sc.max_iter, memory=sc.memory,
        armijo=sc.armijo, backtrack=sc.backtrack, curvature=sc.curvature,
    )
    if warm_start is None:
        v0 = np.zeros(N)
    else:
        v0 = np.asarray(warm_start, dtype=float) / umax
        if v0.shape != (N,):
            raise ValueError(f"warm start must have length {N}")
    res = minimize(problem, v0)
    if not np.isfinite(res.f):
        raise NonFiniteStateError(-1)
    u = np.clip(res.x * umax, 0.0, umax)
    u[0] = inst.u0
    _, _, J1s, J2s = _evaluate(inst, u, smooth=True)
    _, _, J1, J2 = _evaluate(inst, u, smooth=False)
    return SolveResult(
        u=u, cost=res.f, costs=CostPair(float(J1), float(J2)), smooth_costs=CostPair(float(J1s), float(J2s)),
        iterations=res.iterations, stationarity=res.pg_norm, status=res.status,
        n_evals=res.n_evals, history=res.history,
    )
