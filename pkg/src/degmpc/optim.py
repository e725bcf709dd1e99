"""Projected limited-memory quasi-Newton minimizer for box constraints.

Two-metric projection: coordinates judged active (at a bound with the gradient
pushing outward) take a scaled gradient step, the free coordinates take an
L-BFGS step, and the trial point is projected back onto the box. Armijo
backtracking runs along the projection arc. Pinned coordinates are boxes of
zero width and never move.

Two options exist mainly for checking the method. With ``curvature > 0`` an
accepted step whose end slope is still steep gets one secant refinement, which
makes every line search exact on a quadratic. With ``scale_initial=False`` the
initial inverse Hessian stays the identity. Together they make the iteration
match conjugate gradients on convex quadratics. Both cost more evaluations on
the control problems than they save, so the defaults leave them off.

The iteration is written once in numba-compatible numpy and calls its objective
through a module-level name. :func:`compiled_driver` binds that name to a numba
objective ``(x, args) -> (f, g)`` and compiles a cached copy; any other callable
runs the same code as plain Python. Binding by name rather than passing the
objective as an argument keeps the compiled copy cacheable on disk.
"""
from __future__ import annotations

import types
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from numba import njit

CONVERGED = "converged"
MAX_ITER = "max-iter"
DIVERGED = "diverged"
LINESEARCH = "line-search-failed"
_STATUS = (CONVERGED, MAX_ITER, DIVERGED, LINESEARCH)

# rebound per specialization by ``_specialize``
_objective = None


@dataclass
class BoxProblem:
    fun: Callable  # x -> (f, grad); ignored when ``kernel`` is given
    lower: np.ndarray
    upper: np.ndarray
    pinned: dict = field(default_factory=dict)  # index -> fixed value
    args: Any = ()
    tol: float = 1e-6
    max_iter: int = 500
    memory: int = 10
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    curvature: float = 0.0  # secant refinement when |slope| at the step exceeds this fraction; 0 disables
    scale_initial: bool = True  # rescale the initial inverse Hessian by the newest curvature pair
    kernel: Callable | None = None  # from ``compiled_driver``; consumes ``args``

    def __post_init__(self):
        self.lower = np.array(self.lower, dtype=float)
        self.upper = np.array(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("bound shapes differ")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        for i, v in self.pinned.items():
            if not self.lower[i] <= v <= self.upper[i]:
                raise ValueError(f"pinned value {v} at index {i} outside its bounds")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def effective_bounds(self):
        lo, hi = self.lower.copy(), self.upper.copy()
        for i, v in self.pinned.items():
            lo[i] = hi[i] = v
        return lo, hi


@dataclass
class MinimizeResult:
    x: np.ndarray
    f: float
    grad: np.ndarray
    iterations: int
    pg_norm: float
    status: str
    n_evals: int
    history: np.ndarray  # objective at every accepted iterate

    @property
    def ok(self) -> bool:
        return self.status == CONVERGED


@njit(cache=True)
def projected_gradient(x, g, lower, upper):
    return x - np.minimum(np.maximum(x - g, lower), upper)


@njit(cache=True)
def _two_loop(q, S, Y, rho, head, count, gamma):
    m = S.shape[0]
    alph = np.empty(count)
    r = q.copy()
    for t in range(count):
        j = (head - 1 - t) % m
        alph[t] = rho[j] * np.dot(S[j], r)
        r -= alph[t] * Y[j]
    r *= gamma
    for t in range(count - 1, -1, -1):
        j = (head - 1 - t) % m
        b = rho[j] * np.dot(Y[j], r)
        r += (alph[t] - b) * S[j]
    return r


def _pqn(args, x0, lo, hi, tol, max_iter, memory, armijo, backtrack, max_backtracks, curvature, scale_initial):
    n = x0.shape[0]
    free = lo < hi
    width = 1.0
    for i in range(n):
        if hi[i] - lo[i] > width:
            width = hi[i] - lo[i]
    history = np.empty(max_iter + 1)
    x = np.minimum(np.maximum(x0, lo), hi)
    f, g = _objective(x, args)
    n_evals = 1
    history[0] = f
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        return x, f, g, 0, np.inf, 2, n_evals, history[:1]

    S = np.zeros((memory, n))
    Y = np.zeros((memory, n))
    rho = np.zeros(memory)
    head = 0
    count = 0
    status = 1
    pg_norm = np.max(np.abs(projected_gradient(x, g, lo, hi))) if n > 0 else 0.0
    it = 0
    while True:
        if pg_norm <= tol:
            status = 0
            break
        if it >= max_iter:
            status = 1
            break
        gamma = 1.0
        if count > 0 and scale_initial:
            j = (head - 1) % memory
            gamma = np.dot(S[j], Y[j]) / np.dot(Y[j], Y[j])
        eps = min(pg_norm, 1e-3 * width)
        active = (~free) | ((x <= lo + eps) & (g > 0)) | ((x >= hi - eps) & (g < 0))
        g_free = np.where(active, 0.0, g)
        if count > 0:
            d = -_two_loop(g_free, S, Y, rho, head, count, gamma)
        else:
            d = -g_free
        d = np.where(active, -gamma * g, d)
        d = np.where(free, d, 0.0)
        if np.dot(g_free, np.where(active, 0.0, d)) >= 0.0:
            d = np.where(free, -gamma * g, 0.0)
        step = 1.0
        if count == 0:
            dmax = np.max(np.abs(d))
            if dmax > 0 and width / dmax < 1.0:
                step = width / dmax

        accepted = False
        fallback = False
        xt = x
        ft = f
        gt = g
        k = 0
        while k < max_backtracks:
            xt = np.minimum(np.maximum(x + step * d, lo), hi)
            gs = np.dot(g, xt - x)
            if gs >= 0.0:
                if fallback:
                    break
                # projection destroyed descent: restart on the projected-gradient arc
                d = np.where(free, -gamma * g, 0.0)
                fallback = True
                continue
            ft, gt = _objective(xt, args)
            n_evals += 1
            if np.isfinite(ft) and np.all(np.isfinite(gt)) and ft <= f + armijo * gs:
                accepted = True
                break
            step *= backtrack
            k += 1
        if not accepted:
            status = 3
            break
        s = xt - x
        gs0 = np.dot(g, s)
        gs1 = np.dot(gt, s)
        if curvature > 0.0 and abs(gs1) > curvature * abs(gs0) and gs1 > gs0:
            # secant minimizer along the accepted segment; exact for quadratics
            tau = min(gs0 / (gs0 - gs1), 4.0)
            xr = np.minimum(np.maximum(x + tau * s, lo), hi)
            fr, gr = _objective(xr, args)
            n_evals += 1
            if np.isfinite(fr) and np.all(np.isfinite(gr)) and fr < ft:
                xt = xr
                ft = fr
                gt = gr
                s = xt - x
        y = gt - g
        sy = np.dot(s, y)
        if sy > 1e-12 * np.dot(y, y) and sy > 0.0:
            S[head] = s
            Y[head] = y
            rho[head] = 1.0 / sy
            head = (head + 1) % memory
            if count < memory:
                count += 1
        x = xt
        f = ft
        g = gt
        it += 1
        history[it] = f
        pg_norm = np.max(np.abs(projected_gradient(x, g, lo, hi)))
    return x, f, g, it, pg_norm, status, n_evals, history[: it + 1]


def _specialize(objective, name: str):
    # copy of the iteration whose ``_objective`` global is the given callable
    fn = types.FunctionType(_pqn.__code__, dict(globals(), _objective=objective), f"_pqn_{name}")
    fn.__qualname__ = fn.__name__
    fn.__module__ = __name__
    return fn


def compiled_driver(objective, name: str):
    """Cached compiled minimizer specialized to one numba objective ``(x, args) -> (f, g)``.

    ``name`` must be unique per objective; it keys the on-disk cache. Pass the
    result as ``BoxProblem(kernel=...)``.
    """
    return njit(cache=True)(_specialize(objective, name))


def minimize(problem: BoxProblem, x0) -> MinimizeResult:
    """Minimize ``problem.fun`` over its box starting from ``x0`` (projected first).

    Returns the best accepted iterate. ``status`` is one of ``converged``,
    ``max-iter``, ``diverged`` (non-finite objective at the start) or
    ``line-search-failed`` (no acceptable step along the arc; usually at the
    limit of floating-point resolution).
    """
    lo, hi = problem.effective_bounds()
    x0 = np.array(x0, dtype=float)
    if x0.shape != lo.shape:
        raise ValueError(f"start point has shape {x0.shape}, expected {lo.shape}")
    opts = (float(problem.tol), int(problem.max_iter), int(problem.memory), float(problem.armijo),
            float(problem.backtrack), int(problem.max_backtracks), float(problem.curvature),
            bool(problem.scale_initial))
    if problem.kernel is not None:
        out = problem.kernel(problem.args, x0, lo, hi, *opts)
    else:
        user = problem.fun
        out = _specialize(lambda x, _args: _as_pair(user(x)), "py")(None, x0, lo, hi, *opts)
    x, f, g, it, pgn, status, nev, hist = out
    return MinimizeResult(x, float(f), g, int(it), float(pgn), _STATUS[status], int(nev), np.array(hist))


def _as_pair(fg):
    f, g = fg
    return float(f), np.asarray(g, dtype=float)
