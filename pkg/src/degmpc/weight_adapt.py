"""Damage-budget weight controller for the receding-horizon loop.

Every evaluation period the average damage rate over the trailing window is
extrapolated linearly to the target time. If the prediction exceeds the budget
the controller moves one step toward heavier damage weighting; if it is well
below the budget it moves one step the other way, but only every
``decrease_every`` evaluations. Index 1 carries the largest ``w2``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import WeightControlConfig
from .objectives import Weights
from .plant import UPS2


class WindowNotFullError(ValueError):
    """The history does not yet span a full evaluation window."""


@dataclass(frozen=True)
class WeightSchedule:
    w2: tuple  # w2[i - 1] belongs to index i; strictly decreasing

    def __post_init__(self):
        w2 = tuple(float(v) for v in self.w2)
        object.__setattr__(self, "w2", w2)
        if len(w2) < 2:
            raise ValueError("a schedule needs at least two weights")
        if any(not 0.0 <= v <= 1.0 for v in w2):
            raise ValueError("w2 values must lie in [0, 1]")
        if any(b >= a for a, b in zip(w2, w2[1:])):
            raise ValueError("w2 must be strictly decreasing in the index")

    @property
    def n_w(self) -> int:
        return len(self.w2)

    def weights(self, index: int) -> Weights:
        if not 1 <= index <= self.n_w:
            raise IndexError(f"weight index {index} outside [1, {self.n_w}]")
        return Weights.from_w2(self.w2[index - 1])


def build_default_schedule(n_w: int = 15, w2_min: float = 0.05, w2_max: float = 0.95) -> WeightSchedule:
    return WeightSchedule(tuple(np.linspace(w2_max, w2_min, n_w)))


@dataclass(frozen=True)
class WeightControllerState:
    i_w: int
    J_d: float
    t_bd: float
    c_d: float
    n_w: int
    decrease_every: int = 2
    since_increase: int = 0  # evaluations since the last index increase

    def __post_init__(self):
        if not 1 <= self.i_w <= self.n_w:
            raise ValueError(f"i_w = {self.i_w} outside [1, {self.n_w}]")
        if not 0.0 <= self.c_d <= 1.0:
            raise ValueError("c_d must lie in [0, 1]")


def estimate_damage_rate(t, ups2, window: float) -> float:
    """Endpoint-difference damage rate over the trailing ``window`` seconds.

    ``t`` and ``ups2`` are matching increasing-time histories; the value at
    ``t[-1] - window`` must be present (up to rounding of the time grid).
    """
    t = np.asarray(t, dtype=float)
    ups2 = np.asarray(ups2, dtype=float)
    if len(t) == 0 or t[-1] - t[0] < window * (1 - 1e-9):
        raise WindowNotFullError(f"history spans less than {window} s")
    j = int(np.argmin(np.abs(t - (t[-1] - window))))
    span = t[-1] - t[j]
    return float((ups2[-1] - ups2[j]) / span)


def predict_damage(ups2_now: float, rate: float, t: float, t_bd: float) -> float:
    return ups2_now + rate * (t_bd - t)


def update_weights(state: WeightControllerState, t: float, ups2_now: float, rate: float):
    """One evaluation of the budget rule; returns ``(new_state, J_pred)``."""
    J_pred = predict_damage(ups2_now, rate, t, state.t_bd)
    since = state.since_increase + 1
    i_w = state.i_w
    if J_pred > state.J_d:
        i_w = max(1, i_w - 1)
    elif J_pred < state.c_d * state.J_d and since >= state.decrease_every:
        if i_w < state.n_w:
            i_w += 1
            since = 0
    return replace(state, i_w=i_w, since_increase=since), J_pred


class WeightController:
    """Stateful wrapper used by ``mpc.run_mpc``.

    ``observe`` runs after every applied segment. It evaluates the rule each
    time another full ``window`` of closed-loop history has accumulated, and
    skips windows in which the input stayed at zero.
    """

    def __init__(self, schedule: WeightSchedule, state: WeightControllerState, window: float, delta: float):
        if state.n_w != schedule.n_w:
            raise ValueError("schedule and state disagree on n_w")
        self.schedule = schedule
        self.state = state
        self.window = window
        self.delta = delta
        self.window_steps = int(round(window / delta))
        if self.window_steps < 1:
            raise ValueError("window shorter than one step")
        self._next_eval = self.window_steps
        self.events: list[dict] = []

    @classmethod
    def from_config(cls, wc: WeightControlConfig, delta: float, J_d: float | None = None,
                    t_bd: float | None = None):
        sched = build_default_schedule(wc.n_w, wc.w2_min, wc.w2_max)
        state = WeightControllerState(
            i_w=wc.initial_index, J_d=wc.J_d if J_d is None else J_d,
            t_bd=wc.t_bd if t_bd is None else t_bd, c_d=wc.c_d,
            n_w=wc.n_w, decrease_every=wc.decrease_every,
        )
        return cls(sched, state, wc.window, delta)

    def current(self) -> tuple[Weights, int]:
        return self.schedule.weights(self.state.i_w), self.state.i_w

    def observe(self, t: float, k: int, states: np.ndarray, u: np.ndarray) -> dict:
        if k < self._next_eval:
            return {}
        self._next_eval = k + self.window_steps
        lo = k - self.window_steps
        u_win = u[lo : k + 1]
        ups2 = states[lo : k + 1, UPS2]
        rate = (ups2[-1] - ups2[0]) / (self.window_steps * self.delta)
        event = {"t": t, "k": k, "i_w_before": self.state.i_w, "J_rate": float(rate)}
        if not np.any(u_win != 0.0):
            event.update(skipped=True, J_pred=np.nan, i_w_after=self.state.i_w)
            self.events.append(event)
            return {"J_rate": float(rate), "J_pred": np.nan}
        self.state, J_pred = update_weights(self.state, t, float(ups2[-1]), float(rate))
        event.update(skipped=False, J_pred=float(J_pred), i_w_after=self.state.i_w)
        self.events.append(event)
        return {"J_rate": float(rate), "J_pred": float(J_pred)}


def replay(state: WeightControllerState, t, ups2, u, window: float, delta: float) -> list[int]:
    """Index sequence produced by re-running the rule over a recorded history.

    ``t``, ``ups2`` and ``u`` are per-step closed-loop records starting at ``t = 0``.
    """
    n = int(round(window / delta))
    seq = []
    for k in range(n, len(t), n):
        if not np.any(np.asarray(u[k - n : k + 1]) != 0.0):
            seq.append(state.i_w)
            continue
        rate = (ups2[k] - ups2[k - n]) / (n * delta)
        state, _ = update_weights(state, float(t[k]), float(ups2[k]), float(rate))
        seq.append(state.i_w)
    return seq
