"""Fixed-step deterministic time integration with a scheduled event queue.

The integrator is classical fourth-order Runge-Kutta on a uniform grid
``t_k = k * dt`` (time is held as an integer step index so 240k-step runs
accumulate no floating-point drift). Events snap to the first grid point
at or after their timestamp and are applied before that step's derivative
evaluations. Runs are bit-reproducible: same scenario, same stream.

The hot path evaluates the plant as ``M @ x + b`` plus the scalar
constant-power-load term, where ``M``/``b`` are rebuilt only when an
event changes the topology. This is algebraically the same right-hand
side as :func:`dcres.plant.derivatives` (tested to agree to rounding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator

import numpy as np

from .errors import InvalidEvent, VoltageFloor
from .plant import PlantState, SystemParams, UnitKind, equilibrium_state


class EventKind(Enum):
    LOAD_STEP = "load_step"
    PULSE_START = "pulse_start"
    PULSE_END = "pulse_end"
    UNIT_TRIP = "unit_trip"
    UNIT_RESTORE = "unit_restore"


@dataclass(frozen=True)
class Event:
    """A timed disturbance: load step, pulse edge, or unit trip/restore."""

    at: float
    kind: EventKind
    power: float | None = None   # LOAD_STEP / PULSE_START
    unit: str | None = None      # UNIT_TRIP / UNIT_RESTORE


@dataclass(frozen=True)
class Sample:
    """One telemetry record on the uniform grid."""

    t: float
    v_t: float
    i: np.ndarray
    v_c: np.ndarray
    sigma: float
    p_cpl: float
    p_ppl: float


@dataclass
class RunTrace:
    """Dense arrays collected from a run (one row per grid point)."""

    t: np.ndarray
    v_t: np.ndarray
    i: np.ndarray          # shape (n_samples, n_units)
    v_c: np.ndarray        # shape (n_samples, n_sc)
    sigma: np.ndarray
    p_cpl: np.ndarray
    p_ppl: np.ndarray
    events_applied: int
    params0: SystemParams  # parameters before any event


def apply_event(params: SystemParams, state: PlantState,
                event: Event) -> tuple[SystemParams, PlantState]:
    """Apply one event, returning updated copies of params and state.

    Raises :class:`InvalidEvent` for unknown unit ids, tripping an
    offline unit, or restoring an online one.
    """
    if event.kind is EventKind.LOAD_STEP:
        if event.power is None or event.power < 0:
            raise InvalidEvent("load_step needs power >= 0")
        return replace(params, p_cpl=float(event.power)), state
    if event.kind is EventKind.PULSE_START:
        if event.power is None or event.power < 0:
            raise InvalidEvent("pulse_start needs power >= 0")
        return replace(params, p_ppl=float(event.power)), state
    if event.kind is EventKind.PULSE_END:
        return replace(params, p_ppl=0.0), state

    if event.unit is None:
        raise InvalidEvent(f"{event.kind.value} needs a unit id")
    try:
        j = params.unit_index(event.unit)
    except KeyError:
        raise InvalidEvent(f"unknown unit id '{event.unit}'") from None
    u = params.units[j]

    if event.kind is EventKind.UNIT_TRIP:
        if not u.online:
            raise InvalidEvent(f"unit '{u.id}' is already offline")
        online = False
    else:
        if u.online:
            raise InvalidEvent(f"unit '{u.id}' is already online")
        online = True

    units = list(params.units)
    units[j] = replace(u, online=online)
    new_state = state.copy()
    new_state.i[j] = 0.0  # branch (re)starts from zero current
    return replace(params, units=tuple(units)), new_state


class _Engine:
    """Vectorized RK4 stepper over the packed state [v_t, i, v_c, sigma]."""

    def __init__(self, params: SystemParams, state: PlantState):
        self.params = params
        self.n_units = len(params.units)
        self.n_sc = len(params.sc_units)
        self.dim = 2 + self.n_units + self.n_sc
        self.x = np.concatenate(([state.v_t], state.i, state.v_c, [state.sigma]))
        self._k1 = np.empty(self.dim)
        self._k2 = np.empty(self.dim)
        self._k3 = np.empty(self.dim)
        self._k4 = np.empty(self.dim)
        self._tmp = np.empty(self.dim)
        self._acc = np.empty(self.dim)
        self.rebuild(params)

    def rebuild(self, params: SystemParams) -> None:
        """Recompute the linear-part matrices after a topology/load change."""
        self.params = params
        n, m = self.n_units, self.n_sc
        sig = 1 + n + m
        M = np.zeros((self.dim, self.dim))
        b = np.zeros(self.dim)
        inv_ceq = 1.0 / params.c_eq
        sc_pos = 0
        for j, u in enumerate(params.units):
            r = 1 + j
            if u.kind is UnitKind.SC:
                vc_col = 1 + n + sc_pos
                M[vc_col, r] = 1.0 / u.C
                if u.online:
                    M[0, r] = inv_ceq
                    M[r, 0] = -1.0 / u.L
                    M[r, r] = -u.R / u.L
                    M[r, vc_col] = -1.0 / u.L
                sc_pos += 1
            elif u.online:
                M[0, r] = inv_ceq
                M[r, 0] = -(1.0 + params.k_p) / u.L
                M[r, r] = -u.R / u.L
                M[r, sig] = params.k_i / u.L
        M[sig, 0] = -1.0
        # offsets mirror the v_t column so M @ x + b cancels exactly at
        # v_t = v_ref (zero-current zero-load dynamics stay bitwise fixed)
        np.multiply(M[:, 0], -params.v_ref, out=b)
        self._M = M
        self._b = b
        self._p_over_c = params.p_load * inv_ceq
        self._floor = params.v_floor

    def _rhs(self, x: np.ndarray, out: np.ndarray, t: float) -> None:
        v = x[0]
        if v <= self._floor:
            raise VoltageFloor(t, float(v), self._floor)
        np.dot(self._M, x, out=out)
        out += self._b
        out[0] -= self._p_over_c / v

    def rk4(self, t: float, h: float) -> None:
        x, tmp = self.x, self._tmp
        k1, k2, k3, k4 = self._k1, self._k2, self._k3, self._k4
        self._rhs(x, k1, t)
        np.multiply(k1, 0.5 * h, out=tmp)
        tmp += x
        self._rhs(tmp, k2, t)
        np.multiply(k2, 0.5 * h, out=tmp)
        tmp += x
        self._rhs(tmp, k3, t)
        np.multiply(k3, h, out=tmp)
        tmp += x
        self._rhs(tmp, k4, t)
        acc = self._acc
        np.add(k2, k3, out=acc)
        acc *= 2.0
        acc += k1
        acc += k4
        acc *= h / 6.0
        x += acc

    def set_state(self, state: PlantState) -> None:
        n, m = self.n_units, self.n_sc
        self.x[0] = state.v_t
        self.x[1:1 + n] = state.i
        self.x[1 + n:1 + n + m] = state.v_c
        self.x[1 + n + m] = state.sigma

    def state(self) -> PlantState:
        n, m = self.n_units, self.n_sc
        return PlantState(float(self.x[0]), self.x[1:1 + n].copy(),
                          self.x[1 + n:1 + n + m].copy(),
                          float(self.x[1 + n + m]))


def step(state: PlantState, params: SystemParams, dt: float) -> PlantState:
    """Advance the plant by one RK4 step of length ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    eng = _Engine(params, state)
    eng.rk4(0.0, dt)
    return eng.state()


def grid_steps(horizon: float, dt: float) -> int:
    """Number of integration steps; tolerant to representation error."""
    return int(math.floor(horizon / dt + 1e-9))


def event_step_index(at: float, dt: float) -> int:
    """First grid index at or after the event timestamp."""
    return max(0, int(math.ceil(at / dt - 1e-9)))


def run(scenario, initial_state: PlantState | None = None) -> Iterator[Sample]:
    """Integrate a scenario, yielding one :class:`Sample` per grid point.

    The run starts at the closed-form operating point for the base load
    unless ``initial_state`` is given. Events due at a grid point are
    applied before that point's sample is emitted, so a trip shows its
    zeroed branch current immediately.
    """
    params = scenario.params
    state = initial_state.copy() if initial_state is not None else \
        equilibrium_state(params)
    dt = scenario.dt
    n_steps = grid_steps(scenario.horizon, dt)

    schedule = sorted(
        ((event_step_index(ev.at, dt), pos, ev)
         for pos, ev in enumerate(scenario.events)),
        key=lambda item: (item[0], item[1]))
    next_ev = 0

    eng = _Engine(params, state)
    n, m = eng.n_units, eng.n_sc
    for k in range(n_steps + 1):
        t = k * dt
        if next_ev < len(schedule) and schedule[next_ev][0] <= k:
            state = eng.state()
            while next_ev < len(schedule) and schedule[next_ev][0] <= k:
                params, state = apply_event(params, state, schedule[next_ev][2])
                next_ev += 1
            eng.set_state(state)
            eng.rebuild(params)
        x = eng.x
        yield Sample(t, float(x[0]), x[1:1 + n].copy(),
                     x[1 + n:1 + n + m].copy(), float(x[1 + n + m]),
                     params.p_cpl, params.p_ppl)
        if k < n_steps:
            eng.rk4(t, dt)


def collect(scenario, initial_state: PlantState | None = None) -> RunTrace:
    """Run a scenario and gather the sample stream into dense arrays."""
    n_steps = grid_steps(scenario.horizon, scenario.dt)
    n_samples = n_steps + 1
    n = len(scenario.params.units)
    m = len(scenario.params.sc_units)
    t = np.empty(n_samples)
    v_t = np.empty(n_samples)
    i = np.empty((n_samples, n))
    v_c = np.empty((n_samples, m))
    sigma = np.empty(n_samples)
    p_cpl = np.empty(n_samples)
    p_ppl = np.empty(n_samples)
    k = 0
    for s in run(scenario, initial_state):
        t[k] = s.t
        v_t[k] = s.v_t
        i[k] = s.i
        v_c[k] = s.v_c
        sigma[k] = s.sigma
        p_cpl[k] = s.p_cpl
        p_ppl[k] = s.p_ppl
        k += 1
    applied = sum(1 for ev in scenario.events
                  if event_step_index(ev.at, scenario.dt) <= n_steps)
    return RunTrace(t, v_t, i, v_c, sigma, p_cpl, p_ppl, applied,
                    scenario.params)
