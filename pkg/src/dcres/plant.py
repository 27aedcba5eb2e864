"""Reduced-order model of a droop-controlled MVDC microgrid.

The plant is a single DC bus (link capacitance ``c_eq``) fed by parallel
source branches: synchronous generators (SG) and battery storage (BESS)
with resistive droop, plus supercapacitor branches (SC) that couple
through a series capacitance and therefore carry no steady-state current.
Loads are a constant-power load and an optional pulsed-power load, both
drawing ``P / v_t`` from the bus. A centralized PI loop injects a common
voltage correction ``dv`` into the droop branches to restore the bus to
its reference after disturbances; SC branches never receive it.

State per branch is the branch current; SC branches add their series
capacitor voltage; the bus adds its voltage and the PI integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NoEquilibrium, NoOnlineSources, VoltageFloor


class UnitKind(Enum):
    SG = "SG"
    BESS = "BESS"
    SC = "SC"


@dataclass(frozen=True)
class UnitParams:
    """One source branch: series R-L, plus a series capacitor for SC units."""

    id: str
    kind: UnitKind
    R: float                   # droop / series resistance, ohm
    L: float                   # branch inductance, H
    C: float | None = None     # series capacitance, F (SC kind only)
    online: bool = True

    @property
    def is_droop(self) -> bool:
        """SG and BESS branches participate in droop and receive dv."""
        return self.kind is not UnitKind.SC


@dataclass(frozen=True)
class SystemParams:
    """Full plant parameterization.

    ``v_ref`` is the bus reference voltage, ``c_eq`` the DC-link
    capacitance, ``k_p``/``k_i`` the centralized PI restoration gains and
    ``p_cpl``/``p_ppl`` the constant- and pulsed-power load setpoints.
    ``v_floor_frac`` sets the collapse floor as a fraction of ``v_ref``;
    the integrator aborts if the bus ever falls below it.
    """

    v_ref: float
    c_eq: float
    units: tuple[UnitParams, ...]
    k_p: float
    k_i: float
    p_cpl: float
    p_ppl: float = 0.0
    v_floor_frac: float = 0.2

    @property
    def v_floor(self) -> float:
        return self.v_floor_frac * self.v_ref

    @property
    def p_load(self) -> float:
        return self.p_cpl + self.p_ppl

    @property
    def sc_units(self) -> tuple[UnitParams, ...]:
        return tuple(u for u in self.units if u.kind is UnitKind.SC)

    def unit_index(self, unit_id: str) -> int:
        for j, u in enumerate(self.units):
            if u.id == unit_id:
                return j
        raise KeyError(unit_id)


@dataclass
class PlantState:
    """ODE state: bus voltage, branch currents, SC capacitor voltages, PI integrator.

    ``i`` is ordered like ``params.units``; ``v_c`` is ordered like the SC
    subset of that list. Offline units hold ``i = 0``.
    """

    v_t: float
    i: np.ndarray
    v_c: np.ndarray
    sigma: float = 0.0

    def copy(self) -> "PlantState":
        return PlantState(self.v_t, self.i.copy(), self.v_c.copy(), self.sigma)


def equivalent_droop(params: SystemParams) -> float:
    """Parallel combination of the droop resistances of online SG/BESS branches.

    SC branches are excluded: their series capacitor blocks steady-state
    current, so they contribute nothing to the static droop.

    Raises
    ------
    NoOnlineSources
        If every SG/BESS branch is offline.
    """
    g = 0.0
    for u in params.units:
        if u.online and u.is_droop:
            g += 1.0 / u.R
    if g == 0.0:
        raise NoOnlineSources("no online SG/BESS branch")
    return 1.0 / g


def droop_equilibrium(params: SystemParams, p_load: float) -> float:
    """Steady-state bus voltage under droop alone (secondary loop ignored).

    Solves ``v**2 - v_ref*v + r_eq*p_load = 0`` and returns the larger
    root, which is the physically operating high-voltage branch of the
    droop characteristic ``v = v_ref - r_eq * p_load / v``.

    Raises
    ------
    NoEquilibrium
        If the discriminant is negative, i.e. the load exceeds the
        maximum power ``v_ref**2 / (4 * r_eq)`` the droop can deliver.
    """
    if p_load < 0:
        raise ValueError("p_load must be nonnegative")
    r_eq = equivalent_droop(params)
    disc = params.v_ref * params.v_ref - 4.0 * r_eq * p_load
    if disc < 0.0:
        raise NoEquilibrium(
            f"load {p_load:.6g} W exceeds droop capability "
            f"{params.v_ref ** 2 / (4 * r_eq):.6g} W"
        )
    return 0.5 * (params.v_ref + math.sqrt(disc))


def secondary_delta(state: PlantState, params: SystemParams) -> float:
    """Centralized PI voltage correction applied to every online droop branch."""
    return params.k_p * (params.v_ref - state.v_t) + params.k_i * state.sigma


def derivatives(state: PlantState, params: SystemParams) -> PlantState:
    """Time derivative of the plant state.

    Bus:      c_eq * dv_t  = sum(i, online units) - (p_cpl + p_ppl) / v_t
    SG/BESS:  L * di       = v_ref - R*i - v_t + dv
    SC:       L * di       = v_ref - R*i - v_c - v_t
              C * dv_c     = i
    PI:       dsigma       = v_ref - v_t

    Offline branches hold ``di = 0``. Raises :class:`VoltageFloor` if the
    bus is at or below the collapse floor, where the constant-power load
    current ``P / v_t`` is no longer trustworthy.
    """
    v_t = state.v_t
    if v_t <= params.v_floor:
        raise VoltageFloor(float("nan"), v_t, params.v_floor)

    dv = secondary_delta(state, params)
    di = np.zeros_like(state.i)
    dv_c = np.zeros_like(state.v_c)
    i_sum = 0.0
    sc_pos = 0
    for j, u in enumerate(params.units):
        if u.kind is UnitKind.SC:
            if u.online:
                i_sum += state.i[j]
                di[j] = (params.v_ref - u.R * state.i[j]
                         - state.v_c[sc_pos] - v_t) / u.L
            dv_c[sc_pos] = state.i[j] / u.C
            sc_pos += 1
        elif u.online:
            i_sum += state.i[j]
            di[j] = (params.v_ref - u.R * state.i[j] - v_t + dv) / u.L
    dv_t = (i_sum - params.p_load / v_t) / params.c_eq
    return PlantState(dv_t, di, dv_c, params.v_ref - v_t)


def equilibrium_state(params: SystemParams) -> PlantState:
    """Closed-form operating point for the current load and topology.

    With integral action the bus settles exactly at ``v_ref`` and the PI
    integrator holds the whole droop correction. Without it the bus sits
    on the (proportionally stiffened) droop characteristic. SC branches
    idle at zero current with their capacitor absorbing the branch bias.
    """
    n = len(params.units)
    i = np.zeros(n)
    v_c = np.zeros(len(params.sc_units))
    r_eq = equivalent_droop(params)

    if params.k_i > 0.0:
        v_t = params.v_ref
        dv = r_eq * params.p_load / params.v_ref
        sigma = dv / params.k_i
    else:
        # effective droop is stiffened by the proportional gain
        gain = 1.0 + params.k_p
        disc = params.v_ref ** 2 - 4.0 * (r_eq / gain) * params.p_load
        if disc < 0.0:
            raise NoEquilibrium("no droop operating point for this load")
        v_t = 0.5 * (params.v_ref + math.sqrt(disc))
        dv = params.k_p * (params.v_ref - v_t)
        sigma = 0.0

    sc_pos = 0
    for j, u in enumerate(params.units):
        if u.kind is UnitKind.SC:
            if u.online:
                v_c[sc_pos] = params.v_ref - v_t
            sc_pos += 1
        elif u.online:
            i[j] = (params.v_ref - v_t + dv) / u.R
    return PlantState(v_t, i, v_c, sigma)


def state_to_vector(state: PlantState) -> np.ndarray:
    """Pack the state as [v_t, i..., v_c..., sigma] for numeric work."""
    return np.concatenate(([state.v_t], state.i, state.v_c, [state.sigma]))


def vector_to_state(x: np.ndarray, params: SystemParams) -> PlantState:
    n = len(params.units)
    m = len(params.sc_units)
    return PlantState(float(x[0]), x[1:1 + n].copy(),
                      x[1 + n:1 + n + m].copy(), float(x[1 + n + m]))


def finite_difference_jacobian(params: SystemParams,
                               state: PlantState | None = None,
                               eps: float = 1e-4) -> np.ndarray:
    """Central-difference Jacobian of the plant dynamics at an operating point.

    Used as the stability gate for parameter sets: a set is accepted when
    every eigenvalue of this matrix has a negative real part.
    """
    if state is None:
        state = equilibrium_state(params)
    x0 = state_to_vector(state)
    n = x0.size
    jac = np.empty((n, n))
    for k in range(n):
        h = eps * max(1.0, abs(x0[k]))
        xp = x0.copy(); xp[k] += h
        xm = x0.copy(); xm[k] -= h
        fp = state_to_vector(derivatives(vector_to_state(xp, params), params))
        fm = state_to_vector(derivatives(vector_to_state(xm, params), params))
        jac[:, k] = (fp - fm) / (2.0 * h)
    return jac


def validate_params(params: SystemParams) -> list[str]:
    """Return every violated plant invariant as a human-readable string."""
    bad = []
    finite = all(math.isfinite(x) for x in
                 (params.v_ref, params.c_eq, params.k_p, params.k_i,
                  params.p_cpl, params.p_ppl, params.v_floor_frac))
    if not finite:
        bad.append("system/secondary values must be finite numbers")
    if not params.v_ref > 0:
        bad.append("system.v_ref must be > 0")
    if not params.c_eq > 0:
        bad.append("system.c_eq must be > 0")
    if params.p_cpl < 0:
        bad.append("system.p_cpl must be >= 0")
    if params.p_ppl < 0:
        bad.append("system.p_ppl must be >= 0")
    if params.k_p < 0 or params.k_i < 0:
        bad.append("secondary gains must be >= 0")
    if not 0.0 <= params.v_floor_frac < 1.0:
        bad.append("system.v_floor_frac must lie in [0, 1)")

    seen = set()
    for u in params.units:
        if not u.id or not u.id.replace("_", "").isalnum():
            bad.append(f"unit id {u.id!r} must be alphanumeric "
                       "(it names a telemetry column)")
        if u.id in seen:
            bad.append(f"duplicate unit id '{u.id}'")
        seen.add(u.id)
        if not (math.isfinite(u.L) and math.isfinite(u.R)
                and (u.C is None or math.isfinite(u.C))):
            bad.append(f"unit '{u.id}': values must be finite")
        if not u.L > 0:
            bad.append(f"unit '{u.id}': l must be > 0")
        if not u.R > 0:
            bad.append(f"unit '{u.id}': r must be > 0")
        if u.kind is UnitKind.SC:
            if u.C is None or not u.C > 0:
                bad.append(f"unit '{u.id}': SC units need c > 0")
        elif u.C is not None:
            bad.append(f"unit '{u.id}': c is only valid for SC units")

    if not any(u.online and u.is_droop for u in params.units):
        bad.append("at least one SG/BESS unit must be online")
    return bad


def check_cpl_stability(params: SystemParams, p_load: float) -> list[str]:
    """Small-signal guard for constant-power loading at the droop point.

    Requires ``r_eq < v_t**2 / p_load`` at the droop equilibrium;
    parameter sets violating it are rejected before simulation.
    """
    if p_load <= 0:
        return []
    try:
        r_eq = equivalent_droop(params)
        v_t = droop_equilibrium(params, p_load)
    except NoOnlineSources:
        return []  # reported separately by validate_params
    except NoEquilibrium:
        return [f"load {p_load:.6g} W exceeds the droop capability"]
    if r_eq >= v_t * v_t / p_load:
        return [
            f"constant-power-load stability guard failed at {p_load:.6g} W: "
            f"r_eq={r_eq:.6g} >= v**2/P={v_t * v_t / p_load:.6g}"
        ]
    return []
