"""Scenario definition, parsing, validation and default parameters.

A scenario is the single source of truth for a reproducible run: plant
parameters, the event schedule, grid settings, metric tunables and an
optional parameter sweep. The on-disk format is TOML with sections
``[system]``, ``[secondary]``, ``[metrics]``, repeated ``[[units]]`` and
``[[events]]`` tables and an optional ``[sweep]`` table; every section
may be omitted and falls back to the documented defaults. Unknown keys
are rejected outright: a silently ignored typo in a study configuration
is worse than friction.

``serialize_scenario`` emits a canonical form (fixed key order, exact
float round-trip) whose SHA-256 is used as the scenario digest in run
outputs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from importlib.resources import files

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ParseError, ValidationError
from .metrics import MetricConfig
from .plant import (SystemParams, UnitKind, UnitParams, check_cpl_stability,
                    validate_params)
from .sim import Event, EventKind


@dataclass(frozen=True)
class SweepSpec:
    """Declarative one-parameter sweep: an override path plus its values."""

    path: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class Scenario:
    params: SystemParams
    events: tuple[Event, ...] = ()
    horizon: float = 12.0
    dt: float = 5e-5
    metrics: MetricConfig = MetricConfig()
    decimate: int = 1
    sweep: SweepSpec | None = None


def default_params() -> SystemParams:
    """Documented default plant: 2 SG + 2 BESS + 2 SC on a 6 kV bus.

    The droop split favors the generators (they carry the bulk of the
    steady load; storage assists transients), the parallel droop comes
    to 0.05 ohm, and the PI restoration gains are fast enough that the
    DC-link capacitance visibly shapes both dip depth and recovery time.
    The set passes the linearized eigenvalue stability gate.
    """
    return SystemParams(
        v_ref=6000.0,
        c_eq=0.02,
        units=(
            UnitParams("sga", UnitKind.SG, R=0.12, L=2e-5),
            UnitParams("sgb", UnitKind.SG, R=0.12, L=2e-5),
            UnitParams("ba", UnitKind.BESS, R=0.6, L=1e-4),
            UnitParams("bb", UnitKind.BESS, R=0.6, L=1e-4),
            UnitParams("sca", UnitKind.SC, R=1.0, L=1e-4, C=0.5),
            UnitParams("scb", UnitKind.SC, R=1.0, L=1e-4, C=0.5),
        ),
        k_p=0.2,
        k_i=900.0,
        p_cpl=10e6,
    )


def default_scenario() -> Scenario:
    return Scenario(params=default_params())


def fixture_text(name: str) -> str:
    return (files("dcres") / "fixtures" / name).read_text(encoding="utf-8")


def fixture_path(name: str) -> str:
    return str(files("dcres") / "fixtures" / name)


def two_event_study() -> Scenario:
    """The bundled 12 s study: a 10->15 MW load step at 6 s, then an SG
    trip at 10 s, on the default plant."""
    return parse_scenario(fixture_text("two_event_study.toml"))


def inertia_sweep_study() -> Scenario:
    """The bundled DC-link capacitance sweep under a 5 MW load step."""
    return parse_scenario(fixture_text("inertia_sweep.toml"))


# --------------------------------------------------------------------------
# parsing

_SYSTEM_KEYS = ("v_ref", "c_eq", "p_cpl", "p_ppl", "horizon", "dt",
                "decimate", "v_floor_frac")
_SECONDARY_KEYS = ("k_p", "k_i")
_METRIC_KEYS = ("deadband", "restore_band", "hold", "vdi_scale")
_UNIT_KEYS = ("id", "kind", "r", "l", "c", "online")
_EVENT_KEYS = ("at", "kind", "power", "unit")
_SWEEP_KEYS = ("path", "values")
_TOP_KEYS = ("system", "secondary", "metrics", "units", "events", "sweep")


def _reject_unknown(table: dict, allowed, where: str) -> None:
    for key in table:
        if key not in allowed:
            raise ParseError(f"unknown key '{key}' in {where}")


def _num(table: dict, key: str, default: float, where: str) -> float:
    if key not in table:
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}.{key} must be a number")
    return float(v)


def _int(table: dict, key: str, default: int, where: str) -> int:
    if key not in table:
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}.{key} must be an integer")
    return v


def _bool(table: dict, key: str, default: bool, where: str) -> bool:
    if key not in table:
        return default
    v = table[key]
    if not isinstance(v, bool):
        raise ParseError(f"{where}.{key} must be a boolean")
    return v


def _str(table: dict, key: str, where: str) -> str:
    if key not in table:
        raise ParseError(f"missing key '{key}' in {where}")
    v = table[key]
    if not isinstance(v, str):
        raise ParseError(f"{where}.{key} must be a string")
    return v


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text; defaults fill omitted fields.

    Raises :class:`ParseError` for malformed text or unknown keys and
    :class:`ValidationError` listing every violated invariant.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"scenario is not valid TOML: {exc}") from None

    _reject_unknown(doc, _TOP_KEYS, "the scenario")
    base = default_scenario()
    dparams = base.params

    system = doc.get("system", {})
    if not isinstance(system, dict):
        raise ParseError("[system] must be a table")
    _reject_unknown(system, _SYSTEM_KEYS, "[system]")

    secondary = doc.get("secondary", {})
    if not isinstance(secondary, dict):
        raise ParseError("[secondary] must be a table")
    _reject_unknown(secondary, _SECONDARY_KEYS, "[secondary]")

    mtable = doc.get("metrics", {})
    if not isinstance(mtable, dict):
        raise ParseError("[metrics] must be a table")
    _reject_unknown(mtable, _METRIC_KEYS, "[metrics]")

    units = []
    raw_units = doc.get("units")
    if raw_units is None:
        units = list(dparams.units)
    else:
        if not isinstance(raw_units, list):
            raise ParseError("[[units]] must be an array of tables")
        for k, u in enumerate(raw_units):
            where = f"[[units]] #{k + 1}"
            _reject_unknown(u, _UNIT_KEYS, where)
            kind_s = _str(u, "kind", where)
            try:
                kind = UnitKind(kind_s)
            except ValueError:
                raise ParseError(
                    f"{where}: unknown kind '{kind_s}' "
                    f"(expected SG, BESS or SC)") from None
            units.append(UnitParams(
                id=_str(u, "id", where),
                kind=kind,
                R=_num(u, "r", 0.0, where),
                L=_num(u, "l", 0.0, where),
                C=None if "c" not in u else _num(u, "c", 0.0, where),
                online=_bool(u, "online", True, where),
            ))

    events = []
    raw_events = doc.get("events")
    if raw_events is not None:
        if not isinstance(raw_events, list):
            raise ParseError("[[events]] must be an array of tables")
        for k, e in enumerate(raw_events):
            where = f"[[events]] #{k + 1}"
            _reject_unknown(e, _EVENT_KEYS, where)
            kind_s = _str(e, "kind", where)
            try:
                kind = EventKind(kind_s)
            except ValueError:
                raise ParseError(
                    f"{where}: unknown kind '{kind_s}'") from None
            events.append(Event(
                at=_num(e, "at", 0.0, where),
                kind=kind,
                power=None if "power" not in e else _num(e, "power", 0.0, where),
                unit=None if "unit" not in e else _str(e, "unit", where),
            ))
    # ties keep declaration order (stable sort)
    events.sort(key=lambda ev: ev.at)

    sweep = None
    raw_sweep = doc.get("sweep")
    if raw_sweep is not None:
        if not isinstance(raw_sweep, dict):
            raise ParseError("[sweep] must be a table")
        _reject_unknown(raw_sweep, _SWEEP_KEYS, "[sweep]")
        values = raw_sweep.get("values")
        if not isinstance(values, list):
            raise ParseError("[sweep].values must be an array")
        vals = []
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError("[sweep].values must be numbers")
            vals.append(float(v))
        sweep = SweepSpec(path=_str(raw_sweep, "path", "[sweep]"),
                          values=tuple(vals))

    params = SystemParams(
        v_ref=_num(system, "v_ref", dparams.v_ref, "[system]"),
        c_eq=_num(system, "c_eq", dparams.c_eq, "[system]"),
        units=tuple(units),
        k_p=_num(secondary, "k_p", dparams.k_p, "[secondary]"),
        k_i=_num(secondary, "k_i", dparams.k_i, "[secondary]"),
        p_cpl=_num(system, "p_cpl", dparams.p_cpl, "[system]"),
        p_ppl=_num(system, "p_ppl", dparams.p_ppl, "[system]"),
        v_floor_frac=_num(system, "v_floor_frac", dparams.v_floor_frac,
                          "[system]"),
    )
    vdi_scale = _num(mtable, "vdi_scale", float("nan"), "[metrics]")
    metrics = MetricConfig(
        deadband=_num(mtable, "deadband", MetricConfig.deadband, "[metrics]"),
        restore_band=_num(mtable, "restore_band", MetricConfig.restore_band,
                          "[metrics]"),
        hold=_num(mtable, "hold", MetricConfig.hold, "[metrics]"),
        vdi_scale=None if "vdi_scale" not in mtable else vdi_scale,
    )
    scenario = Scenario(
        params=params,
        events=tuple(events),
        horizon=_num(system, "horizon", base.horizon, "[system]"),
        dt=_num(system, "dt", base.dt, "[system]"),
        metrics=metrics,
        decimate=_int(system, "decimate", base.decimate, "[system]"),
        sweep=sweep,
    )
    validate(scenario)
    return scenario


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read scenario '{path}': {exc}") from None
    return parse_scenario(text)


# --------------------------------------------------------------------------
# validation

def validate(scenario: Scenario) -> None:
    """Raise :class:`ValidationError` listing every violated invariant."""
    bad = validate_params(scenario.params)
    p = scenario.params

    if not (math.isfinite(scenario.dt) and scenario.dt > 0):
        bad.append("system.dt must be > 0")
    if not (math.isfinite(scenario.horizon) and scenario.horizon > 0):
        bad.append("system.horizon must be > 0")
    if scenario.decimate < 1:
        bad.append("system.decimate must be >= 1")

    m = scenario.metrics
    if m.deadband < 0:
        bad.append("metrics.deadband must be >= 0")
    if not m.restore_band > 0:
        bad.append("metrics.restore_band must be > 0")
    if m.hold < 0:
        bad.append("metrics.hold must be >= 0")
    if m.vdi_scale is not None and not m.vdi_scale > 0:
        bad.append("metrics.vdi_scale must be > 0")

    ids = {u.id for u in p.units}
    cpl_levels = [p.p_cpl]
    pulse_peak = p.p_ppl
    online = {u.id: u.online for u in p.units}
    for ev in scenario.events:
        where = f"event at t={ev.at:g} ({ev.kind.value})"
        if ev.at < 0:
            bad.append(f"{where}: at must be >= 0")
        if scenario.horizon > 0 and ev.at > scenario.horizon:
            bad.append(f"{where}: beyond the horizon {scenario.horizon:g}")
        if ev.kind in (EventKind.LOAD_STEP, EventKind.PULSE_START):
            if ev.power is None or ev.power < 0:
                bad.append(f"{where}: needs power >= 0")
            elif ev.kind is EventKind.LOAD_STEP:
                cpl_levels.append(ev.power)
            else:
                pulse_peak = max(pulse_peak, ev.power)
        elif ev.kind in (EventKind.UNIT_TRIP, EventKind.UNIT_RESTORE):
            if ev.unit is None or ev.unit not in ids:
                bad.append(f"{where}: unknown unit id '{ev.unit}'")
            elif ev.kind is EventKind.UNIT_TRIP:
                if not online[ev.unit]:
                    bad.append(f"{where}: unit '{ev.unit}' already offline")
                online[ev.unit] = False
            else:
                if online[ev.unit]:
                    bad.append(f"{where}: unit '{ev.unit}' already online")
                online[ev.unit] = True

    if not bad:
        # small-signal CPL guard at the heaviest statically known loading
        bad.extend(check_cpl_stability(p, max(cpl_levels) + pulse_peak))

    if scenario.sweep is not None:
        if not scenario.sweep.values:
            bad.append("sweep.values must be nonempty")
        else:
            try:
                apply_override(replace(scenario, sweep=None),
                               scenario.sweep.path, scenario.sweep.values[0])
            except ParseError as exc:
                bad.append(f"sweep.path: {exc}")
            except ValidationError:
                pass  # value-level problems are reported per sweep run

    if bad:
        raise ValidationError(bad)


# --------------------------------------------------------------------------
# serialization

def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)!r}")


def serialize_scenario(s: Scenario) -> str:
    """Canonical TOML rendering; parses back to an identical Scenario."""
    p = s.params
    out = ["[system]"]
    for key, val in (("v_ref", p.v_ref), ("c_eq", p.c_eq),
                     ("p_cpl", p.p_cpl), ("p_ppl", p.p_ppl),
                     ("horizon", s.horizon), ("dt", s.dt),
                     ("decimate", s.decimate),
                     ("v_floor_frac", p.v_floor_frac)):
        out.append(f"{key} = {_toml_value(val)}")
    out += ["", "[secondary]",
            f"k_p = {_toml_value(p.k_p)}",
            f"k_i = {_toml_value(p.k_i)}"]
    m = s.metrics
    out += ["", "[metrics]",
            f"deadband = {_toml_value(m.deadband)}",
            f"restore_band = {_toml_value(m.restore_band)}",
            f"hold = {_toml_value(m.hold)}"]
    if m.vdi_scale is not None:
        out.append(f"vdi_scale = {_toml_value(m.vdi_scale)}")
    for u in p.units:
        out += ["", "[[units]]",
                f"id = {_toml_value(u.id)}",
                f"kind = {_toml_value(u.kind.value)}",
                f"r = {_toml_value(u.R)}",
                f"l = {_toml_value(u.L)}"]
        if u.C is not None:
            out.append(f"c = {_toml_value(u.C)}")
        out.append(f"online = {_toml_value(u.online)}")
    for ev in s.events:
        out += ["", "[[events]]",
                f"at = {_toml_value(ev.at)}",
                f"kind = {_toml_value(ev.kind.value)}"]
        if ev.power is not None:
            out.append(f"power = {_toml_value(ev.power)}")
        if ev.unit is not None:
            out.append(f"unit = {_toml_value(ev.unit)}")
    if s.sweep is not None:
        out += ["", "[sweep]",
                f"path = {_toml_value(s.sweep.path)}",
                f"values = {_toml_value(list(s.sweep.values))}"]
    return "\n".join(out) + "\n"


def scenario_digest(s: Scenario) -> str:
    """Content hash of the canonical serialization (provenance tag)."""
    return hashlib.sha256(serialize_scenario(s).encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# overrides and sweeps

def _parse_value(raw, target: type):
    if isinstance(raw, str):
        if target is bool:
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ParseError(f"cannot parse boolean from '{raw}'")
        try:
            return target(raw)
        except ValueError:
            raise ParseError(
                f"cannot parse {target.__name__} from '{raw}'") from None
    if target is bool:
        if not isinstance(raw, bool):
            raise ParseError(f"expected a boolean, got {raw!r}")
        return raw
    return target(raw)


def apply_override(s: Scenario, path: str, value) -> Scenario:
    """Set one scenario field addressed by a dotted path.

    Paths: ``system.<key>``, ``secondary.<key>``, ``metrics.<key>`` and
    ``units.<id>.<r|l|c|online>``. The value may be a string (CLI) or a
    number (sweep). The updated scenario is re-validated.
    """
    parts = path.split(".")
    p = s.params
    out = None
    if len(parts) == 2 and parts[0] == "system":
        key = parts[1]
        if key in ("v_ref", "c_eq", "p_cpl", "p_ppl", "v_floor_frac"):
            out = replace(s, params=replace(p, **{key: _parse_value(value, float)}))
        elif key in ("horizon", "dt"):
            out = replace(s, **{key: _parse_value(value, float)})
        elif key == "decimate":
            out = replace(s, decimate=_parse_value(value, int))
    elif len(parts) == 2 and parts[0] == "secondary":
        if parts[1] in ("k_p", "k_i"):
            out = replace(s, params=replace(p, **{parts[1]: _parse_value(value, float)}))
    elif len(parts) == 2 and parts[0] == "metrics":
        if parts[1] in _METRIC_KEYS:
            out = replace(s, metrics=replace(
                s.metrics, **{parts[1]: _parse_value(value, float)}))
    elif len(parts) == 3 and parts[0] == "units":
        unit_id, key = parts[1], parts[2]
        attr = {"r": "R", "l": "L", "c": "C", "online": "online"}.get(key)
        if attr is not None:
            try:
                j = p.unit_index(unit_id)
            except KeyError:
                raise ParseError(f"unknown unit id '{unit_id}' in override "
                                 f"path '{path}'") from None
            cast = bool if key == "online" else float
            units = list(p.units)
            units[j] = replace(units[j], **{attr: _parse_value(value, cast)})
            out = replace(s, params=replace(p, units=tuple(units)))
    if out is None:
        raise ParseError(f"unknown override path '{path}'")
    validate(out)
    return out


def sweep_variants(s: Scenario) -> list[tuple[float, Scenario]]:
    """Expand the sweep spec into per-value scenarios (sweep removed)."""
    if s.sweep is None:
        raise ValidationError(["scenario has no [sweep] section"])
    base = replace(s, sweep=None)
    return [(v, apply_override(base, s.sweep.path, v))
            for v in s.sweep.values]

