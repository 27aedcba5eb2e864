"""Streaming resilience metrics over a uniform-rate bus-voltage stream.

Three indices are tracked in a single pass with no lookahead:

``rv``
    Lifetime deviation area: the running integral of ``|v_ref - v_t|``,
    accumulated only while the deviation exceeds a deadband. It never
    resets, so disturbance history shows up as a staircase; per-event
    contributions are reported as ``delta_rv``.

``vdi``
    Normalized degradation index. While the voltage is moving away from
    the reference it accumulates ``|v_ref - v_t| * dt`` and divides by
    ``v_ref`` times the elapsed degradation time, scaled by a
    configurable coefficient (default ``1 / v_ref``). It is exactly zero
    outside degradation phases and resets the moment recovery begins.

``vrei``
    Restoration efficiency on the recovery window: the integral of
    ``v_t - v_pe`` from the turn point to re-entry into the restoration
    band, divided by the ideal rectangle ``(v_ref - v_pe) * (t_pr - t_r)``.
    1 means instant full restoration, 0 means no recovery. The value is
    reported raw; mild ringing can push it past 1 and that is diagnostic.

Phases are detected from the samples alone: an event opens when the
deviation first leaves the deadband (``t_d``), turns to recovery at the
first sample moving back toward the reference (``t_r``, with the signed
extremum ``v_pe``), and closes once the voltage has stayed inside the
restoration band for a hold time (``t_pr`` is the band-entry instant).

Each tracker is a small sequential state machine over (t, v) pairs;
feeding a trace in blocks is identical to feeding it in one piece.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import NonMonotoneTime


class Phase(IntEnum):
    STEADY = 0
    DEGRADING = 1
    RECOVERING = 2


@dataclass(frozen=True)
class MetricConfig:
    """Tunables for the metric engine.

    ``deadband`` and ``restore_band`` are fractions of the reference
    voltage; ``hold`` is the dwell time (s) inside the restoration band
    before an event is declared over. ``vdi_scale`` is the degradation
    index coefficient; ``None`` selects ``1 / v_ref``.
    """

    deadband: float = 5e-4
    restore_band: float = 1e-3
    hold: float = 0.05
    vdi_scale: float | None = None


@dataclass(frozen=True)
class EventReport:
    """Per-event summary emitted when the voltage has settled again.

    ``resolved`` is False when the stream ended mid-event; fields not
    yet established are None in that case.
    """

    t_d: float
    t_r: float | None
    t_pr: float | None
    v_pe: float | None
    delta_rv: float | None
    vdi_peak: float
    vrei: float | None
    resolved: bool = True


class TrapezoidAccumulator:
    """Streaming composite-trapezoid integral.

    Each fed sample extends the running integral by one trapezoid panel;
    on a uniform grid the total matches the closed composite rule
    ``dx/2 * (f_0 + 2*sum(f_k) + f_N)``. Summation is compensated
    (Kahan) so the stream agrees with a batch evaluation to rounding.
    The first sample only anchors the integral; feeding a timestamp at
    or before the previous one raises :class:`NonMonotoneTime`.
    """

    __slots__ = ("last_t", "last_f", "total", "_carry")

    def __init__(self):
        self.last_t: float | None = None
        self.last_f = 0.0
        self.total = 0.0
        self._carry = 0.0

    def feed(self, t: float, f: float) -> float:
        last_t = self.last_t
        if last_t is not None:
            if t <= last_t:
                raise NonMonotoneTime(
                    f"sample at t={t!r} does not advance past t={last_t!r}")
            area = 0.5 * (f + self.last_f) * (t - last_t)
            if area != 0.0:  # zero panels must leave the total bit-identical
                y = area - self._carry
                s = self.total + y
                self._carry = (s - self.total) - y
                self.total = s
        self.last_t = t
        self.last_f = f
        return self.total


class RvTracker:
    """Lifetime deviation-area accumulator with a deadband."""

    __slots__ = ("v_ref", "_db", "_trap")

    def __init__(self, v_ref: float, deadband: float = 5e-4):
        self.v_ref = v_ref
        self._db = deadband * v_ref
        self._trap = TrapezoidAccumulator()

    def update(self, t: float, v: float) -> float:
        dev = self.v_ref - v
        if dev < 0.0:
            dev = -dev
        return self._trap.feed(t, dev if dev > self._db else 0.0)

    @property
    def total(self) -> float:
        return self._trap.total


class PhaseTracker:
    """Event-phase state machine: steady / degrading / recovering.

    After each :meth:`update` the one-shot transition flags below are
    valid for that sample:

    ``opened``      an event just started (``t_d`` latched)
    ``turned``      recovery just began (``t_r`` and ``v_pe`` latched)
    ``relapsed``    the deviation pushed past the latched extremum and
                    the phase fell back to degrading
    ``entered_band``/``left_band``  restoration-band candidacy changed
                    (``t_pr_candidate`` set / cleared)
    ``completed``   the hold time elapsed in-band; the event is over and
                    ``t_pr`` is final
    """

    __slots__ = ("v_ref", "_db", "_rb", "hold", "phase",
                 "t_d", "t_r", "t_pr", "v_pe", "t_pr_candidate",
                 "_ext_v", "_prev_t", "_prev_v",
                 "opened", "turned", "relapsed",
                 "entered_band", "left_band", "completed")

    def __init__(self, v_ref: float, deadband: float = 5e-4,
                 restore_band: float = 1e-3, hold: float = 0.05):
        self.v_ref = v_ref
        self._db = deadband * v_ref
        self._rb = restore_band * v_ref
        self.hold = hold
        self.phase = Phase.STEADY
        self.t_d = None
        self.t_r = None
        self.t_pr = None
        self.v_pe = None
        self.t_pr_candidate = None
        self._ext_v = None
        self._prev_t = None
        self._prev_v = None
        self._clear_flags()

    def _clear_flags(self):
        self.opened = False
        self.turned = False
        self.relapsed = False
        self.entered_band = False
        self.left_band = False
        self.completed = False

    def update(self, t: float, v: float) -> Phase:
        self._clear_flags()
        adv = v - self.v_ref
        if adv < 0.0:
            adv = -adv

        if self.phase is Phase.STEADY:
            if adv > self._db:
                self.phase = Phase.DEGRADING
                self.t_d = t
                self.t_r = None
                self.t_pr = None
                self.v_pe = None
                self.t_pr_candidate = None
                self._ext_v = v
                self.opened = True

        elif self.phase is Phase.DEGRADING:
            ext_dev = self._ext_v - self.v_ref
            if ext_dev < 0.0:
                ext_dev = -ext_dev
            if adv > ext_dev:
                self._ext_v = v  # still moving away: new extremum
            elif ((self._ext_v < self.v_ref and v > self._prev_v)
                  or (self._ext_v > self.v_ref and v < self._prev_v)):
                # first sample heading back toward the reference
                self.phase = Phase.RECOVERING
                self.t_r = self._prev_t
                self.v_pe = self._ext_v
                self.turned = True
                self._band_check(t, adv)

        else:  # RECOVERING
            pe_dev = self.v_pe - self.v_ref
            if pe_dev < 0.0:
                pe_dev = -pe_dev
            if adv > pe_dev:
                # deviation broke past the latched extremum: same event,
                # but the degradation is not over after all
                self.phase = Phase.DEGRADING
                self._ext_v = v
                self.t_r = None
                self.v_pe = None
                self.t_pr_candidate = None
                self.relapsed = True
            else:
                self._band_check(t, adv)
                if (self.t_pr_candidate is not None
                        and t - self.t_pr_candidate >= self.hold - 1e-12):
                    self.t_pr = self.t_pr_candidate
                    self.phase = Phase.STEADY
                    self.t_pr_candidate = None
                    self._ext_v = None
                    self.completed = True

        self._prev_t = t
        self._prev_v = v
        return self.phase

    def _band_check(self, t: float, adv: float) -> None:
        if adv <= self._rb:
            if self.t_pr_candidate is None:
                self.t_pr_candidate = t
                self.entered_band = True
        elif self.t_pr_candidate is not None:
            self.t_pr_candidate = None
            self.left_band = True


class VdiTracker:
    """Degradation-index update rule over the live degradation window.

    ``update`` must be called for every sample; the ``degrading`` flag
    comes from the phase detector. Internally this is a rectangle sum of
    ``|v_ref - v| * dt`` (compensated) against ``v_ref`` times the
    window length so far, matching a per-sample real-time update rule.
    """

    __slots__ = ("v_ref", "scale", "_t_d", "_s_total", "_carry", "_last_t")

    def __init__(self, v_ref: float, scale: float | None = None):
        self.v_ref = v_ref
        self.scale = (1.0 / v_ref) if scale is None else scale
        self._t_d = None
        self._s_total = 0.0
        self._carry = 0.0
        self._last_t = None

    def update(self, t: float, v: float, degrading: bool) -> float:
        value = 0.0
        if degrading:
            if self._t_d is None:
                self._t_d = t
            if self._last_t is not None:
                dev = self.v_ref - v
                if dev < 0.0:
                    dev = -dev
                y = dev * (t - self._last_t) - self._carry
                s = self._s_total + y
                self._carry = (s - self._s_total) - y
                self._s_total = s
            denom = self.v_ref * (t - self._t_d)
            if denom > 0.0:
                value = self.scale * self._s_total / denom
        else:
            self._t_d = None
            self._s_total = 0.0
            self._carry = 0.0
        self._last_t = t
        return value


class VreiTracker:
    """Restoration-efficiency integral over one recovery window.

    ``begin`` anchors the window at the turn point ``t_r`` (where the
    trace sits at its extremum, so the integrand starts at zero unless a
    different anchor value is supplied). ``mark``/``clear`` track the
    restoration-band candidacy; ``final`` evaluates the index at the
    confirmed band entry. A zero-width window counts as instant full
    restoration and returns 1 by convention.
    """

    __slots__ = ("v_ref", "t_r", "v_pe", "_trap", "_snap")

    def __init__(self, v_ref: float):
        self.v_ref = v_ref
        self.t_r = None
        self.v_pe = None
        self._trap = None
        self._snap = None

    def begin(self, t_r: float, v_pe: float, v_at_tr: float | None = None):
        self.t_r = t_r
        self.v_pe = v_pe
        self._trap = TrapezoidAccumulator()
        anchor = 0.0 if v_at_tr is None else v_at_tr - v_pe
        self._trap.feed(t_r, anchor)
        self._snap = None

    def update(self, t: float, v: float) -> float:
        num = self._trap.feed(t, v - self.v_pe)
        span = (self.v_ref - self.v_pe) * (t - self.t_r)
        return num / span if span != 0.0 else 1.0

    def mark(self, t_pr: float) -> None:
        self._snap = (t_pr, self._trap.total)

    def clear(self) -> None:
        self._snap = None

    def final(self) -> float:
        t_pr, num = self._snap
        if t_pr == self.t_r:
            return 1.0
        return num / ((self.v_ref - self.v_pe) * (t_pr - self.t_r))


class ResilienceTracker:
    """One-pass metric engine: phases, rv, vdi and vrei together.

    ``update(t, v)`` returns ``(rv, vdi, vrei, phase)`` for the sample;
    completed events append an :class:`EventReport` to ``reports``.
    Call :meth:`finish` at end of stream to flush an unresolved event.
    """

    def __init__(self, v_ref: float, config: MetricConfig | None = None):
        cfg = config if config is not None else MetricConfig()
        self.v_ref = v_ref
        self.config = cfg
        self.phase = PhaseTracker(v_ref, cfg.deadband, cfg.restore_band,
                                  cfg.hold)
        self.rv = RvTracker(v_ref, cfg.deadband)
        self.vdi = VdiTracker(v_ref, cfg.vdi_scale)
        self.vrei = VreiTracker(v_ref)
        self.reports: list[EventReport] = []
        self._rv_at_td = None
        self._rv_at_tpr = None
        self._vdi_peak = 0.0
        self._in_event = False

    def update(self, t: float, v: float):
        ph = self.phase.update(t, v)
        rv = self.rv.update(t, v)
        degrading = ph is Phase.DEGRADING
        vdi = self.vdi.update(t, v, degrading)
        vrei = 0.0

        p = self.phase
        if p.opened:
            self._in_event = True
            self._rv_at_td = rv
            self._vdi_peak = 0.0
        if vdi > self._vdi_peak:
            self._vdi_peak = vdi
        if p.turned:
            self.vrei.begin(p.t_r, p.v_pe)
        if ph is Phase.RECOVERING:
            vrei = self.vrei.update(t, v)
        if p.entered_band:
            self.vrei.mark(p.t_pr_candidate)
            self._rv_at_tpr = rv
        elif p.left_band or p.relapsed:
            self.vrei.clear()
            self._rv_at_tpr = None
        if p.completed:
            self.reports.append(EventReport(
                t_d=p.t_d, t_r=p.t_r, t_pr=p.t_pr, v_pe=p.v_pe,
                delta_rv=self._rv_at_tpr - self._rv_at_td,
                vdi_peak=self._vdi_peak, vrei=self.vrei.final(),
                resolved=True))
            self._in_event = False
            self._rv_at_td = None
            self._rv_at_tpr = None
        return rv, vdi, vrei, int(ph)

    def finish(self) -> list[EventReport]:
        """Flush a partial report if the stream ended mid-event."""
        if self._in_event:
            p = self.phase
            self.reports.append(EventReport(
                t_d=p.t_d, t_r=p.t_r, t_pr=None, v_pe=p.v_pe,
                delta_rv=None, vdi_peak=self._vdi_peak, vrei=None,
                resolved=False))
            self._in_event = False
        return self.reports


def score_trace(t, v, v_ref: float, config: MetricConfig | None = None):
    """Run the metric engine over a recorded (t, v) trace.

    Returns ``(rv, vdi, vrei, phase)`` arrays plus the event reports.
    Timestamps must be strictly increasing or :class:`NonMonotoneTime`
    is raised at the offending sample.
    """
    tracker = ResilienceTracker(v_ref, config)
    n = len(t)
    rv = np.empty(n)
    vdi = np.empty(n)
    vrei = np.empty(n)
    phase = np.empty(n, dtype=np.int64)
    up = tracker.update
    for k in range(n):
        rv[k], vdi[k], vrei[k], phase[k] = up(float(t[k]), float(v[k]))
    reports = tracker.finish()
    return rv, vdi, vrei, phase, reports
