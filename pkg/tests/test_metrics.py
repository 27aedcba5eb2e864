"""Metric engine: trapezoid accumulator, phase detection, rv/vdi/vrei."""

import copy
import math

import numpy as np
import pytest

from _reference import (batch_rv_curve, batch_trapezoid_uniform,
                        batch_vdi_curve, batch_vrei, scan_phases)
from dcres import metrics
from dcres.errors import NonMonotoneTime
from dcres.metrics import (MetricConfig, Phase, PhaseTracker,
                           ResilienceTracker, RvTracker,
                           TrapezoidAccumulator, VdiTracker, VreiTracker,
                           score_trace)

V_REF = 6000.0


def vshape_trace(dt=1e-3, n=1701):
    """Flat 6 kV, ramp down 0.5 V/step to 5900 over [1.0, 1.2] s, ramp
    back up over [1.2, 1.4] s, flat afterwards. All values exact."""
    t = np.arange(n) * dt
    v = np.full(n, 6000.0)
    for k in range(n):
        tk = k * dt
        if 1.0 < tk <= 1.2:
            v[k] = 6000.0 - 0.5 * round((tk - 1.0) / dt)
        elif 1.2 < tk < 1.4:
            v[k] = 5900.0 + 0.5 * round((tk - 1.2) / dt)
    return t, v


# ------------------------------------------------------------- trapezoid

def test_trap_linear_integrand_exact():
    acc = TrapezoidAccumulator()
    for k in range(11):
        total = acc.feed(k * 0.1, k * 0.1)
    assert total == pytest.approx(0.5, rel=1e-14)


def test_trap_sin_error_bound():
    acc = TrapezoidAccumulator()
    n = 1000
    for k in range(n + 1):
        x = math.pi * k / n
        acc.feed(x, math.sin(x))
    assert abs(acc.total - 2.0) <= 2e-6


def test_trap_single_sample_no_area():
    acc = TrapezoidAccumulator()
    assert acc.feed(0.0, 123.0) == 0.0


def test_trap_rejects_non_monotone():
    acc = TrapezoidAccumulator()
    acc.feed(0.0, 1.0)
    acc.feed(1.0, 1.0)
    with pytest.raises(NonMonotoneTime):
        acc.feed(1.0, 2.0)
    with pytest.raises(NonMonotoneTime):
        acc.feed(0.5, 2.0)


def test_trap_streaming_equals_batch_random_signals():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(8, 400))
        dx = float(rng.uniform(1e-4, 0.3))
        f = rng.uniform(0.1, 2.0, n)
        acc = TrapezoidAccumulator()
        for k in range(n):
            acc.feed(k * dx, f[k])
        batch = batch_trapezoid_uniform(f, dx)
        assert abs(acc.total - batch) <= 1e-12 * abs(batch)


def test_trap_error_scales_second_order():
    errs, widths = [], []
    for n in (125, 250, 500, 1000, 2000):
        acc = TrapezoidAccumulator()
        for k in range(n + 1):
            x = math.pi * k / n
            acc.feed(x, math.sin(x))
        errs.append(abs(acc.total - 2.0))
        widths.append(math.pi / n)
    slope = np.polyfit(np.log(widths), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


# -------------------------------------------------------------------- rv

def test_rv_constant_deviation_rectangle():
    rv = RvTracker(V_REF, deadband=0.0)
    for k in range(501):
        total = rv.update(k * 1e-3, 5998.0)
    assert total == pytest.approx(1.0, rel=1e-12)


def test_rv_flat_trace_zero():
    rv = RvTracker(V_REF)
    for k in range(1000):
        total = rv.update(k * 1e-3, 6000.0)
    assert total == 0.0


def test_rv_monotone_and_dead_inside_band():
    rng = np.random.default_rng(3)
    rv = RvTracker(V_REF, deadband=5e-4)
    prev = 0.0
    for k in range(4000):
        v = 6000.0 + float(rng.normal(0, 8.0))
        total = rv.update(k * 1e-3, v)
        assert total >= prev
        prev = total
    # strictly inside the deadband the increment is exactly zero
    rv2 = RvTracker(V_REF, deadband=5e-4)
    rv2.update(0.0, 6000.0)
    before = rv2.update(1.0, 5999.0)
    after = rv2.update(2.0, 6001.5)
    assert after == before == 0.0


# ----------------------------------------------------------------- phase

def test_phase_flat_trace_stays_steady():
    ph = PhaseTracker(V_REF)
    for k in range(2000):
        assert ph.update(k * 1e-3, 6000.0) is Phase.STEADY


def test_phase_vshape_landmarks():
    t, v = vshape_trace()
    _, _, _, _, reports = score_trace(t, v, V_REF, MetricConfig())
    assert len(reports) == 1
    r = reports[0]
    # deadband 3 V: onset one step past |dv| = 3, extremum at 1.2,
    # first sample back inside the 6 V band at 1.388
    assert r.t_d == pytest.approx(1.007, abs=1e-9)
    assert r.t_r == pytest.approx(1.2, abs=1e-9)
    assert r.v_pe == 5900.0
    assert r.t_pr == pytest.approx(1.388, abs=1e-9)
    assert r.resolved


def test_phase_overshoot_mirror_identical():
    t, v = vshape_trace()
    vm = 2.0 * V_REF - v
    a = score_trace(t, v, V_REF, MetricConfig())
    b = score_trace(t, vm, V_REF, MetricConfig())
    assert b[4][0].v_pe == 6100.0
    assert b[4][0].t_d == a[4][0].t_d
    assert b[4][0].t_r == a[4][0].t_r
    assert b[4][0].t_pr == a[4][0].t_pr


def test_reflection_leaves_all_metrics_bitwise_unchanged():
    t, v = vshape_trace()
    vm = 2.0 * V_REF - v
    rv_a, vdi_a, vrei_a, ph_a, _ = score_trace(t, v, V_REF, MetricConfig())
    rv_b, vdi_b, vrei_b, ph_b, _ = score_trace(t, vm, V_REF, MetricConfig())
    assert np.array_equal(rv_a, rv_b)
    assert np.array_equal(vdi_a, vdi_b)
    assert np.array_equal(vrei_a, vrei_b)
    assert np.array_equal(ph_a, ph_b)


def test_phase_ordering_invariant_random_walks():
    rng = np.random.default_rng(11)
    for trial in range(30):
        n = 3000
        t = np.arange(n) * 1e-3
        v = 6000.0 + np.cumsum(rng.normal(0, 2.0, n))
        v = np.clip(v, 5500.0, 6500.0)
        _, _, _, _, reports = score_trace(t, v, V_REF,
                                          MetricConfig(hold=0.02))
        for r in reports:
            if r.t_r is not None:
                assert r.t_d <= r.t_r
                if r.t_pr is not None:
                    assert r.t_r <= r.t_pr
                    assert r.resolved
            if r.delta_rv is not None:
                assert r.delta_rv >= 0.0
            assert r.vdi_peak >= 0.0


def test_phase_relapse_keeps_event_open():
    # dip, half-recovery, deeper dip, then full recovery: one event
    dt = 1e-3
    seq = ([6000.0] * 5 + [5980.0, 5960.0, 5940.0, 5950.0, 5960.0, 5940.0,
           5920.0, 5900.0] + list(np.arange(5900.0, 6000.5, 20.0))
           + [6000.0] * 60)
    t = np.arange(len(seq)) * dt
    _, _, _, _, reports = score_trace(t, np.array(seq), V_REF,
                                      MetricConfig(hold=0.01))
    assert len(reports) == 1
    r = reports[0]
    assert r.v_pe == 5900.0
    assert r.t_d == pytest.approx(5 * dt)
    assert r.resolved


# ------------------------------------------------------------------- vdi

def ramp_trace(depth=60.0, dt=1e-4, n_ramp=1000, n_total=3001):
    """Down-ramp to -depth over n_ramp steps, symmetric return, flat."""
    t = np.arange(n_total) * dt
    v = np.full(n_total, 6000.0)
    rate = depth / n_ramp
    for k in range(n_total):
        if 0 < k <= n_ramp:
            v[k] = 6000.0 - rate * k
        elif n_ramp < k <= 2 * n_ramp:
            v[k] = (6000.0 - depth) + rate * (k - n_ramp)
    return t, v


def test_vdi_zero_on_flat_trace():
    vdi = VdiTracker(V_REF)
    for k in range(100):
        assert vdi.update(k * 1e-3, 6000.0, False) == 0.0


def test_vdi_ramp_closed_form():
    dt, n = 1e-4, 1000
    t, v = ramp_trace(depth=60.0, dt=dt, n_ramp=n)
    cfg = MetricConfig(deadband=0.0)
    _, vdi, _, _, _ = score_trace(t, v, V_REF, cfg)
    # onset at the first nonzero deviation (k=1); last degrading sample k=n
    s_total = 0.06 * dt * (n * (n + 1) / 2)   # rectangle sum of the ramp
    expect = (1.0 / V_REF) * s_total / (V_REF * (t[n] - t[1]))
    assert vdi[n] == pytest.approx(expect, rel=1e-9)
    # and the idealized continuous value within 1%
    assert vdi[n] == pytest.approx(3.0 / (600.0 * 6000.0), rel=1e-2)
    # zero before onset and back to zero the moment recovery begins
    assert np.all(vdi[:2] == 0.0)
    assert np.all(vdi[n + 1:] == 0.0)


def test_vdi_linear_in_deviation_magnitude():
    t, v1 = ramp_trace(depth=60.0)
    _, v2 = ramp_trace(depth=120.0)
    cfg = MetricConfig(deadband=0.0)
    _, vdi1, _, _, _ = score_trace(t, v1, V_REF, cfg)
    _, vdi2, _, _, _ = score_trace(t, v2, V_REF, cfg)
    assert vdi2[1000] == pytest.approx(2.0 * vdi1[1000], rel=1e-9)


def test_vdi_scale_coefficient_applied():
    t, v = ramp_trace()
    _, a, _, _, _ = score_trace(t, v, V_REF, MetricConfig(deadband=0.0))
    _, b, _, _, _ = score_trace(t, v, V_REF,
                                MetricConfig(deadband=0.0, vdi_scale=1e-4))
    k_default = 1.0 / V_REF
    assert b[1000] == pytest.approx(a[1000] * 1e-4 / k_default, rel=1e-12)


# ------------------------------------------------------------------ vrei

DT_BIN = 2.0 ** -14   # exact binary grid so the closed forms are exact
N_BIN = 4096
V_PE = 5872.0         # 128 V below reference


def drive(tracker, values):
    for k, val in enumerate(values, start=1):
        tracker.update(k * DT_BIN, val)
    tracker.mark(len(values) * DT_BIN)
    return tracker.final()


def test_vrei_step_recovery_exactly_one():
    tr = VreiTracker(V_REF)
    tr.begin(0.0, V_PE, v_at_tr=V_REF)
    assert drive(tr, [V_REF] * N_BIN) == 1.0


def test_vrei_frozen_at_v_pe_exactly_zero():
    tr = VreiTracker(V_REF)
    tr.begin(0.0, V_PE)
    assert drive(tr, [V_PE] * N_BIN) == 0.0


def test_vrei_linear_ramp_exactly_half():
    tr = VreiTracker(V_REF)
    tr.begin(0.0, V_PE)
    step = (V_REF - V_PE) / N_BIN
    value = drive(tr, [V_PE + step * k for k in range(1, N_BIN + 1)])
    assert abs(value - 0.5) <= 1e-6
    assert value == 0.5


def test_vrei_overshoot_mirrors_identical():
    pe_hi = 2.0 * V_REF - V_PE
    step = (V_REF - V_PE) / N_BIN
    cases = {
        "step": ([V_REF] * N_BIN, V_REF),
        "frozen": ([pe_hi] * N_BIN, None),
        "ramp": ([pe_hi - step * k for k in range(1, N_BIN + 1)], None),
    }
    expect = {"step": 1.0, "frozen": 0.0, "ramp": 0.5}
    for name, (vals, anchor) in cases.items():
        tr = VreiTracker(V_REF)
        tr.begin(0.0, pe_hi, v_at_tr=anchor)
        assert drive(tr, vals) == expect[name]


def test_vrei_degenerate_window_is_one():
    tr = VreiTracker(V_REF)
    tr.begin(0.0, V_PE)
    tr.mark(0.0)  # t_pr == t_r: instantaneous recovery convention
    assert tr.final() == 1.0


def test_vrei_within_unit_interval_for_monotone_recovery():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(10, 200))
        rise = np.sort(rng.uniform(0.0, 1.0, n))
        tr = VreiTracker(V_REF)
        tr.begin(0.0, V_PE)
        for k in range(n):
            tr.update((k + 1) * 1e-3, V_PE + (V_REF - V_PE) * rise[k])
        tr.mark(n * 1e-3)
        assert 0.0 <= tr.final() <= 1.0


# --------------------------------------------------------- finalize/report

def test_vshape_complete_report_values():
    t, v = vshape_trace()
    rv, _, _, _, reports = score_trace(t, v, V_REF, MetricConfig())
    r = reports[0]
    assert r.vrei == pytest.approx(0.47, abs=1e-9)
    assert r.delta_rv is not None and r.delta_rv > 0.0
    assert r.vdi_peak > 0.0


def test_flat_trace_no_report():
    t = np.arange(500) * 1e-3
    v = np.full(500, 6000.0)
    _, _, _, _, reports = score_trace(t, v, V_REF, MetricConfig())
    assert reports == []


def test_truncated_recovery_reports_unresolved():
    t, v = vshape_trace()
    cut = np.searchsorted(t, 1.25)  # mid-recovery
    _, _, _, _, reports = score_trace(t[:cut], v[:cut], V_REF, MetricConfig())
    assert len(reports) == 1
    r = reports[0]
    assert not r.resolved
    assert r.t_pr is None and r.vrei is None
    assert r.t_r == pytest.approx(1.2)
    assert r.v_pe == 5900.0


def test_truncated_degradation_reports_unresolved():
    t, v = vshape_trace()
    cut = np.searchsorted(t, 1.1)  # still degrading
    _, _, _, _, reports = score_trace(t[:cut], v[:cut], V_REF, MetricConfig())
    assert len(reports) == 1
    assert not reports[0].resolved
    assert reports[0].t_r is None and reports[0].v_pe is None


# --------------------------------------------------- streaming vs batch

def test_streaming_equals_batch_on_simulated_event():
    """Differential oracle on a genuine plant transient, not a synthetic."""
    from dataclasses import replace

    from dcres import scenario as scn_mod
    from dcres import sim
    from dcres.sim import Event, EventKind

    s = replace(scn_mod.default_scenario(), horizon=0.3,
                events=(Event(at=0.05, kind=EventKind.LOAD_STEP, power=14e6),))
    trace = sim.collect(s)
    cfg = s.metrics
    rv, vdi, vrei, phase, reports = score_trace(trace.t, trace.v_t, V_REF,
                                                cfg)

    rv_ref = batch_rv_curve(trace.t, trace.v_t, V_REF, cfg.deadband)
    assert np.max(np.abs(rv - rv_ref)) <= 1e-12 * max(rv_ref.max(), 1e-30)

    ph_ref, evs = scan_phases(trace.t, trace.v_t, V_REF, cfg.deadband,
                              cfg.restore_band, cfg.hold)
    assert np.array_equal(phase, ph_ref)

    vdi_ref = batch_vdi_curve(trace.t, trace.v_t, V_REF, ph_ref)
    assert np.max(np.abs(vdi - vdi_ref)) <= 1e-12 * max(vdi_ref.max(), 1e-30)

    assert len(reports) == len([e for e in evs if e["resolved"]]) == 1
    ev = evs[0]
    want = batch_vrei(trace.t, trace.v_t, V_REF, ev["v_pe"], ev["k_r"],
                      ev["k_pr"])
    assert reports[0].vrei == pytest.approx(want, rel=1e-12)
    assert reports[0].t_d == ev["t_d"]
    assert reports[0].t_r == ev["t_r"]
    assert reports[0].t_pr == ev["t_pr"]


def test_streaming_equals_batch_on_synthetic_event():
    t, v = vshape_trace()
    cfg = MetricConfig()
    rv, vdi, vrei, phase, reports = score_trace(t, v, V_REF, cfg)

    rv_ref = batch_rv_curve(t, v, V_REF, cfg.deadband)
    scale = max(rv_ref.max(), 1e-30)
    assert np.max(np.abs(rv - rv_ref)) <= 1e-12 * scale

    ph_ref, evs = scan_phases(t, v, V_REF, cfg.deadband, cfg.restore_band,
                              cfg.hold)
    assert np.array_equal(phase, ph_ref)

    vdi_ref = batch_vdi_curve(t, v, V_REF, ph_ref)
    vscale = max(vdi_ref.max(), 1e-30)
    assert np.max(np.abs(vdi - vdi_ref)) <= 1e-12 * vscale

    ev = evs[0]
    want = batch_vrei(t, v, V_REF, ev["v_pe"], ev["k_r"], ev["k_pr"])
    assert reports[0].vrei == pytest.approx(want, rel=1e-12)


def test_tracker_concatenation_matches_single_pass():
    t, v = vshape_trace()
    whole = ResilienceTracker(V_REF, MetricConfig())
    split = ResilienceTracker(V_REF, MetricConfig())
    out_a = [whole.update(t[k], v[k]) for k in range(t.size)]
    cut = 700
    out_b = [split.update(t[k], v[k]) for k in range(cut)]
    out_b += [split.update(t[k], v[k]) for k in range(cut, t.size)]
    assert out_a == out_b
    assert whole.finish() == split.finish()


def test_tracker_state_copy_chains():
    t, v = vshape_trace()
    cut = 1100  # mid-degradation
    a = ResilienceTracker(V_REF, MetricConfig())
    for k in range(cut):
        a.update(t[k], v[k])
    b = copy.deepcopy(a)
    tail_a = [a.update(t[k], v[k]) for k in range(cut, t.size)]
    tail_b = [b.update(t[k], v[k]) for k in range(cut, t.size)]
    assert tail_a == tail_b
    assert a.finish() == b.finish()
