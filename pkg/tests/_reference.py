"""Independent batch oracles for the differential tests.

Everything here recomputes metrics over a whole recorded trace using
plain vectorized numpy (different accumulation order and code path from
the streaming trackers). Tests compare the one-pass engine against these.
"""

import numpy as np


def batch_trapezoid_uniform(f, dx):
    """Closed composite trapezoid rule for a uniform grid."""
    f = np.asarray(f, dtype=float)
    return dx / 2.0 * (f[0] + 2.0 * f[1:-1].sum() + f[-1])


def clipped_deviation(v, v_ref, deadband_frac):
    g = np.abs(v_ref - np.asarray(v, dtype=float))
    g[g <= deadband_frac * v_ref] = 0.0
    return g


def batch_rv_total(t, v, v_ref, deadband_frac):
    g = clipped_deviation(v, v_ref, deadband_frac)
    return np.trapezoid(g, t)


def batch_rv_curve(t, v, v_ref, deadband_frac):
    g = clipped_deviation(v, v_ref, deadband_frac)
    panels = 0.5 * (g[1:] + g[:-1]) * np.diff(t)
    return np.concatenate(([0.0], np.cumsum(panels)))


def scan_phases(t, v, v_ref, deadband_frac=5e-4, restore_frac=1e-3,
                hold=0.05):
    """Whole-trace phase scan; returns (phase array, event dicts).

    Index-based reimplementation of the documented detection rules,
    independent of the streaming state machine.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    db = deadband_frac * v_ref
    rb = restore_frac * v_ref
    adv = np.abs(v - v_ref)
    n = t.size
    phase = np.zeros(n, dtype=int)
    events = []

    STEADY, DEGRADING, RECOVERING = 0, 1, 2
    state = STEADY
    ev = None
    ext = None  # index of the running extremum
    cand = None

    for k in range(n):
        if state == STEADY:
            if adv[k] > db:
                state = DEGRADING
                ev = {"k_d": k, "t_d": t[k], "k_r": None, "t_r": None,
                      "k_pr": None, "t_pr": None, "v_pe": None,
                      "resolved": False}
                ext = k
        elif state == DEGRADING:
            if adv[k] > adv[ext]:
                ext = k
            elif ((v[ext] < v_ref and v[k] > v[k - 1])
                  or (v[ext] > v_ref and v[k] < v[k - 1])):
                state = RECOVERING
                ev["k_r"] = k - 1
                ev["t_r"] = t[k - 1]
                ev["v_pe"] = v[ext]
                cand = k if adv[k] <= rb else None
        else:
            if adv[k] > abs(ev["v_pe"] - v_ref):
                state = DEGRADING
                ext = k
                ev["k_r"] = ev["t_r"] = ev["v_pe"] = None
                cand = None
            else:
                if adv[k] <= rb:
                    if cand is None:
                        cand = k
                elif cand is not None:
                    cand = None
                if cand is not None and t[k] - t[cand] >= hold - 1e-12:
                    ev["k_pr"] = cand
                    ev["t_pr"] = t[cand]
                    ev["resolved"] = True
                    events.append(ev)
                    state = STEADY
                    ev = None
                    cand = None
        phase[k] = state
    if ev is not None:
        events.append(ev)
    return phase, events


def batch_vdi_curve(t, v, v_ref, phase, scale=None):
    """Rectangle-sum degradation index over each contiguous degrading run."""
    t = np.asarray(t, dtype=float)
    adv = np.abs(np.asarray(v, dtype=float) - v_ref)
    k_scale = (1.0 / v_ref) if scale is None else scale
    vdi = np.zeros(t.size)
    k = 0
    n = t.size
    while k < n:
        if phase[k] != 1:
            k += 1
            continue
        k_d = k
        while k < n and phase[k] == 1:
            k += 1
        k_end = k  # one past the run
        s = 0.0
        for j in range(k_d, k_end):
            if j > 0:
                s += adv[j] * (t[j] - t[j - 1])
            denom = v_ref * (t[j] - t[k_d])
            if denom > 0.0:
                vdi[j] = k_scale * s / denom
    return vdi


def batch_vrei(t, v, v_ref, v_pe, k_r, k_pr):
    """Restoration efficiency from the trace between two sample indices."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if k_pr == k_r:
        return 1.0
    num = np.trapezoid(v[k_r:k_pr + 1] - v_pe, t[k_r:k_pr + 1])
    return num / ((v_ref - v_pe) * (t[k_pr] - t[k_r]))
