"""Scoring recorded voltage traces without running the plant.

The metric engine only needs (t, v_t) pairs, so any logged or externally
produced trace can be scored. This demo feeds it two traces: the bundled
V-shape fixture (a textbook dip/recover profile with hand-checkable
numbers) and a synthesized ringing trace, then prints the event reports.

Run:  python demos/03_replay_scoring.py
"""

import numpy as np

from dcres import metrics
from dcres.cli import read_trace
from dcres.metrics import MetricConfig
from dcres.scenario import fixture_path

V_REF = 6000.0

print("--- bundled V-shape fixture ---")
t, v = read_trace(fixture_path("vshape_trace.csv"))
rv, vdi, vrei, phase, reports = metrics.score_trace(t, v, V_REF,
                                                    MetricConfig())
r = reports[0]
print(f"t_d = {r.t_d:.3f} s (first sample beyond the 3 V deadband)")
print(f"t_r = {r.t_r:.3f} s at the 5900 V trough, t_pr = {r.t_pr:.3f} s "
      f"(re-entry into the 6 V band)")
print(f"vrei = {r.vrei:.4f}  <- linear climb, cut at the band edge: "
      f"0.5 * (100 - 6) / 100")

print("\n--- synthesized damped ringing ---")
ts = np.arange(0, 1.2, 1e-4)
dev = np.where(ts >= 0.3,
               80.0 * np.exp(-(ts - 0.3) / 0.08) * np.cos(40.0 * (ts - 0.3)),
               0.0)
vs = V_REF - dev
rv2, vdi2, vrei2, phase2, reports2 = metrics.score_trace(ts, vs, V_REF,
                                                         MetricConfig())
for n, r in enumerate(reports2, 1):
    print(f"event {n}: t_d={r.t_d:.4f} t_r={r.t_r:.4f} "
          f"t_pr={r.t_pr if r.t_pr is None else round(r.t_pr, 4)} "
          f"v_pe={r.v_pe:.2f} vrei={r.vrei if r.vrei is None else round(r.vrei, 3)}")
print(f"lifetime rv after the ringing: {rv2[-1]:.4f} V*s")
print("note: ringing that re-crosses the extremum re-opens the degradation,")
print("so one physical disturbance can produce several phase cycles")
