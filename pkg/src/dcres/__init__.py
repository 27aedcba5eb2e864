"""Reduced-order MVDC microgrid simulation with streaming resilience metrics.

Typical use::

    from dcres import scenario, sim, metrics

    study = scenario.two_event_study()
    trace = sim.collect(study)
    rv, vdi, vrei, phase, reports = metrics.score_trace(
        trace.t, trace.v_t, study.params.v_ref, study.metrics)
"""

from .errors import (DcresError, InvalidEvent, NoEquilibrium,
                     NonMonotoneTime, NoOnlineSources, ParseError,
                     ValidationError, VoltageFloor)
from .metrics import (EventReport, MetricConfig, Phase, PhaseTracker,
                      ResilienceTracker, RvTracker, TrapezoidAccumulator,
                      VdiTracker, VreiTracker, score_trace)
from .plant import (PlantState, SystemParams, UnitKind, UnitParams,
                    derivatives, droop_equilibrium, equilibrium_state,
                    equivalent_droop, finite_difference_jacobian,
                    secondary_delta)
from .scenario import (Scenario, SweepSpec, apply_override, default_params,
                       default_scenario, inertia_sweep_study, load_scenario,
                       parse_scenario, scenario_digest, serialize_scenario,
                       sweep_variants, two_event_study)
from .sim import (Event, EventKind, RunTrace, Sample, apply_event, collect,
                  run, step)

__version__ = "0.1.0"
