"""Exception types shared across the package."""


class DcresError(Exception):
    """Base class for all errors raised by dcres."""


class ParseError(DcresError):
    """Scenario or trace text could not be parsed (bad syntax, unknown key)."""


class ValidationError(DcresError):
    """A scenario violates one or more invariants.

    Collects every violation so a bad file is reported in one pass.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NoOnlineSources(DcresError):
    """Every droop-participating source branch is offline."""


class NoEquilibrium(DcresError):
    """The requested load exceeds the maximum power the droop can deliver."""


class VoltageFloor(DcresError):
    """Bus voltage fell below the collapse floor (constant-power-load guard)."""

    def __init__(self, t, v_t, floor):
        self.t = t
        self.v_t = v_t
        self.floor = floor
        super().__init__(
            f"bus voltage {v_t:.3f} V fell below floor {floor:.3f} V at t={t:.6f} s"
        )


class InvalidEvent(DcresError):
    """An event cannot be applied to the current topology."""


class NonMonotoneTime(DcresError):
    """A sample stream or trace file has non-increasing timestamps."""
