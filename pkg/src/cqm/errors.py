"""Exception types shared across the simulator."""


class CQMError(Exception):
    """Base class for all simulator errors."""


class InvalidArgumentError(CQMError, ValueError):
    pass


class OutOfRangeError(CQMError, ValueError):
    pass


class DegenerateStateError(CQMError, ValueError):
    """Raised when a quantity needs a normalizable state but trace is zero."""


class InvalidScheduleError(CQMError, ValueError):
    """The drive pulses do not form a single contiguous Pockels on-window."""


class InfeasibleScheduleError(CQMError, ValueError):
    """No drive timing puts every Sagnac traversal on a flat part of the waveform.

    ``traversal`` is the index k of the offending traversal at t = k * round_trip.
    """

    def __init__(self, message, traversal=None, constraint=None):
        super().__init__(message)
        self.traversal = traversal
        self.constraint = constraint


class ConfigError(CQMError, ValueError):
    """Bad experiment configuration. Carries the offending field and line if known."""

    def __init__(self, message, field=None, line=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)
        self.field = field
        self.line = line
