"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid parameter or scenario value.

    ``field`` carries the dotted path of the offending entry when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class SimulationFault(RuntimeError):
    """Raised inside a run when the physical state becomes illegal."""

    kind = "fault"


class OverchargeFault(SimulationFault):
    kind = "overcharge"


class CapabilityFault(SimulationFault):
    """A setpoint demands more current than the converter can deliver."""

    kind = "capability"

    def __init__(self, demand, max_current):
        self.demand = demand
        self.max_current = max_current
        super().__init__(
            f"demand exceeds converter capability: |{demand:.3f} A| > max_current {max_current:.3f} A"
        )


class OvervoltageFault(SimulationFault):
    kind = "overvoltage"


class PhaseRangeError(ValueError):
    """Phase shift outside the converter's allowed range."""
