"""Exception and warning types shared across the simulator."""


class DomainError(ValueError):
    """Input is outside the physical or numerical domain of an operation."""


class CapacityError(ValueError):
    """Requested problem size exceeds a hard resource limit."""


class UnsupportedModelError(ValueError):
    """Requested configuration needs a model the simulator does not implement."""


class SimulationWarning(UserWarning):
    """Non-fatal condition worth flagging (soft limits, odd settings)."""


class MixerOverloadWarning(SimulationWarning):
    """Detector input exceeds the configured safe mixer level."""
