"""Reliability, battery lifetime and operation control for grant-free LPWA IoT networks."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    InfeasibleError,
    LpwaError,
    NonMonotoneError,
    QuadratureError,
    SingularInputError,
    UnsupportedModelError,
)
from .model import (  # noqa: E402
    ActivityFactors,
    ChannelModel,
    EnergyModel,
    McControls,
    NetworkConfig,
    Scenario,
    TrafficClass,
)

__all__ = [
    "ActivityFactors",
    "ChannelModel",
    "ConfigError",
    "EnergyModel",
    "InfeasibleError",
    "LpwaError",
    "McControls",
    "NetworkConfig",
    "NonMonotoneError",
    "QuadratureError",
    "Scenario",
    "SingularInputError",
    "TrafficClass",
    "UnsupportedModelError",
    "__version__",
]
