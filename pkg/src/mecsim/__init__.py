"""Energy simulator and lookahead resource controller for an energy-harvesting edge server."""
from .traces import SystemParams, Trace
from .energy import ControlInput, EnergyBreakdown, VmAllocation
from .controller import SystemState
from .kernels import BACKEND

__all__ = ["SystemParams", "Trace", "ControlInput", "EnergyBreakdown", "VmAllocation",
           "SystemState", "BACKEND"]
__version__ = "0.1.0"
