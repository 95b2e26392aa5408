"""Two-tier energy-minimising offloading of sequential tasks in vehicular networks.

Vehicle tier: NV-HV matching followed by a closed-form split/delay/frequency
allocation per pair.  RSU tier: joint split, V2I bandwidth, delay and RSU
frequency allocation for the NVs left unmatched.
"""

from .baselines import PolicyId, run_tier1_baseline, run_tier2_baseline
from .config import Config, load
from .model import ChannelParams, Role, Rsu, SequentialTask, Subtask, Vehicle
from .numerics import lambert_w0
from .scenario import ScenarioConfig, generate

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "Config", "PolicyId", "Role", "Rsu", "ScenarioConfig",
    "SequentialTask", "Subtask", "Vehicle", "generate", "lambert_w0", "load",
    "run_tier1_baseline", "run_tier2_baseline",
]
