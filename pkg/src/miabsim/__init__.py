"""miabsim: slot-level system simulator for mobile IAB networks.

Compares RSRP-only and load-aware topology adaptation on a three-donor
Madrid-grid bus scenario: connection time per donor, buffer evolution,
and UL/DL throughput distributions.
"""

from .config import RunConfig, parse_config, preset_config
from .engine import SimState, run_simulation

__version__ = "0.1.0"

__all__ = ["RunConfig", "SimState", "parse_config", "preset_config", "run_simulation", "__version__"]
