"""Desk-scale tomato-harvesting simulation suite.

Subpackages: linkage mechanism and virtual-work torque (mechanism), plant
behavior (plant), PID force control (control), 5-DOF arm planning (arm),
synthetic perception metrics (perception), picking-cycle Monte Carlo
(harvest), plus the shared config layer and CLI.
"""

__version__ = "0.1.0"
