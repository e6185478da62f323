"""Agent-based simulator of domestic violence in sampled household populations."""

from .domain import (AreaProfile, Family, Gender, PersonAgent, RunMetrics, SimParams,
                     ValidationError, VictimGroup)

__version__ = "0.1.0"
