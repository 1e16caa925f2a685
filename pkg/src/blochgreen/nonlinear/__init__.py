"""Nonlinear model problems: the u^q heat equation and the phase-modulation machinery."""

from .heat import (DecayReport, InitialData, decay_report_heat, make_initial_data,
                   step_heat_q)
from .inequalities import inequality_suite
from .modulation import ModulationState, modulation_pipeline, split_green

__all__ = ["DecayReport", "InitialData", "decay_report_heat", "make_initial_data",
           "step_heat_q", "inequality_suite", "ModulationState", "modulation_pipeline",
           "split_green"]
