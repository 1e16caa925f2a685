"""Bloch/Floquet analysis of periodic-coefficient parabolic operators."""

from .profiles import (WaveProfile, make_constant_profile, make_manufactured_profile,
                       load_profile, save_profile)
from .floquet import FloquetSystem, solution_operator, monodromy, evans, winding_number

__version__ = "0.1.0"
