"""shearquench: numerical laboratory for flame quenching by periodic shear flows."""

from .model import PhysParams, IgnitionReaction, InitialData, build_reaction, validate_reaction
from .profiles import (ShearProfile, make_profile, normalize_mean_zero,
                       longest_plateau, scale_profile)

__version__ = "0.1.0"
