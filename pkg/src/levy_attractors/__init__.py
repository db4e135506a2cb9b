"""Random attractors for SPDEs with additive Levy noise via an OU transformation."""

from .function_space import (BasisSpec, ConfigurationError, GelfandTriple, SpectralField,
                             build_triple, dual_norm, norms, pairing, v_norm)
from .levy_noise import NoisePath, NoiseSpec, increment, refine, sample_path, shift, trace_class_q
from .models import ConstantsRecord, ModelOperator, build_model, scaled
from .conditions import GateError, certify, check_admissibility
from .ou import OUConfig, StationarySection, birkhoff_average, stationary_section
from .flow import EnergyBound, FlowConfig, fit_energy_bound, solve_Z
from .attractor import TemperedFamily, absorption_radius, estimate_attractor, hausdorff_distance

__version__ = "0.1.0"
