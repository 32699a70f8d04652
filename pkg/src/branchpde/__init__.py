"""Stochastic branching particle solver for advection-diffusion-reaction PDEs on the torus."""

__version__ = "0.1.0"

from .errors import BranchPDEError, ConfigError, ModelError, PopulationExplosionError, SolverBlowupError
from .torus import TorusDomain
from .spectral import SpectralField, basis_eval, project_function, project_particles, sobolev_norm_sq
from .particles import MHParams, ParticleSet, compute_Z, sample_initial, sample_rejection, total_mass_estimate
from .branching import birth_death, sample_poisson, sde_propagate
from .models import KSModel, ScalarModel, get_preset
from .solver import SolverConfig, run_ks, run_scalar, step_ks, step_scalar
from .record import RunRecord

__all__ = [
    "BranchPDEError", "ConfigError", "ModelError", "PopulationExplosionError", "SolverBlowupError",
    "TorusDomain", "SpectralField", "basis_eval", "project_function", "project_particles",
    "sobolev_norm_sq", "MHParams", "ParticleSet", "compute_Z", "sample_initial", "sample_rejection",
    "total_mass_estimate", "birth_death", "sample_poisson", "sde_propagate", "KSModel",
    "ScalarModel", "get_preset", "SolverConfig", "run_ks", "run_scalar", "step_ks", "step_scalar",
    "RunRecord",
]
