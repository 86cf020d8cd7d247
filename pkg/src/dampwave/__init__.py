"""Numerical laboratory for the damped wave equation on asymptotically Euclidean space.

Radial finite-difference operators per spherical-harmonic sector, weighted
low-frequency resolvent scans, Crank-Nicolson time evolution, free-wave
propagators and an audit of the dilation generator as a conjugate operator.
"""

from .coefficients import CoefficientProfile, ProfileError, build_profile, seminorm
from .evolution import (DecayReport, evolve, fourier_synthesis_crosscheck, profile_comparison,
                        predicted_exponents)
from .freewave import FreePropagator, free_solution, huygens_residual, poly_bump, smooth_bump
from .mourre import commutator_refinement, eta_scan, hypothesis_report, mourre_grid, mourre_positivity
from .radial import SectorGrid, SectorOperator, assemble_laplacian, assemble_multiplier
from .resolvent import ResolventEngine, derivative_terms, expand_ir, weighted_norm
from .scaling import (CONSISTENT, INCONCLUSIVE, VIOLATION, ScalingReport, ScanSpec, scan_resolvent, scan_theta,
                      scan_weight, theorem_scans)

__version__ = "0.1.0"

__all__ = [
    "CONSISTENT", "INCONCLUSIVE", "VIOLATION", "CoefficientProfile", "DecayReport", "FreePropagator",
    "ProfileError", "ResolventEngine", "ScalingReport", "ScanSpec", "SectorGrid", "SectorOperator",
    "assemble_laplacian", "assemble_multiplier", "build_profile", "commutator_refinement", "derivative_terms",
    "eta_scan", "evolve", "expand_ir", "fourier_synthesis_crosscheck", "free_solution", "huygens_residual",
    "hypothesis_report", "mourre_grid", "mourre_positivity", "poly_bump", "predicted_exponents",
    "profile_comparison", "scan_resolvent", "scan_theta", "scan_weight", "seminorm", "smooth_bump",
    "theorem_scans", "weighted_norm",
]
