"""Eigenvalue estimation for non-unitary evolutions produced by repeated
post-selected measurements on a bipartite system."""
from .engine import (
    MpeaRun, TrajectorySample, init_run, run_post_selected, sample_trajectories, step, survival_curve,
)
from .errors import (
    AmbiguousQuadrant, CutoffTooSmall, Defective, DimensionMismatch, InsufficientContrast,
    InvalidDensityMatrix, MpeaError, NonInvertible, NotHermitian, ScenarioError, ZeroProbability,
)
from .evolution import (
    NonUnitaryEvolution, NonUnitarySpectrum, classical_spectrum, compose, construct_vb,
    construct_vb_spectral, from_unitary,
)
from .linalg import general_eig, hermitian_eig, matrix_exp_hermitian, tensor_product
from .models import BipartiteSystem, build_axial_symmetry, build_generic, build_jaynes_cummings
from .readout import (
    EigenEstimate, assemble_eigenvalue, build_qk, mqft_extract_bits, qst_estimate, qst_estimate_a,
    qst_estimate_b,
)
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"
