"""Subsystem-embedding coupled-cluster engine for small fermionic models.

Determinant-level Fock-space algebra, CCSD-style amplitude solvers, the
active-space effective Hamiltonians with their multi-subsystem flow,
and frequency-dependent Green's functions checked against exact
diagonalization.
"""

__version__ = "0.1.0"

from .fockspace import (  # noqa: F401
    DOWN,
    UP,
    SectorBasis,
    SecondQuantizedOp,
    StateVector,
    build_sector,
    build_spin_sector,
    det_from_occ,
    det_from_string,
    det_to_string,
    number_op,
    projector,
    remap_orbitals,
    sq_op,
    to_matrix,
)
from .cluster import (  # noqa: F401
    ActiveSpace,
    AmplitudeSet,
    Excitation,
    SubsystemSpec,
    exp_map,
    lambda_from_s,
    s_from_lambda,
    similarity_transform,
    split,
)
from .ccsolver import (  # noqa: F401
    CCSolution,
    ConvergenceError,
    SolverConfig,
    cluster_analyze_fci,
    solve_lambda,
    solve_s_ext,
    solve_t,
)
from .sesflow import (  # noqa: F401
    FLAVOR_BAR,
    FLAVOR_DOUBLEBAR,
    FLAVOR_TILDE,
    build_heff,
    diagonalize_heff,
    double_occupancy,
    extract_internal,
    flow_iterate,
)
from .ccgf import (  # noqa: F401
    FrequencyGrid,
    GreenFunctionResult,
    ccgf_matrix,
    gf_block_matrix,
    gf_effective,
    gf_split,
    sector_hbar,
    spectral_function,
    uniform_grid,
)
from .model import (  # noqa: F401
    EDResult,
    SiamParams,
    build_composite,
    build_siam,
    exact_diagonalize,
    lehmann_gf,
    lehmann_poles,
    paper_params,
    siam_reference,
)
