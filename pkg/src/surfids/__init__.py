"""Integrated density of surface states for random magnetic Schrödinger operators.

Submodules:

* :mod:`surfids.magnetic`: field invariants, Landau levels, free IDS;
* :mod:`surfids.hamiltonians`: finite-difference operators and assembly;
* :mod:`surfids.disorder`: alloy-type potentials and reduced potentials;
* :mod:`surfids.counting`: eigenvalue counting and IDSS estimators;
* :mod:`surfids.analysis`: two-sided estimates and Lifshits fits;
* :mod:`surfids.cli`: configuration-driven studies.
"""
from .errors import *  # noqa: F401,F403
from .magnetic import (
    CountingMeasure,
    LandauLadder,
    MagneticStructure,
    canonical_matrix,
    canonicalize_field,
    convolve_with_counting,
    free_ids,
    karamata_coefficient,
    landau_ladder,
    semiclassical_coefficient,
)
from .hamiltonians import (
    DeltaWell,
    ExplicitLevels,
    LatticeWindow,
    assemble,
    build_transverse,
    ground_energy,
    harmonic,
    magnetic_translate,
    poschl_teller,
    solve_parallel,
)
from .disorder import (
    CouplingLaw,
    LongitudinalFactor,
    compact_profile,
    evaluate_potential,
    gaussian_profile,
    power_law_profile,
    reduce_site,
    reduced_field,
    sample_couplings,
    sup_bound,
)
from .counting import (
    EmpiricalCurve,
    SurfaceModel,
    convergence_study,
    count_below,
    idss_estimate,
    reduced_ids_estimate,
    superadditivity_check,
)
from .analysis import (
    fit_lifshits,
    global_sandwich,
    ground_edge_sandwich,
    internal_edge_sandwich,
    plateau_check,
)

__version__ = "0.1.0"
