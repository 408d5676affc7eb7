"""Koopman spectral analysis from snapshot data.

Approximates Koopman eigenvalues, eigenfunctions, and modes by a Galerkin
projection onto a dictionary of observables, with standard DMD as the
linear-dictionary special case. Ships the dictionary families, benchmark
systems, and reference oracles used to validate the method end to end.
"""

from .numerics import (
    DEFAULT_RTOL,
    KMeansResult,
    SvdResult,
    TwoSidedEig,
    eig_two_sided,
    fit_loglog_slope,
    kmeans,
    svd,
    truncated_pinv,
)
from .dictionaries import (
    BoxTree,
    Dictionary,
    FullStateWeights,
    box_tree_from_leaves,
    build_box_tree,
    from_descriptor,
    fourier_pair_dictionary,
    full_state_weights,
    hermite_dictionary,
    spectral_element_dictionary,
    state_dictionary,
    thin_plate_rbf_dictionary,
)
from .core import (
    ConvergenceResult,
    DegenerateDictionaryError,
    EigenpairReference,
    GramPair,
    KoopmanDecomposition,
    SnapshotSet,
    accumulate_gram,
    convergence_study,
    decompose,
    dmd,
    evaluate_eigenfunctions,
    koopman_matrix,
    predict,
    residual,
)
from .io import (
    DecompositionArchive,
    ExperimentConfig,
    compare_to_oracle,
    eval_grid,
    load_archive,
    read_config,
    read_snapshots,
    run_experiment,
    write_archive,
    write_config,
    write_snapshots,
)
from . import benchmarks, kernels

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_RTOL",
    "SvdResult",
    "TwoSidedEig",
    "KMeansResult",
    "svd",
    "truncated_pinv",
    "eig_two_sided",
    "kmeans",
    "fit_loglog_slope",
    "Dictionary",
    "BoxTree",
    "FullStateWeights",
    "hermite_dictionary",
    "thin_plate_rbf_dictionary",
    "spectral_element_dictionary",
    "state_dictionary",
    "fourier_pair_dictionary",
    "build_box_tree",
    "box_tree_from_leaves",
    "from_descriptor",
    "full_state_weights",
    "SnapshotSet",
    "GramPair",
    "KoopmanDecomposition",
    "DegenerateDictionaryError",
    "EigenpairReference",
    "ConvergenceResult",
    "accumulate_gram",
    "koopman_matrix",
    "decompose",
    "evaluate_eigenfunctions",
    "residual",
    "predict",
    "dmd",
    "convergence_study",
    "ExperimentConfig",
    "DecompositionArchive",
    "read_snapshots",
    "write_snapshots",
    "read_config",
    "write_config",
    "load_archive",
    "write_archive",
    "run_experiment",
    "compare_to_oracle",
    "eval_grid",
    "benchmarks",
    "kernels",
]
