"""Fast spectral recovery algorithms: planted sparse vectors in random
subspaces, overcomplete random 3-tensor decomposition, and spiked tensor
PCA, with seeded instance generators, brute-force oracles, and a CLI
benchmark harness."""

from .instances import (
    DecompInstance,
    SpikeInstance,
    SubspaceInstance,
    gen_overcomplete,
    gen_planted_sparse,
    gen_spiked,
)
from .overcomplete import (
    AttemptOutcome,
    DecompConfig,
    DecompositionReport,
    attempt,
    cubic_check,
    decompose_all,
    fast_matvec_M,
    refine_power_iteration,
)
from .planted_sparse import PsvResult, centered_leverage_matrix, recover_sparse_vector
from .tensor_core import (
    NumericError,
    PowerIterReport,
    PowerIterSettings,
    SymPreconditioner,
    Tensor3,
    flatten3,
    partial_trace_first,
    power_iteration,
    precondition_apply,
    reshape_vec_to_matrix,
    top_singular_pairs,
)
from .tensor_pca import TpcaResult, partial_trace_matrix, recover_spike

__version__ = "0.1.0"

__all__ = [
    "AttemptOutcome",
    "DecompConfig",
    "DecompInstance",
    "DecompositionReport",
    "NumericError",
    "PowerIterReport",
    "PowerIterSettings",
    "PsvResult",
    "SpikeInstance",
    "SubspaceInstance",
    "SymPreconditioner",
    "Tensor3",
    "TpcaResult",
    "attempt",
    "centered_leverage_matrix",
    "cubic_check",
    "decompose_all",
    "fast_matvec_M",
    "flatten3",
    "gen_overcomplete",
    "gen_planted_sparse",
    "gen_spiked",
    "partial_trace_first",
    "partial_trace_matrix",
    "power_iteration",
    "precondition_apply",
    "recover_sparse_vector",
    "recover_spike",
    "refine_power_iteration",
    "reshape_vec_to_matrix",
    "top_singular_pairs",
]
