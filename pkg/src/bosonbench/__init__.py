"""Bosonic-code benchmarking toolkit.

Builds finite-energy GKP and number-phase codewords in a truncated Fock
space, scores them with a near-optimal error-correction fidelity under a
combined loss/dephasing Kraus channel, optimizes code parameters, and
maps which code family wins across a noise grid.
"""

from .channel import KrausChannel, NoisePoint, compose_channel, estimate_memory
from .codes import (
    FAMILY_GKP,
    FAMILY_NP,
    FAMILY_TRIVIAL,
    CodePair,
    GkpParams,
    NpParams,
    build_gkp,
    build_np,
    build_trivial_fock,
)
from .errors import BosonBenchError
from .optimizer import (
    CmaState,
    OptimizationRecord,
    SearchSpace,
    cma_ask,
    cma_init,
    cma_tell,
    default_space,
    optimize_code,
    repeatability_report,
)
from .qec import (
    EvalOptions,
    FidelityResult,
    baseline_fidelity,
    evaluate_pair,
    near_optimal_fidelity,
    qec_matrix,
    transpose_channel_oracle,
)
from .sweep import (
    NoiseGrid,
    SweepBudget,
    SweepResult,
    desk_grid,
    extract_boundary,
    paper_grid,
    run_sweep,
    shape_diagnostics,
    strict_regions,
    write_sweep_outputs,
)

__version__ = "0.1.0"

__all__ = [
    "BosonBenchError",
    "CmaState",
    "CodePair",
    "EvalOptions",
    "FAMILY_GKP",
    "FAMILY_NP",
    "FAMILY_TRIVIAL",
    "FidelityResult",
    "GkpParams",
    "KrausChannel",
    "NoiseGrid",
    "NoisePoint",
    "NpParams",
    "OptimizationRecord",
    "SearchSpace",
    "SweepBudget",
    "SweepResult",
    "baseline_fidelity",
    "build_gkp",
    "build_np",
    "build_trivial_fock",
    "cma_ask",
    "cma_init",
    "cma_tell",
    "compose_channel",
    "default_space",
    "desk_grid",
    "estimate_memory",
    "evaluate_pair",
    "extract_boundary",
    "near_optimal_fidelity",
    "optimize_code",
    "paper_grid",
    "qec_matrix",
    "repeatability_report",
    "run_sweep",
    "shape_diagnostics",
    "strict_regions",
    "transpose_channel_oracle",
    "write_sweep_outputs",
    "__version__",
]
