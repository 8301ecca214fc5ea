"""Quantum state redistribution toolkit: one-shot entropies, cost bounds and protocol simulation."""

__version__ = "0.1.0"

from .tensor import (  # noqa: E402
    DensityOperator,
    LayoutError,
    PureStateVector,
    StateError,
    SystemLayout,
    fidelity,
    partial_trace,
    purify,
    tensor,
    trace_distance,
)
from .sdp import SdpProblem, SdpSolution, SolverFailure, solve  # noqa: E402
from .entropies import (  # noqa: E402
    EntropyResult,
    cmi,
    conditional_entropy,
    dmax,
    dmax_smooth,
    frak_s,
    h0,
    h0_smooth,
    hmax_smooth,
    hmin,
    hmin_smooth,
    rel_entropy,
    rel_entropy_variance,
    von_neumann,
)
from .asymptotics import (  # noqa: E402
    ConsistencyError,
    CostReport,
    ExpansionCoefficients,
    decompose_delta,
    dmax_iid_exact_classical,
    dy_min_rate,
    dy_region,
    epsilon_prime,
    fqsw_costs,
    inv_norm_cdf,
    thm1_cost,
    thm2_expansion,
)
from .protocol import (  # noqa: E402
    MergeSummary,
    MergeTrialResult,
    RedistributionOutcome,
    construct_uhlmann_decoder,
    merge_stats,
    merge_trial,
    redistribute,
    write_trial_log,
)
from .states import bundled_example, load_state  # noqa: E402
