"""Wasserstein barycenter solvers over entropic and exact optimal transport.

The package provides the transport primitives (exact LP with dual
potentials, log-domain Sinkhorn, closed-form entropic duals), four
barycenter solver families (projected SGD, stochastic mirror descent,
mirror prox on the saddle-point form, accelerated dual gradient), their
decentralized variants on a simulated gossip network, and an experiment
harness with a CLI.
"""

from .errors import (
    ConnectivityError,
    ConvergenceFailure,
    DomainError,
    InvalidInputError,
    ResourceLimitError,
)
from .measures import (
    BregmanPenalty,
    CostMatrix,
    CostVector,
    Histogram,
    TransportPlan,
    bregman_penalty_value,
    cost_matrix_grid,
    kl_divergence,
    load_histograms,
    project_simplex,
    save_histograms,
    smooth_to_interior,
)
from .ot import (
    DualPotentials,
    EntropicParams,
    OTSolution,
    entropic_dual_gradient,
    entropic_dual_gradient_sample,
    entropic_dual_value,
    entropic_ot_value,
    exact_ot,
    sinkhorn,
)
from .sa import MeasureStream, SAConfig, psgd_barycenter, smd_barycenter
from .saddle import (
    SaddleState,
    duality_gap,
    incidence_apply,
    incidence_apply_transpose,
    mirror_prox_wb,
    saddle_gradient_operator,
)
from .dual_accel import (
    BatchSchedule,
    accelerated_dual_solve,
    minibatch_dual_gradient,
    next_step_constants,
)
from .network import (
    GossipNetwork,
    Laplacian,
    SpectralInfo,
    Topology,
    complete_graph,
    consensus_gap,
    cycle_graph,
    erdos_renyi_graph,
    gossip_multiply,
    laplacian_of,
    path_graph,
    single_node,
    spectral,
    star_graph,
    topology_from_spec,
)
from .decentralized import (
    DecentralizedRunConfig,
    decentralized_dual_wb,
    decentralized_mirror_prox_wb,
)
from .gaussians import (
    GaussianFamilySpec,
    discretize_gaussian,
    gaussian_measure_stream,
    gen_gaussian_histograms,
    true_gaussian_barycenter,
    w2_distance_1d,
)
from .trace import IterateTrace
from .experiment import run_experiment

__version__ = "0.1.0"
