"""
Decentralized optimization through dual smoothing.

Gossip operators, proximal atoms, smoothed conjugates, dual problem
transforms, an accelerated primal-dual solver for affinely constrained
problems and a synchronous message-passing simulator.
"""

from .apapc import (
    ApapcParams,
    ApapcState,
    DivergenceError,
    default_params,
    solve,
    solve_consensus_dual,
    solve_coupled_dual,
    solve_nonstrongly,
    step,
)
from .atoms import (
    FULL_SPACE,
    ConvexAtom,
    FeasibleSet,
    UnsupportedAtomError,
    atom_from_name,
    atom_huber,
    atom_indicator,
    atom_l1,
    atom_linear,
    atom_sq_l2,
    atom_zero,
    project_simplex,
    prox,
    proxv,
)
from .conjugate import (
    SmoothedConjugate,
    UnsupportedConjugateError,
    brute_force_conjugate,
    conjugate_grad,
    conjugate_value,
)
from .graphs import (
    Graph,
    GossipOperator,
    GraphError,
    build_graph,
    laplacian,
    lift_apply,
    spectral_constants,
    validate_gossip,
)
from .netsim import Network, ProtocolError, UnsupportedTopologyError, decentralized_matvec, run_decentralized
from .problems import (
    AffineConstrainedProblem,
    ConsensusProblem,
    CoupledProblem,
    ProblemError,
    double_dual_basis_pursuit,
    double_dual_mse,
    dualize_consensus,
    dualize_coupled,
    recover_primal,
    regularize,
)
from .reference import ReferenceSolution, kkt_direct, long_run
from .report import RunReport

__version__ = "0.1.0"
