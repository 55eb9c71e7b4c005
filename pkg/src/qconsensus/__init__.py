"""Event-triggered quantized average consensus over strongly connected digraphs."""

from .analysis import (
    check_invariants,
    check_mass_conservation,
    convergence_round,
    leading_mass_nodes,
    sweep,
    theoretical_bound_alg3,
)
from .engine import (
    Message,
    RunConfig,
    Trace,
    consensus_reached,
    detect_convergence,
    init_run,
    run,
    step_alg1,
    step_alg2,
    step_alg3,
)
from .graph import (
    Digraph,
    assign_priorities,
    build_digraph,
    gen_random_strongly_connected,
    gen_ring_directed,
    gen_ring_undirected,
    is_strongly_connected,
    uniform_probabilities,
)
from .protocol import Average, Mass, NodeState, StatePair, exact_average

__version__ = "0.1.0"
