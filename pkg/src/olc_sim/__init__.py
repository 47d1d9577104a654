"""Load-side primary frequency control: closed-loop network simulator and optimal load control solver."""

from .costs import CostFunction, QuadraticCost, load_response, phi_derivative, phi_term
from .dynamics import (
    EquilibriumReference,
    IntegratorConfig,
    SystemState,
    Trajectory,
    initial_flows_from_angles,
    kkt_residuals,
    lyapunov_value,
    make_state,
    rhs,
    simulate,
    solve_load_frequencies,
    step,
)
from .network import Bus, Line, Network, build_network, compute_line_stiffness, is_tree, reduced_incidence
from .olc import (
    OlcSolution,
    brute_force_oracle,
    equilibrium_flows,
    equilibrium_injections,
    recover_primal,
    solve,
    solve_dual,
)

__version__ = "0.1.0"
