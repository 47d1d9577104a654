"""Centralized reference solver for the optimal load control problem.

The dual of the load control problem has a single scalar variable, the common
frequency deviation ``nu``. Its optimality condition is the network-wide power
balance ``sum_j d_j(nu) + D_j nu = sum_j P_m_j``, whose left side is strictly
increasing, so bisection finds the unique root without smoothness assumptions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .costs import phi_derivative, phi_term
from .network import Network, is_tree, reduced_incidence

DEFAULT_BRACKET = (-1.0, 1.0)
MAX_DOUBLINGS = 200
MAX_BISECTIONS = 200
BALANCE_RTOL = 1e-9
DEFAULT_WARN_THRESHOLD = 2 * math.pi * 0.5
MAX_ORACLE_BUSES = 3


class SolverError(RuntimeError):
    pass


class LargeDeviationWarning(UserWarning):
    pass


def load_responses(network: Network, nu):
    """Controllable load changes at every bus for per-bus frequencies ``nu``."""
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (network.n_bus,))
    if network.all_quadratic:
        alpha, lo, hi = network.quadratic_params
        return np.clip(alpha * nu, lo, hi)
    return np.array([c.response(v) for c, v in zip(network.costs, nu)])


def balance_residual(network: Network, nu: float) -> float:
    """``sum_j (d_j(nu) + D_j nu) - sum_j P_m_j``; strictly increasing in ``nu``."""
    return float(np.sum(load_responses(network, nu)) + nu * network.D.sum() - network.P_m.sum())


def solve_dual(network: Network, bracket=DEFAULT_BRACKET) -> float:
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError(f"invalid bracket {bracket}")
    g_lo = balance_residual(network, lo)
    g_hi = balance_residual(network, hi)
    for _ in range(MAX_DOUBLINGS):
        if g_lo <= 0.0 <= g_hi:
            break
        if g_lo > 0.0:
            lo = 2.0 * lo if lo < 0 else lo - (hi - lo)
            g_lo = balance_residual(network, lo)
        if g_hi < 0.0:
            hi = 2.0 * hi if hi > 0 else hi + (hi - lo)
            g_hi = balance_residual(network, hi)
    else:
        raise SolverError("could not bracket the dual optimum")
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi

    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = balance_residual(network, mid)
        if g_mid == 0.0:
            return mid
        if g_mid > 0.0:
            hi, g_hi = mid, g_mid
        else:
            lo, g_lo = mid, g_mid
    nu, g = (lo, g_lo) if abs(g_lo) <= abs(g_hi) else (hi, g_hi)
    if abs(g) > BALANCE_RTOL * max(1.0, abs(float(network.P_m.sum()))):
        raise SolverError(f"bisection stalled with balance residual {g:.3e}")
    return nu


def recover_primal(network: Network, nu_star: float):
    d_star = load_responses(network, nu_star)
    d_hat_star = network.D * nu_star
    return d_star, d_hat_star


def equilibrium_injections(network: Network, nu_star: float):
    """Net injection each bus must export at the optimum, ``-d_j - D_j nu + P_m_j``."""
    d_star, d_hat_star = recover_primal(network, nu_star)
    return network.P_m - d_star - d_hat_star


def objective(network: Network, d, d_hat) -> float:
    """Total disutility of controllable and frequency-sensitive load changes."""
    d = np.asarray(d, dtype=float)
    d_hat = np.asarray(d_hat, dtype=float)
    costs = sum(float(c(x)) for c, x in zip(network.costs, d))
    return costs + float(np.sum(d_hat**2 / (2.0 * network.D)))


def dual_objective(network: Network, nu) -> float:
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (network.n_bus,))
    return float(sum(phi_term(b.cost, b.D, b.P_m, v) for b, v in zip(network.buses, nu)))


def dual_gradient(network: Network, nu):
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (network.n_bus,))
    return np.array([phi_derivative(b.cost, b.D, b.P_m, v) for b, v in zip(network.buses, nu)])


@dataclass(frozen=True)
class EquilibriumFlows:
    """Equilibrium branch flows ``{P : C P = h}``.

    ``point`` is the unique member of the set that lies in the range of
    ``B C~^T``; ``null_basis`` rows span the null space of the reduced
    incidence matrix (empty for trees).
    """

    point: np.ndarray
    null_basis: np.ndarray
    tree: bool

    def contains(self, network: Network, P, atol=1e-6) -> bool:
        return float(np.max(np.abs(network.flow_balance(P) - network.flow_balance(self.point)), initial=0.0)) <= atol


def _weighted_solve(network, C_red, rhs):
    A = C_red @ (network.B[:, None] * C_red.T)
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as err:
        raise SolverError(f"reduced weighted Laplacian is singular: {err}") from None


def null_basis(C_red):
    if C_red.shape[1] == 0:
        return np.zeros((0, 0))
    _, s, vt = np.linalg.svd(np.asarray(C_red, dtype=float))
    rank = int(np.sum(s > 1e-10 * max(1.0, s.max(initial=0.0))))
    return vt[rank:]


def equilibrium_flows(network: Network, h_star, dropped_bus=None) -> EquilibriumFlows:
    h_star = np.asarray(h_star, dtype=float)
    C_red = reduced_incidence(network, dropped_bus).astype(float)
    keep = np.ones(network.n_bus, dtype=bool)
    keep[network.n_bus - 1 if dropped_bus is None else network.row(dropped_bus)] = False
    h_red = h_star[keep]
    tree = is_tree(network)
    if tree:
        try:
            point = np.linalg.solve(C_red, h_red)
        except np.linalg.LinAlgError as err:
            raise SolverError(f"reduced incidence matrix is singular: {err}") from None
    else:
        point = network.B * (C_red.T @ _weighted_solve(network, C_red, h_red))
    return EquilibriumFlows(point=point, null_basis=null_basis(C_red), tree=tree)


def limit_flow(network: Network, h_star, P0):
    """Flow limit reached from initial flows ``P0``.

    ``B^-1 P(t) - B^-1 P(0)`` stays in the row space of the incidence matrix,
    which pins down a single member of the equilibrium flow set.
    """
    P0 = np.asarray(P0, dtype=float)
    C_red = reduced_incidence(network).astype(float)
    h_red = np.asarray(h_star, dtype=float)[:-1]
    y = _weighted_solve(network, C_red, h_red - C_red @ P0)
    return P0 + network.B * (C_red.T @ y)


@dataclass(frozen=True)
class OlcSolution:
    """Optimum of the load control problem; bus arrays use internal bus order."""

    network: Network = field(repr=False)
    nu_star: float
    d_star: np.ndarray
    d_hat_star: np.ndarray
    h_star: np.ndarray
    flows: EquilibriumFlows
    objective: float
    warnings: tuple = ()

    def to_document(self) -> dict:
        """JSON-ready document with bus vectors in input order."""
        net = self.network
        return {
            "nu_star": self.nu_star,
            "d_star": net.to_input_order(self.d_star).tolist(),
            "d_hat_star": net.to_input_order(self.d_hat_star).tolist(),
            "h_star": net.to_input_order(self.h_star).tolist(),
            "flow_point": self.flows.point.tolist(),
            "null_basis": self.flows.null_basis.tolist(),
            "objective": self.objective,
        }


def solve(network: Network, warn_threshold=DEFAULT_WARN_THRESHOLD, dropped_bus=None) -> OlcSolution:
    nu_star = solve_dual(network)
    d_star, d_hat_star = recover_primal(network, nu_star)
    h_star = network.P_m - d_star - d_hat_star
    notes = []
    if warn_threshold is not None and abs(nu_star) > warn_threshold:
        msg = f"|nu*| = {abs(nu_star):.4g} rad/s exceeds {warn_threshold:.4g}; outside the linearized model's range"
        warnings.warn(msg, LargeDeviationWarning, stacklevel=2)
        notes.append(msg)
    return OlcSolution(
        network=network,
        nu_star=nu_star,
        d_star=d_star,
        d_hat_star=d_hat_star,
        h_star=h_star,
        flows=equilibrium_flows(network, h_star, dropped_bus),
        objective=objective(network, d_star, d_hat_star),
        warnings=tuple(notes),
    )


@dataclass(frozen=True)
class OracleResult:
    d: np.ndarray
    d_hat: np.ndarray
    cost: float


def brute_force_oracle(network: Network, grid_step: float) -> OracleResult:
    """Exhaustive grid search over the controllable loads of a tiny network.

    For fixed ``d`` the frequency-sensitive part has a closed-form optimum:
    minimizing ``sum d_hat_j**2 / (2 D_j)`` subject to ``sum d_hat_j = r``
    gives ``d_hat_j = D_j r / sum(D)``.
    """
    if network.n_bus > MAX_ORACLE_BUSES:
        raise ValueError(f"oracle supports at most {MAX_ORACLE_BUSES} buses, got {network.n_bus}")
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    axes = []
    for c in network.costs:
        width = c.d_max - c.d_min
        n = int(math.ceil(width / grid_step - 1e-9)) + 1 if width > 0 else 1
        axes.append(np.linspace(c.d_min, c.d_max, n))
    lengths = np.array([a.size for a in axes], dtype=np.int64)
    grids = np.zeros((network.n_bus, lengths.max()))
    cost_values = np.zeros_like(grids)
    for j, (a, c) in enumerate(zip(axes, network.costs)):
        grids[j, : a.size] = a
        cost_values[j, : a.size] = c(a)
    D_total = float(network.D.sum())
    P_total = float(network.P_m.sum())
    best, idx = kernels.grid_minimum(grids, lengths, cost_values, D_total, P_total)
    d = np.array([grids[j, idx[j]] for j in range(network.n_bus)])
    d_hat = network.D * (P_total - d.sum()) / D_total
    return OracleResult(d=d, d_hat=d_hat, cost=float(best))
