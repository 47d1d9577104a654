"""Closed-loop network dynamics under frequency-based load control.

Generator buses follow the swing equation, load buses impose instantaneous
power balance, and branch flows integrate the frequency difference across
each line. Controllable loads follow ``d_j = d_j(omega_j)``. The system is an
index-1 DAE: load-bus frequencies are recovered from the flows at every
Runge-Kutta stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .network import Network
from .olc import OlcSolution, load_responses, objective

CONTINUOUS = "continuous"
SAMPLED = "sampled"


class DivergenceError(FloatingPointError):
    def __init__(self, t):
        super().__init__(f"non-finite state at t={t:.6g}; reduce the step size")
        self.t = t


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 1e-3
    T: float = 20.0
    tol: float = 1e-12
    controller: str = CONTINUOUS
    sample_interval: float | None = None
    decimation: int = 1

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"step h must be positive, got {self.h}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if abs(self.n_steps * self.h - self.T) > 1e-9 * self.T:
            raise ValueError(f"horizon T={self.T} is not a multiple of h={self.h}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.decimation) != self.decimation or self.decimation < 1:
            raise ValueError(f"decimation must be a positive integer, got {self.decimation}")
        if self.controller == SAMPLED:
            s = self.sample_interval
            if s is None or s < self.h * (1 - 1e-12):
                raise ValueError("sample interval must be at least h")
            if abs(round(s / self.h) * self.h - s) > 1e-9 * s:
                raise ValueError(f"sample interval {s} is not a multiple of h={self.h}")
        elif self.controller != CONTINUOUS:
            raise ValueError(f"unknown controller mode {self.controller!r}")

    @property
    def n_steps(self):
        return int(round(self.T / self.h))

    @property
    def sampled(self):
        return self.controller == SAMPLED

    @property
    def hold_every(self):
        return int(round(self.sample_interval / self.h)) if self.sampled else 0


@dataclass(frozen=True)
class SystemState:
    """Dynamic state ``(omega_G, P)`` plus the quantities derived from it.

    Bus vectors use internal generator-first order.
    """

    t: float
    omega_G: np.ndarray
    P: np.ndarray
    omega_L: np.ndarray
    d: np.ndarray
    d_hat: np.ndarray

    @property
    def omega(self):
        return np.concatenate((self.omega_G, self.omega_L))


@dataclass(frozen=True)
class EquilibriumReference:
    """Equilibrium ``(omega_star 1, P_star)`` with the primal-dual stepsizes.

    ``gamma_j = 1 / M_j`` and ``xi_ij = B_ij`` weight the Lyapunov function.
    """

    omega_star: float
    P_star: np.ndarray
    gamma: np.ndarray
    xi: np.ndarray

    @classmethod
    def from_solution(cls, network: Network, solution: OlcSolution, P_star=None):
        P = solution.flows.point if P_star is None else np.asarray(P_star, dtype=float)
        return cls(solution.nu_star, P, 1.0 / network.M, network.B.copy())


def _load_freq_bisect(cost, D, r, tol):
    # D w + d(w) - r changes sign on this bracket because d(w) stays inside [d_min, d_max]
    lo = (r - cost.d_max) / D
    hi = (r - cost.d_min) / D
    f = lambda w: D * w + cost.response(w) - r  # noqa: E731
    if f(lo) >= 0.0:
        return lo
    if f(hi) <= 0.0:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= tol or mid <= lo or mid >= hi:
            return mid
        if fm > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def solve_load_frequencies(network: Network, P, tol=1e-12, d_held=None):
    """Frequencies at load buses from branch flows ``P``.

    Each load bus solves ``D_j w + d_j - P_m_j + (C P)_j = 0`` on its own.
    With ``d_held`` the controllable load is frozen and the equation is linear;
    otherwise ``d_j = d_j(w)`` and the root of the increasing map is found in
    closed form (quadratic costs) or by bisection.
    """
    g = network.n_gen
    r = network.P_m[g:] - network.flow_balance(P)[g:]
    D = network.D[g:]
    if d_held is not None:
        return (r - np.asarray(d_held, dtype=float)[g:]) / D
    if network.all_quadratic:
        alpha, lo, hi = (a[g:] for a in network.quadratic_params)
        w = r / (D + alpha)
        aw = alpha * w
        w = np.where(aw > hi, (r - hi) / D, w)
        return np.where(aw < lo, (r - lo) / D, w)
    costs = network.costs[g:]
    return np.array([_load_freq_bisect(c, Dj, rj, tol) for c, Dj, rj in zip(costs, D, r)])


def make_state(network: Network, omega_G, P, t=0.0, tol=1e-12, d_held=None) -> SystemState:
    omega_G = np.asarray(omega_G, dtype=float)
    P = np.asarray(P, dtype=float)
    if omega_G.shape != (network.n_gen,) or P.shape != (network.n_edge,):
        raise ValueError("state shape does not match the network")
    omega_L = solve_load_frequencies(network, P, tol, d_held)
    omega = np.concatenate((omega_G, omega_L))
    d = load_responses(network, omega) if d_held is None else np.asarray(d_held, dtype=float).copy()
    return SystemState(t=float(t), omega_G=omega_G, P=P, omega_L=omega_L, d=d, d_hat=network.D * omega)


def rhs(network: Network, state: SystemState):
    g = network.n_gen
    omega = state.omega
    imbalance = state.d + state.d_hat - network.P_m + network.flow_balance(state.P)
    omega_G_dot = -imbalance[:g] / network.M
    P_dot = network.B * (omega[network.src] - omega[network.dst])
    return omega_G_dot, P_dot


def _is_control_instant(n, config):
    return config.sampled and n % config.hold_every == 0


def step(network: Network, state: SystemState, config: IntegratorConfig) -> SystemState:
    """One classical RK4 step on ``(omega_G, P)``.

    In sampled mode ``state.d`` is held through the step and refreshed from the
    measured frequencies when the new time is a control instant.
    """
    h = config.h
    held = state.d if config.sampled else None

    def stage(w, p):
        return rhs(network, make_state(network, w, p, tol=config.tol, d_held=held))

    w, p = state.omega_G, state.P
    k1w, k1p = rhs(network, state)
    k2w, k2p = stage(w + 0.5 * h * k1w, p + 0.5 * h * k1p)
    k3w, k3p = stage(w + 0.5 * h * k2w, p + 0.5 * h * k2p)
    k4w, k4p = stage(w + h * k3w, p + h * k3p)
    w = w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    p = p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    t = state.t + h
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(p))):
        raise DivergenceError(t)
    new = make_state(network, w, p, t, config.tol, held)
    if _is_control_instant(int(round(t / h)), config):
        new = make_state(network, w, p, t, config.tol, load_responses(network, new.omega))
    return new


def initial_flows_from_angles(network: Network, theta0):
    """Branch flows ``B_ij (theta_i - theta_j)`` consistent with bus angles ``theta0``."""
    theta0 = np.asarray(theta0, dtype=float)
    return network.B * (theta0[network.src] - theta0[network.dst])


def lyapunov_value(state: SystemState, reference: EquilibriumReference) -> float:
    dw = state.omega_G - reference.omega_star
    dp = state.P - reference.P_star
    return float(0.5 * np.sum(dw * dw / reference.gamma) + 0.5 * np.sum(dp * dp / reference.xi))


def kkt_residuals(state: SystemState, network: Network):
    """``(stationarity, sync)``: dual-gradient/flow mismatch and worst frequency gap across a line."""
    omega = state.omega
    grad = network.P_m - load_responses(network, omega) - network.D * omega
    stationarity = float(np.max(np.abs(grad - network.flow_balance(state.P))))
    sync = float(np.max(np.abs(omega[network.src] - omega[network.dst]), initial=0.0))
    return stationarity, sync


def energy_residual(network: Network, state: SystemState) -> float:
    """``sum_G M_j dw_j/dt + sum_N (d_j + d_hat_j - P_m_j)``, identically zero."""
    omega_G_dot, _ = rhs(network, state)
    return float(np.sum(network.M * omega_G_dot) + np.sum(state.d + state.d_hat - network.P_m))


def algebraic_residual(network: Network, state: SystemState) -> float:
    g = network.n_gen
    res = (state.d + state.d_hat - network.P_m + network.flow_balance(state.P))[g:]
    return float(np.max(np.abs(res), initial=0.0))


@dataclass
class Trajectory:
    """Recorded samples of a simulation; bus columns use internal order."""

    network: Network = field(repr=False)
    config: IntegratorConfig
    t: np.ndarray
    omega: np.ndarray
    P: np.ndarray
    d: np.ndarray
    reference: EquilibriumReference | None = None
    U: np.ndarray | None = None
    kkt_stationarity: np.ndarray | None = None
    kkt_sync: np.ndarray | None = None

    @property
    def d_hat(self):
        return self.omega * self.network.D

    def __len__(self):
        return self.t.size

    def snapshot(self, k) -> SystemState:
        g = self.network.n_gen
        return SystemState(
            t=float(self.t[k]),
            omega_G=self.omega[k, :g].copy(),
            P=self.P[k].copy(),
            omega_L=self.omega[k, g:].copy(),
            d=self.d[k].copy(),
            d_hat=self.d_hat[k].copy(),
        )

    @property
    def final(self) -> SystemState:
        return self.snapshot(-1)

    def costs(self):
        """Load control objective evaluated at every sample."""
        net = self.network
        d_hat = self.d_hat
        return np.array([objective(net, self.d[k], d_hat[k]) for k in range(len(self))])

    def algebraic_residuals(self):
        net = self.network
        g = net.n_gen
        flows = self.P @ net.incidence.T.astype(float)
        res = self.d + self.d_hat - net.P_m + flows
        return np.max(np.abs(res[:, g:]), axis=1, initial=0.0)


def _analyze(traj: Trajectory, lyapunov=True, kkt=True):
    net = traj.network
    ref = traj.reference
    if lyapunov and ref is not None:
        dw = traj.omega[:, : net.n_gen] - ref.omega_star
        dp = traj.P - ref.P_star
        traj.U = 0.5 * np.sum(dw * dw / ref.gamma, axis=1) + 0.5 * np.sum(dp * dp / ref.xi, axis=1)
    if kkt:
        omega = traj.omega
        responses = np.column_stack([load_responses_column(net, j, omega[:, j]) for j in range(net.n_bus)])
        grad = net.P_m - responses - net.D * omega
        flows = traj.P @ net.incidence.T.astype(float)
        traj.kkt_stationarity = np.max(np.abs(grad - flows), axis=1)
        gaps = np.abs(omega[:, net.src] - omega[:, net.dst])
        traj.kkt_sync = np.max(gaps, axis=1, initial=0.0)


def load_responses_column(network: Network, j, nu):
    return np.broadcast_to(network.costs[j].response(np.asarray(nu, dtype=float)), np.shape(nu))


def simulate(network: Network, omega_G0, P0, config: IntegratorConfig, reference=None,
             *, lyapunov=True, kkt=True, use_kernel=True) -> Trajectory:
    """Integrate from ``(omega_G0, P0)`` to the horizon with fixed-step RK4.

    Load-bus frequencies at t=0 follow from ``P0``; they are not free initial
    conditions. Quadratic-cost networks run in the compiled kernel unless
    ``use_kernel`` is false.
    """
    omega_G0 = np.asarray(omega_G0, dtype=float)
    P0 = np.asarray(P0, dtype=float)
    state = make_state(network, omega_G0, P0, tol=config.tol)
    n_steps, dec = config.n_steps, int(config.decimation)

    if use_kernel and network.all_quadratic:
        alpha, lo, hi = network.quadratic_params
        status, steps, omega, P, d = kernels.integrate_quadratic(
            network.M, network.D, network.P_m, alpha, lo, hi, network.src, network.dst, network.B,
            omega_G0.copy(), P0.copy(), state.d.copy(), config.h, n_steps, config.hold_every, dec,
        )
        if status != kernels.OK:
            raise DivergenceError((steps[-1] + 1) * config.h if steps.size else config.h)
        t = steps * config.h
    else:
        if _is_control_instant(0, config):
            state = make_state(network, state.omega_G, state.P, tol=config.tol,
                               d_held=load_responses(network, state.omega))
        rows = []
        with np.errstate(over="ignore", invalid="ignore"):
            for n in range(n_steps + 1):
                if n % dec == 0 or n == n_steps:
                    rows.append(state)
                if n == n_steps:
                    break
                state = step(network, state, config)
        t = np.array([n * config.h for n in range(0, n_steps + 1, dec)] +
                     ([n_steps * config.h] if n_steps % dec else []))
        omega = np.array([s.omega for s in rows])
        P = np.array([s.P for s in rows])
        d = np.array([s.d for s in rows])

    traj = Trajectory(network, config, t, omega, P, d, reference=reference)
    _analyze(traj, lyapunov, kkt)
    return traj
