"""Property checks run by ``olc-sim check``.

Each check compares a simulated trajectory against the centralized optimum
and reports pass, fail, or n/a.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import olc
from .dynamics import EquilibriumReference, kkt_residuals, make_state, rhs, simulate, energy_residual
from .network import is_tree

PASS, FAIL, NA = "pass", "FAIL", "n/a"

# continuous-mode tolerances; sampled mode relaxes the limit checks
TOL_LIMIT = 1e-6
TOL_LIMIT_SAMPLED = 1e-4
TOL_EQUILIBRIUM = 1e-9
TOL_LYAPUNOV_STEP = 1e-8
TOL_LYAPUNOV_FINAL = 1e-10
TOL_ALGEBRAIC = 1e-9
TOL_SETTLED = 1e-8
TOL_SETTLED_SAMPLED = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    value: float | None = None
    limit: float | None = None

    @property
    def failed(self):
        return self.status == FAIL


def _check(name, value, limit):
    return CheckResult(name, PASS if value <= limit else FAIL, float(value), limit)


def _na(name):
    return CheckResult(name, NA)


def run_checks(scenario, solution=None, trajectory=None):
    """Solve, simulate (unless given) and evaluate every property."""
    net = scenario.network
    cfg = scenario.config
    sol = solution or olc.solve(net, warn_threshold=None)
    ref = EquilibriumReference.from_solution(net, sol)
    traj = trajectory or simulate(net, scenario.omega_G0, scenario.P0, cfg, ref)
    sampled = cfg.sampled
    tol_limit = TOL_LIMIT_SAMPLED if sampled else TOL_LIMIT
    results = []

    d_star, d_hat_star = sol.d_star, sol.d_hat_star
    balance = abs(float(np.sum(d_star + d_hat_star) - net.P_m.sum()))
    results.append(_check("optimum balances the network", balance, 1e-9 * max(1.0, abs(net.P_m.sum()))))
    flows_err = float(np.max(np.abs(net.flow_balance(sol.flows.point) - sol.h_star)))
    results.append(_check("equilibrium flows satisfy C P = h*", flows_err, TOL_EQUILIBRIUM))

    eq = make_state(net, np.full(net.n_gen, sol.nu_star), sol.flows.point, tol=cfg.tol)
    w_dot, p_dot = rhs(net, eq)
    results.append(_check("rhs vanishes at the optimum", max(np.max(np.abs(w_dot)), np.max(np.abs(p_dot), initial=0.0)),
                          TOL_EQUILIBRIUM))
    results.append(_check("KKT residuals vanish at the optimum", max(kkt_residuals(eq, net)), TOL_EQUILIBRIUM))

    final = traj.final
    results.append(_check("frequencies converge to nu*", np.max(np.abs(final.omega - sol.nu_star)), tol_limit))
    results.append(_check("sync residual at T", traj.kkt_sync[-1], tol_limit))
    results.append(_check("loads converge to optimum",
                          max(np.max(np.abs(final.d - d_star)), np.max(np.abs(final.d_hat - d_hat_star))), tol_limit))
    results.append(_check("cost converges to minimum", abs(traj.costs()[-1] - sol.objective), tol_limit))

    if sampled:
        results.append(_na("Lyapunov nonincreasing"))
    else:
        results.append(_check("Lyapunov nonincreasing", float(np.max(np.diff(traj.U), initial=0.0)), TOL_LYAPUNOV_STEP))
    if sampled or not (is_tree(net) or scenario.flows_consistent):
        results.append(_na("Lyapunov reaches zero"))
    else:
        results.append(_check("Lyapunov reaches zero", traj.U[-1], TOL_LYAPUNOV_FINAL))

    results.append(_check("algebraic constraint held", float(np.max(traj.algebraic_residuals())), TOL_ALGEBRAIC))
    energy = max(abs(energy_residual(net, traj.snapshot(k))) for k in (0, len(traj) // 2, -1))
    results.append(_check("power accounting identity", energy, TOL_EQUILIBRIUM))

    tail = traj.t >= 0.9 * traj.t[-1]
    spread = max(np.ptp(traj.omega[tail], axis=0).max(), np.ptp(traj.P[tail], axis=0).max(initial=0.0))
    results.append(_check("settles to a point", spread, TOL_SETTLED_SAMPLED if sampled else TOL_SETTLED))

    if is_tree(net):
        results.append(_check("tree limit unique", np.max(np.abs(final.P - sol.flows.point), initial=0.0), tol_limit))
        results.append(_na("mesh limit in Z*_P"))
        results.append(_na("matches projection"))
    else:
        results.append(_na("tree limit unique"))
        results.append(_check("mesh limit in Z*_P", np.max(np.abs(net.flow_balance(final.P) - sol.h_star)), tol_limit))
        if scenario.flows_consistent:
            results.append(_check("matches projection", np.max(np.abs(final.P - sol.flows.point)), tol_limit))
        else:
            results.append(_na("matches projection"))
    return results


def format_table(name, results):
    width = max(len(r.name) for r in results)
    lines = [f"== {name}"]
    for r in results:
        detail = "" if r.value is None else f"  {r.value:.3e} <= {r.limit:.0e}"
        lines.append(f"  {r.name:<{width}}  {r.status:>4}{detail}")
    return "\n".join(lines)
