"""Trajectory CSV and summary documents."""

from __future__ import annotations

import numpy as np

from .network import Network

FLOAT_FMT = "%.17g"


def csv_header(network: Network):
    ids = network.input_ids
    cols = ["t"]
    cols += [f"omega_{b}" for b in ids]
    cols += [f"P_{ln.from_bus}-{ln.to_bus}" for ln in network.lines]
    cols += [f"d_{b}" for b in ids]
    cols += [f"dhat_{b}" for b in ids]
    cols += ["U", "kkt_stationarity", "kkt_sync"]
    return cols


def trajectory_table(traj):
    """All CSV columns as one float array; bus columns in input order."""
    net = traj.network
    k = len(traj)
    nan = np.full(k, np.nan)
    return np.column_stack([
        traj.t,
        net.to_input_order(traj.omega),
        traj.P,
        net.to_input_order(traj.d),
        net.to_input_order(traj.d_hat),
        nan if traj.U is None else traj.U,
        nan if traj.kkt_stationarity is None else traj.kkt_stationarity,
        nan if traj.kkt_sync is None else traj.kkt_sync,
    ])


def write_trajectory_csv(traj, path):
    """Write with 17 significant digits so every float parses back bit-exactly."""
    np.savetxt(path, trajectory_table(traj), fmt=FLOAT_FMT, delimiter=",",
               header=",".join(csv_header(traj.network)), comments="")


def read_trajectory_csv(path):
    """Return ``(header, data)``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def simulation_summary(scenario, solution, traj, lyapunov_slack=1e-8):
    net = scenario.network
    final = traj.final
    summary = {
        "case": scenario.name,
        "controller": scenario.config.controller,
        "t_final": float(traj.t[-1]),
        "samples": len(traj),
        "final": {
            "omega": net.to_input_order(final.omega).tolist(),
            "P": final.P.tolist(),
            "d": net.to_input_order(final.d).tolist(),
            "d_hat": net.to_input_order(final.d_hat).tolist(),
        },
        "nu_star": solution.nu_star,
        "max_frequency_error": float(np.max(np.abs(final.omega - solution.nu_star))),
        "flow_balance_error": float(np.max(np.abs(net.flow_balance(final.P) - solution.h_star))),
        "projection_error": (
            float(np.max(np.abs(final.P - solution.flows.point))) if scenario.flows_consistent else None
        ),
        "cost_final": float(traj.costs()[-1]),
        "cost_optimal": solution.objective,
    }
    if traj.U is not None:
        summary["U_final"] = float(traj.U[-1])
        summary["lyapunov_monotone"] = (
            None if scenario.config.sampled else bool(np.all(np.diff(traj.U) <= lyapunov_slack))
        )
    if traj.kkt_stationarity is not None:
        summary["kkt_stationarity_final"] = float(traj.kkt_stationarity[-1])
        summary["kkt_sync_final"] = float(traj.kkt_sync[-1])
    return summary
