"""``olc-sim`` command line interface.

Exit codes::

    0  success
    1  ``check``: at least one property failed
    2  scenario file unreadable or not JSON (also argparse usage errors)
    3  scenario violates the schema
    4  scenario describes an invalid network
    5  internal solver error
    6  divergence guard fired during simulation
    7  output path not writable
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import warnings

from . import olc
from .checks import format_table, run_checks
from .dynamics import DivergenceError, EquilibriumReference, simulate
from .output import simulation_summary, write_trajectory_csv
from .scenario import ScenarioError, ScenarioSchemaError, list_cases, load_scenario, parse_controller, resolve_case

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SOLVER = 5
EXIT_DIVERGED = 6
EXIT_UNWRITABLE = 7


def _add_overrides(p):
    p.add_argument("--h", type=float, help="integration step [s]")
    p.add_argument("--horizon", type=float, help="simulated time T [s]")
    p.add_argument("--decimation", type=int, help="record every n-th step")
    p.add_argument("--controller", help="continuous or sampled:<ms>")


def build_parser():
    parser = argparse.ArgumentParser(prog="olc-sim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the optimal load control problem and print JSON")
    p.add_argument("scenario")

    p = sub.add_parser("simulate", help="integrate the closed-loop dynamics to a CSV")
    p.add_argument("scenario")
    p.add_argument("--out", required=True, help="trajectory CSV path")
    _add_overrides(p)

    p = sub.add_parser("check", help="run the convergence property checks")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("scenario", nargs="?")
    group.add_argument("--all", action="store_true", help="every case in the case library")
    _add_overrides(p)
    return parser


def _load(name, args=None):
    scenario = load_scenario(resolve_case(name))
    if args is None:
        return scenario
    changes = {}
    if args.h is not None:
        changes["h"] = args.h
    if args.horizon is not None:
        changes["T"] = args.horizon
    if args.decimation is not None:
        changes["decimation"] = args.decimation
    try:
        if args.controller is not None:
            changes["controller"], changes["sample_interval"] = parse_controller(args.controller)
        if changes:
            scenario.config = dataclasses.replace(scenario.config, **changes)
    except ValueError as err:
        raise ScenarioSchemaError(str(err), "integrator") from None
    return scenario


def _solve(scenario):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", olc.LargeDeviationWarning)
        sol = olc.solve(scenario.network, warn_threshold=scenario.warn_threshold)
    for note in sol.warnings:
        print(f"warning: {note}", file=sys.stderr)
    return sol


def cmd_solve(args):
    scenario = _load(args.scenario)
    sol = _solve(scenario)
    json.dump(sol.to_document(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_simulate(args):
    scenario = _load(args.scenario, args)
    for note in scenario.notes:
        print(f"warning: {note}", file=sys.stderr)
    sol = _solve(scenario)
    ref = EquilibriumReference.from_solution(scenario.network, sol)
    try:
        traj = simulate(scenario.network, scenario.omega_G0, scenario.P0, scenario.config, ref,
                        lyapunov=scenario.lyapunov, kkt=scenario.kkt)
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    try:
        write_trajectory_csv(traj, args.out)
    except OSError as err:
        print(f"error: cannot write {args.out}: {err.strerror}", file=sys.stderr)
        return EXIT_UNWRITABLE
    json.dump(simulation_summary(scenario, sol, traj), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_check(args):
    names = [str(p) for p in list_cases()] if args.all else [args.scenario]
    failed = False
    for name in names:
        scenario = _load(name, args)
        try:
            results = run_checks(scenario)
        except DivergenceError as err:
            print(f"== {scenario.name}\n  error: {err}")
            failed = True
            continue
        print(format_table(scenario.name, results))
        failed |= any(r.failed for r in results)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "check": cmd_check}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    except olc.SolverError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
