"""Regenerate the built-in case library under src/olc_sim/cases/."""

import copy
import json
from pathlib import Path

from olc_sim.scenario import synthetic_mesh68

OUT = Path(__file__).resolve().parents[1] / "src" / "olc_sim" / "cases"

CONTINUOUS = {"h": 0.001, "T": 20.0, "tol": 1e-12, "decimation": 1, "controller": "continuous"}


def quad(alpha, lo, hi):
    return {"alpha": alpha, "d_min": lo, "d_max": hi}


def case(name, description, buses, lines, initial=None, integrator=None):
    out = {"version": 1, "name": name, "description": description, "buses": buses, "lines": lines}
    out["initial"] = initial or {}
    out["integrator"] = integrator or dict(CONTINUOUS)
    out["analysis"] = {"lyapunov": True, "kkt": True}
    return out


N1_BUSES = [
    {"id": 1, "kind": "generator", "M": 1.0, "D": 1.0, "P_m": 1.0, "cost": quad(1.0, -10.0, 10.0)},
    {"id": 2, "kind": "load", "D": 1.0, "P_m": 0.0, "cost": quad(1.0, -10.0, 10.0)},
]
N1_LINES = [{"from": 1, "to": 2, "V_from": 1.0, "V_to": 1.0, "x": 0.5, "theta_from": 0.0, "theta_to": 0.0}]

STAR4_BUSES = [
    {"id": 1, "kind": "generator", "M": 2.0, "D": 1.5, "P_m": 0.5, "cost": quad(2.0, -1.0, 1.0)},
    {"id": 2, "kind": "generator", "M": 1.0, "D": 1.0, "P_m": 1.0, "cost": quad(1.0, -0.2, 0.2)},
    {"id": 3, "kind": "load", "D": 1.0, "P_m": 0.0, "cost": quad(0.5, -1.0, 1.0)},
    {"id": 4, "kind": "load", "D": 2.0, "P_m": 0.3, "cost": quad(1.0, -0.05, 0.05)},
]
STAR4_LINES = [{"from": 1, "to": 2, "B": 5.0}, {"from": 1, "to": 3, "B": 8.0}, {"from": 4, "to": 1, "B": 4.0}]

RING3_BUSES = [
    {"id": 1, "kind": "generator", "M": 0.5, "D": 1.0, "P_m": 1.0, "cost": quad(1.0, -10.0, 10.0)},
    {"id": 2, "kind": "generator", "M": 0.5, "D": 1.0, "P_m": 0.0, "cost": quad(1.0, -10.0, 10.0)},
    {"id": 3, "kind": "load", "D": 1.0, "P_m": 0.5, "cost": quad(1.0, -10.0, 10.0)},
]
RING3_LINES = [{"from": 1, "to": 2, "B": 6.0}, {"from": 2, "to": 3, "B": 6.0}, {"from": 1, "to": 3, "B": 6.0}]


def cases():
    c = copy.deepcopy
    yield case("n1_tree", "Two buses: one generator with a unit step, one load bus.", c(N1_BUSES), c(N1_LINES))
    zero = c(N1_BUSES)
    zero[0]["P_m"] = 0.0
    yield case("zero_disturbance", "Two-bus network without disturbance.", zero, c(N1_LINES))
    clipped = c(N1_BUSES)
    for b in clipped:
        b["cost"] = quad(1.0, -0.1, 0.1)
    yield case("n1_clipped", "Two-bus network whose controllable loads saturate at +-0.1.", clipped, c(N1_LINES))
    yield case("star4_tree", "Four-bus star with two generators and mixed saturating loads.",
               c(STAR4_BUSES), c(STAR4_LINES))
    yield case("star4_random_init", "Four-bus star started from arbitrary flows.", c(STAR4_BUSES), c(STAR4_LINES),
               initial={"omega_G": [0.2, -0.1], "P": {"explicit": [0.4, -0.7, 0.9]}})
    yield case("ring3_mesh", "Three-bus ring, zero initial state.", c(RING3_BUSES), c(RING3_LINES))
    yield case("ring3_consistent_init", "Three-bus ring with flows generated by bus angles.",
               c(RING3_BUSES), c(RING3_LINES),
               initial={"omega_G": [0.1, -0.1], "P": {"from_angles": [0.1, -0.05, 0.2]}})
    yield case("ring3_random_init", "Three-bus ring with flows no bus angles can produce.",
               c(RING3_BUSES), c(RING3_LINES),
               initial={"omega_G": [0.0, 0.0], "P": {"explicit": [0.3, -0.2, 0.5]}})
    yield synthetic_mesh68()


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for data in cases():
        (OUT / f"{data['name']}.json").write_text(json.dumps(data, indent=2) + "\n")
        print("wrote", data["name"])
