"""Scenario files: JSON schema, loading, writing and the built-in case library."""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .costs import QuadraticCost
from .dynamics import CONTINUOUS, SAMPLED, IntegratorConfig, initial_flows_from_angles
from .network import Bus, Line, Network, build_network, reduced_incidence
from .olc import DEFAULT_WARN_THRESHOLD, null_basis

SCHEMA_VERSION = 1
CASE_DIR_ENV = "OLC_SIM_CASE_DIR"
_SAMPLED_RE = re.compile(r"^sampled:(\d+(?:\.\d+)?)$")

_number = {"type": "number"}
_numbers = {"type": "array", "items": _number}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "buses", "lines"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "buses": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "kind", "D", "cost"],
                "properties": {
                    "id": {"type": "integer"},
                    "kind": {"enum": ["generator", "load"]},
                    "M": _number,
                    "D": _number,
                    "P_m": _number,
                    "cost": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["alpha", "d_min", "d_max"],
                        "properties": {"alpha": _number, "d_min": _number, "d_max": _number},
                    },
                },
            },
        },
        "lines": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["from", "to"],
                "properties": {
                    "from": {"type": "integer"},
                    "to": {"type": "integer"},
                    "B": _number,
                    "V_from": _number,
                    "V_to": _number,
                    "x": _number,
                    "theta_from": _number,
                    "theta_to": _number,
                },
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega_G": _numbers,
                "P": {
                    "type": "object",
                    "additionalProperties": False,
                    "minProperties": 1,
                    "maxProperties": 1,
                    "properties": {"explicit": _numbers, "from_angles": _numbers},
                },
            },
        },
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h": _number,
                "T": _number,
                "tol": _number,
                "decimation": {"type": "integer", "minimum": 1},
                "controller": {"type": "string", "pattern": r"^(continuous|sampled:\d+(\.\d+)?)$"},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"lyapunov": {"type": "boolean"}, "kkt": {"type": "boolean"}},
        },
        "warn_threshold": _number,
    },
}


class ScenarioError(Exception):
    exit_code = 1

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

    def __str__(self):
        msg = super().__str__()
        return f"{self.field}: {msg}" if self.field else msg


class ScenarioParseError(ScenarioError):
    exit_code = 2


class ScenarioSchemaError(ScenarioError):
    exit_code = 3


class ScenarioNetworkError(ScenarioError):
    exit_code = 4


@dataclass
class Scenario:
    """A network together with initial conditions and integrator settings.

    ``omega_G0`` follows the generator order (same as input order among
    generators); ``theta0`` is indexed in internal bus order.
    """

    network: Network
    config: IntegratorConfig
    omega_G0: np.ndarray
    P0: np.ndarray
    P0_mode: str = "zero"
    theta0: np.ndarray | None = None
    lyapunov: bool = True
    kkt: bool = True
    warn_threshold: float = DEFAULT_WARN_THRESHOLD
    name: str = ""
    description: str = ""
    notes: list = field(default_factory=list)

    @property
    def flows_consistent(self) -> bool:
        """True when ``P0`` can be written as ``B_ij (theta_i - theta_j)``."""
        if self.P0_mode in ("zero", "from_angles"):
            return True
        net = self.network
        basis = null_basis(reduced_incidence(net).astype(float))
        if basis.size == 0:
            return True
        scale = max(1.0, float(np.max(np.abs(self.P0 / net.B))))
        return float(np.max(np.abs(basis @ (self.P0 / net.B)))) <= 1e-9 * scale

    def to_dict(self) -> dict:
        net = self.network
        buses = []
        for bid in net.input_ids:
            b = net.buses[net.row(bid)]
            entry = {"id": b.id, "kind": b.kind}
            if b.M is not None:
                entry["M"] = b.M
            entry.update({"D": b.D, "P_m": b.P_m, "cost": b.cost.to_dict()})
            buses.append(entry)
        lines = []
        for ln in net.lines:
            entry = {"from": ln.from_bus, "to": ln.to_bus, "B": ln.B}
            if ln.has_raw:
                entry.update(V_from=ln.V_from, V_to=ln.V_to, x=ln.x, theta_from=ln.theta_from, theta_to=ln.theta_to)
            lines.append(entry)
        initial = {"omega_G": self.omega_G0.tolist()}
        if self.P0_mode == "explicit":
            initial["P"] = {"explicit": self.P0.tolist()}
        elif self.P0_mode == "from_angles":
            initial["P"] = {"from_angles": net.to_input_order(self.theta0).tolist()}
        cfg = self.config
        controller = CONTINUOUS if not cfg.sampled else f"sampled:{_fmt_ms(cfg.sample_interval)}"
        out = {"version": SCHEMA_VERSION}
        if self.name:
            out["name"] = self.name
        if self.description:
            out["description"] = self.description
        out.update(
            buses=buses,
            lines=lines,
            initial=initial,
            integrator={"h": cfg.h, "T": cfg.T, "tol": cfg.tol, "decimation": cfg.decimation, "controller": controller},
            analysis={"lyapunov": self.lyapunov, "kkt": self.kkt},
            warn_threshold=self.warn_threshold,
        )
        return out


def _fmt_ms(seconds):
    ms = seconds * 1000.0
    return str(int(round(ms))) if abs(ms - round(ms)) < 1e-9 else repr(ms)


def parse_controller(text: str):
    """``"continuous"`` or ``"sampled:<ms>"`` -> ``(mode, interval_seconds)``."""
    if text == CONTINUOUS:
        return CONTINUOUS, None
    m = _SAMPLED_RE.match(text)
    if not m:
        raise ValueError(f"controller must be 'continuous' or 'sampled:<ms>', got {text!r}")
    return SAMPLED, float(m.group(1)) / 1000.0


def _path(err):
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def scenario_from_dict(data: dict) -> Scenario:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ScenarioSchemaError("; ".join(f"{_path(e)}: {e.message}" for e in errors), _path(errors[0]))

    buses = []
    for k, b in enumerate(data["buses"]):
        try:
            cost = QuadraticCost(**b["cost"])
        except ValueError as err:
            raise ScenarioNetworkError(f"bus {b['id']}: {err}", f"buses/{k}/cost") from None
        buses.append(Bus(id=b["id"], kind=b["kind"], D=float(b["D"]), cost=cost,
                         P_m=float(b.get("P_m", 0.0)), M=b.get("M")))
    lines = [
        Line(ln["from"], ln["to"], B=ln.get("B"), V_from=ln.get("V_from"), V_to=ln.get("V_to"),
             x=ln.get("x"), theta_from=ln.get("theta_from"), theta_to=ln.get("theta_to"))
        for ln in data["lines"]
    ]
    try:
        net = build_network(buses, lines)
    except ValueError as err:
        field_path = getattr(err, "field", None)
        raise ScenarioNetworkError(str(err), field_path.replace("[", "/").replace("].", "/").rstrip("]")
                                   if field_path else None) from None

    integ = data.get("integrator", {})
    try:
        mode, interval = parse_controller(integ.get("controller", CONTINUOUS))
        config = IntegratorConfig(
            h=float(integ.get("h", 1e-3)),
            T=float(integ.get("T", 20.0)),
            tol=float(integ.get("tol", 1e-12)),
            controller=mode,
            sample_interval=interval,
            decimation=int(integ.get("decimation", 1)),
        )
    except ValueError as err:
        raise ScenarioSchemaError(str(err), "integrator") from None

    init = data.get("initial", {})
    omega_G0 = np.asarray(init.get("omega_G", [0.0] * net.n_gen), dtype=float)
    if omega_G0.shape != (net.n_gen,):
        raise ScenarioSchemaError(f"expected {net.n_gen} generator frequencies, got {omega_G0.size}", "initial/omega_G")
    p_init = init.get("P", {})
    theta0 = None
    notes = []
    if "explicit" in p_init:
        mode_p = "explicit"
        P0 = np.asarray(p_init["explicit"], dtype=float)
        if P0.shape != (net.n_edge,):
            raise ScenarioSchemaError(f"expected {net.n_edge} initial flows, got {P0.size}", "initial/P/explicit")
    elif "from_angles" in p_init:
        mode_p = "from_angles"
        theta_in = np.asarray(p_init["from_angles"], dtype=float)
        if theta_in.shape != (net.n_bus,):
            raise ScenarioSchemaError(f"expected {net.n_bus} bus angles, got {theta_in.size}", "initial/P/from_angles")
        theta0 = net.from_input_order(theta_in)
        P0 = initial_flows_from_angles(net, theta0)
    else:
        mode_p = "zero"
        P0 = np.zeros(net.n_edge)

    analysis = data.get("analysis", {})
    scenario = Scenario(
        network=net,
        config=config,
        omega_G0=omega_G0,
        P0=P0,
        P0_mode=mode_p,
        theta0=theta0,
        lyapunov=analysis.get("lyapunov", True),
        kkt=analysis.get("kkt", True),
        warn_threshold=float(data.get("warn_threshold", DEFAULT_WARN_THRESHOLD)),
        name=data.get("name", ""),
        description=data.get("description", ""),
        notes=notes,
    )
    if not scenario.flows_consistent:
        notes.append("initial flows are not generated by any bus angles; mesh limits will depend on P(0)")
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ScenarioParseError(f"cannot read {path}: {err.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioParseError(f"{path}: invalid JSON at line {err.lineno} column {err.colno}: {err.msg}") from None
    scenario = scenario_from_dict(data)
    if not scenario.name:
        scenario.name = path.stem
    return scenario


def write_scenario(scenario: Scenario, path):
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")


def case_dir() -> Path:
    env = os.environ.get(CASE_DIR_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("olc_sim") / "cases"))


def list_cases():
    return sorted(case_dir().glob("*.json"))


def resolve_case(name) -> Path:
    """A path on disk, or the name of a case in the library (``.json`` optional)."""
    p = Path(name)
    if p.is_file():
        return p
    for candidate in (case_dir() / name, case_dir() / f"{name}.json"):
        if candidate.is_file():
            return candidate
    return p


# ------------------------------------------------------------ case generators


def synthetic_mesh68(seed=68) -> dict:
    """Synthetic 68-bus, 16-generator mesh shaped like the New England/New York system.

    Parameters are random draws, not toolbox data. Thirty load buses carry
    controllable loads with ``alpha = 100`` and bounds of +-0.05 (1.5 total);
    the remaining buses have a pinned zero controllable load. Unit steps are
    applied at three load buses.
    """
    rng = np.random.default_rng(seed)
    n_gen, n_bus = 16, 68
    buses = []
    load_ids = list(range(n_gen + 1, n_bus + 1))
    controllable = set(rng.choice(load_ids, size=30, replace=False).tolist())
    step_buses = {17, 23, 43}
    for bid in range(1, n_bus + 1):
        if bid <= n_gen:
            entry = {"id": bid, "kind": "generator", "M": round(float(rng.uniform(2.0, 4.0)), 3)}
            D = round(float(rng.uniform(2.0, 4.0)), 3)
        else:
            entry = {"id": bid, "kind": "load"}
            D = round(float(rng.uniform(0.5, 1.5)), 3)
        dbar = 0.05 if bid in controllable else 0.0
        entry.update(D=D, P_m=-1.0 if bid in step_buses else 0.0,
                     cost={"alpha": 100.0, "d_min": -dbar, "d_max": dbar})
        buses.append(entry)

    # load buses form a ring with chords; each generator hangs off a load bus
    edges = []
    ring = load_ids
    for a, b in zip(ring, ring[1:] + ring[:1]):
        edges.append((a, b))
    chords = set()
    while len(chords) < 18:
        a, b = sorted(rng.choice(ring, size=2, replace=False).tolist())
        if abs(a - b) > 1 and (a, b) != (ring[0], ring[-1]):
            chords.add((a, b))
    edges.extend(sorted(chords))
    hosts = rng.choice(ring, size=n_gen, replace=False).tolist()
    for g, host in zip(range(1, n_gen + 1), hosts):
        edges.append((g, host))
    lines = [{"from": a, "to": b, "B": round(float(rng.uniform(5.0, 30.0)), 3)} for a, b in edges]
    return {
        "version": SCHEMA_VERSION,
        "name": "mesh68_synthetic",
        "description": "Synthetic 68-bus mesh; parameters are random and do not reproduce toolbox data.",
        "buses": buses,
        "lines": lines,
        "initial": {"omega_G": [0.0] * n_gen},
        "integrator": {"h": 0.005, "T": 40.0, "tol": 1e-12, "decimation": 20, "controller": "sampled:250"},
        "analysis": {"lyapunov": True, "kkt": True},
        "warn_threshold": 2 * math.pi * 0.5,
    }
