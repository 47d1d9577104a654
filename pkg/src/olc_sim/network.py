"""Transmission graph: buses, lines, line stiffness and incidence matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .costs import CostFunction

GENERATOR = "generator"
LOAD = "load"
STIFFNESS_RTOL = 1e-9


class NetworkError(ValueError):
    """Invalid network input. ``field`` locates the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class InvalidBusError(NetworkError):
    pass


class InvalidDampingError(NetworkError):
    pass


class NoGeneratorError(NetworkError):
    pass


class InvalidLineError(NetworkError):
    pass


class DuplicateLineError(NetworkError):
    pass


class DisconnectedNetworkError(NetworkError):
    pass


def compute_line_stiffness(V_i, V_j, x, theta_i0, theta_j0):
    """Linearized branch-flow stiffness ``3 |V_i||V_j| cos(theta_i0 - theta_j0) / x``."""
    if not x > 0:
        raise InvalidLineError(f"line reactance must be positive, got {x}")
    if not abs(theta_i0 - theta_j0) < math.pi / 2:
        raise InvalidLineError(f"nominal angle difference must be below pi/2, got {theta_i0 - theta_j0}")
    B = 3.0 * V_i * V_j * math.cos(theta_i0 - theta_j0) / x
    if not B > 0:
        raise InvalidLineError(f"line stiffness must be positive, got {B}")
    return B


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    D: float
    cost: CostFunction
    P_m: float = 0.0
    M: float | None = None

    @property
    def is_generator(self):
        return self.kind == GENERATOR


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    B: float | None = None
    V_from: float | None = None
    V_to: float | None = None
    x: float | None = None
    theta_from: float | None = None
    theta_to: float | None = None

    @property
    def raw(self):
        return (self.V_from, self.V_to, self.x, self.theta_from, self.theta_to)

    @property
    def has_raw(self):
        return any(v is not None for v in self.raw)


class Network:
    """Validated, immutable network. Use :func:`build_network` to construct.

    Bus-indexed arrays (``D``, ``P_m``, rows of ``incidence``) follow the
    internal generator-first order; ``bus_ids`` lists the ids in that order
    and ``input_ids`` in the order they were supplied.
    """

    def __init__(self, buses, lines, input_ids):
        self.buses = tuple(buses)
        self.lines = tuple(lines)
        self.input_ids = tuple(input_ids)
        self.bus_ids = tuple(b.id for b in self.buses)
        self._row = {bid: k for k, bid in enumerate(self.bus_ids)}
        self.n_bus = len(self.buses)
        self.n_edge = len(self.lines)
        self.n_gen = sum(b.is_generator for b in self.buses)
        self.src = np.array([self._row[ln.from_bus] for ln in self.lines], dtype=np.int64)
        self.dst = np.array([self._row[ln.to_bus] for ln in self.lines], dtype=np.int64)
        C = np.zeros((self.n_bus, self.n_edge), dtype=np.int64)
        C[self.src, np.arange(self.n_edge)] = 1
        C[self.dst, np.arange(self.n_edge)] = -1
        C.setflags(write=False)
        self.incidence = C
        # input position -> internal row
        self.input_rows = np.array([self._row[bid] for bid in self.input_ids], dtype=np.int64)
        for name, arr in self._arrays().items():
            arr.setflags(write=False)
            setattr(self, name, arr)

    def _arrays(self):
        gens = self.buses[: self.n_gen]
        return {
            "M": np.array([b.M for b in gens], dtype=float),
            "D": np.array([b.D for b in self.buses], dtype=float),
            "P_m": np.array([b.P_m for b in self.buses], dtype=float),
            "B": np.array([ln.B for ln in self.lines], dtype=float),
        }

    @property
    def C_G(self):
        return self.incidence[: self.n_gen]

    @property
    def C_L(self):
        return self.incidence[self.n_gen :]

    @property
    def costs(self):
        return tuple(b.cost for b in self.buses)

    @cached_property
    def all_quadratic(self):
        from .costs import QuadraticCost

        return all(type(c) is QuadraticCost for c in self.costs)

    @cached_property
    def quadratic_params(self):
        """``(alpha, d_min, d_max)`` arrays, only defined when every cost is quadratic."""
        if not self.all_quadratic:
            raise TypeError("network has non-quadratic costs")
        alpha = np.array([c.alpha for c in self.costs])
        lo = np.array([c.d_min for c in self.costs])
        hi = np.array([c.d_max for c in self.costs])
        return alpha, lo, hi

    def row(self, bus_id):
        try:
            return self._row[bus_id]
        except KeyError:
            raise InvalidBusError(f"unknown bus {bus_id}", field="bus") from None

    def to_input_order(self, values):
        """Reorder a bus-indexed array from internal to input order."""
        return np.asarray(values)[..., self.input_rows]

    def from_input_order(self, values):
        out = np.empty_like(np.asarray(values, dtype=float))
        out[..., self.input_rows] = values
        return out

    def flow_balance(self, P):
        """Net outflow ``P_out - P_in`` at every bus, i.e. ``C @ P``."""
        return self.incidence @ np.asarray(P, dtype=float)

    def __repr__(self):
        return f"Network(n_bus={self.n_bus}, n_gen={self.n_gen}, n_edge={self.n_edge})"


def _resolve_stiffness(k, line):
    field = f"lines[{k}]"
    if line.has_raw:
        if any(v is None for v in line.raw):
            raise InvalidLineError("raw line parameters need V_from, V_to, x, theta_from and theta_to", field)
        try:
            B = compute_line_stiffness(*line.raw)
        except InvalidLineError as err:
            raise InvalidLineError(str(err), field) from None
        if line.B is not None and abs(line.B - B) > STIFFNESS_RTOL * abs(B):
            raise InvalidLineError(f"B={line.B} does not match raw parameters (B={B})", field + ".B")
        return replace(line, B=B)
    if line.B is None:
        raise InvalidLineError("line needs either B or raw parameters", field)
    if not (line.B > 0 and math.isfinite(line.B)):
        raise InvalidLineError(f"line stiffness must be positive, got {line.B}", field + ".B")
    return replace(line, B=float(line.B))


def _check_connected(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    return len({find(a) for a in range(n)}) == 1


def build_network(buses, lines) -> Network:
    buses = list(buses)
    lines = list(lines)
    seen = set()
    for k, bus in enumerate(buses):
        field = f"buses[{k}]"
        if bus.id in seen:
            raise InvalidBusError(f"duplicate bus id {bus.id}", field + ".id")
        seen.add(bus.id)
        if bus.kind not in (GENERATOR, LOAD):
            raise InvalidBusError(f"bus {bus.id}: unknown kind {bus.kind!r}", field + ".kind")
        if not (bus.D > 0 and math.isfinite(bus.D)):
            raise InvalidDampingError(f"bus {bus.id}: damping D must be positive, got {bus.D}", field + ".D")
        if bus.is_generator:
            if bus.M is None or not (bus.M > 0 and math.isfinite(bus.M)):
                raise InvalidBusError(f"bus {bus.id}: generator inertia M must be positive, got {bus.M}", field + ".M")
        elif bus.M is not None:
            raise InvalidBusError(f"bus {bus.id}: load bus must not carry an inertia", field + ".M")
        if not math.isfinite(bus.P_m):
            raise InvalidBusError(f"bus {bus.id}: P_m must be finite", field + ".P_m")
    if not any(b.is_generator for b in buses):
        raise NoGeneratorError("network has no generator bus", "buses")

    resolved = []
    pairs = set()
    for k, line in enumerate(lines):
        field = f"lines[{k}]"
        for end in (line.from_bus, line.to_bus):
            if end not in seen:
                raise InvalidLineError(f"line endpoint {end} is not a bus", field)
        if line.from_bus == line.to_bus:
            raise InvalidLineError(f"self loop at bus {line.from_bus}", field)
        key = frozenset((line.from_bus, line.to_bus))
        if key in pairs:
            raise DuplicateLineError(f"duplicate or anti-parallel line {line.from_bus}->{line.to_bus}", field)
        pairs.add(key)
        resolved.append(_resolve_stiffness(k, line))

    index = {b.id: k for k, b in enumerate(buses)}
    if not _check_connected(len(buses), [(index[ln.from_bus], index[ln.to_bus]) for ln in resolved]):
        raise DisconnectedNetworkError("network graph is not connected", "lines")

    ordered = [b for b in buses if b.is_generator] + [b for b in buses if not b.is_generator]
    return Network(ordered, resolved, [b.id for b in buses])


def is_tree(network: Network) -> bool:
    return network.n_edge == network.n_bus - 1


def reduced_incidence(network: Network, dropped_bus=None):
    """Incidence matrix with one bus row removed (default: last internal row)."""
    row = network.n_bus - 1 if dropped_bus is None else network.row(dropped_bus)
    return np.delete(network.incidence, row, axis=0)
