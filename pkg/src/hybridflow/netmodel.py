"""Balanced per-unit network model and admittance matrix construction.

Buses are indexed 0..n_bus-1 with exactly one slack bus. Lines are
pi-model branches with series impedance and optional shunt susceptance.
All quantities are per-unit on a 1.0 pu voltage base.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

SLACK = "slack"
PQ = "pq"


class NetworkValidationError(ValueError):
    """Raised for malformed network element data (e.g. zero impedance)."""


class NetworkStructureError(ValueError):
    """Raised for structural defects such as a disconnected graph."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = PQ  # "slack" or "pq"
    base_voltage: float = 1.0
    load_attachment: int | None = None  # index into the load vector, or None


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    resistance: float
    reactance: float
    shunt_susceptance: float = 0.0

    @property
    def series_impedance(self) -> complex:
        return complex(self.resistance, self.reactance)


@dataclass
class Network:
    buses: list[Bus]
    lines: list[Line]
    Y: np.ndarray = field(repr=False)
    name: str = "network"

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def slack_index(self) -> int:
        for bus in self.buses:
            if bus.kind == SLACK:
                return bus.id
        raise NetworkStructureError("network has no slack bus")

    @property
    def pq_indices(self) -> np.ndarray:
        return np.array([b.id for b in self.buses if b.kind == PQ], dtype=int)

    @property
    def load_buses(self) -> np.ndarray:
        """Bus indices ordered by their position in the load vector."""
        attached = [(b.load_attachment, b.id) for b in self.buses
                    if b.load_attachment is not None]
        attached.sort()
        return np.array([bus_id for _, bus_id in attached], dtype=int)

    @property
    def n_loads(self) -> int:
        return len(self.load_buses)


def build_admittance(buses: list[Bus], lines: list[Line]) -> np.ndarray:
    """Build the complex bus admittance matrix from pi-model lines.

    Off-diagonals get -1/z per branch; diagonals accumulate 1/z plus half
    the branch shunt susceptance. Raises if any line has zero impedance,
    references an invalid bus, or the resulting graph is disconnected.
    """
    n = len(buses)
    ids = sorted(b.id for b in buses)
    if ids != list(range(n)):
        raise NetworkValidationError(f"bus ids must be 0..{n - 1}, got {ids}")

    Y = np.zeros((n, n), dtype=complex)
    for k, line in enumerate(lines):
        i, j = line.from_bus, line.to_bus
        if not (0 <= i < n and 0 <= j < n):
            raise NetworkValidationError(f"line {k} references missing bus ({i}, {j})")
        if i == j:
            raise NetworkValidationError(f"line {k} is a self-loop at bus {i}")
        z = line.series_impedance
        if abs(z) == 0.0:
            raise NetworkValidationError(f"line {k} ({i}-{j}) has zero impedance")
        y = 1.0 / z
        Y[i, j] -= y
        Y[j, i] -= y
        Y[i, i] += y + 0.5j * line.shunt_susceptance
        Y[j, j] += y + 0.5j * line.shunt_susceptance

    if not _connected(n, lines):
        raise NetworkStructureError("line graph is not connected")
    return Y


def _connected(n_bus: int, lines: list[Line]) -> bool:
    if n_bus == 0:
        return False
    adjacency: list[list[int]] = [[] for _ in range(n_bus)]
    for line in lines:
        adjacency[line.from_bus].append(line.to_bus)
        adjacency[line.to_bus].append(line.from_bus)
    seen = {0}
    stack = [0]
    while stack:
        node = stack.pop()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == n_bus


def make_network(buses: list[Bus], lines: list[Line], name: str = "network") -> Network:
    """Validate elements, build Y, and assemble an immutable Network."""
    Y = build_admittance(buses, lines)
    net = Network(buses=buses, lines=lines, Y=Y, name=name)
    violations = validate(net)
    if violations:
        raise NetworkValidationError("; ".join(violations))
    Y.setflags(write=False)
    return net


def validate(network: Network) -> list[str]:
    """Diagnostic check of all Network invariants; empty list means valid."""
    violations = []
    slacks = [b.id for b in network.buses if b.kind == SLACK]
    if len(slacks) != 1:
        violations.append(f"expected exactly one slack bus, found {slacks}")
    ids = sorted(b.id for b in network.buses)
    if ids != list(range(len(network.buses))):
        violations.append(f"bus ids not contiguous 0..{len(network.buses) - 1}: {ids}")
    for bus in network.buses:
        if bus.kind not in (SLACK, PQ):
            violations.append(f"bus {bus.id} has unknown kind {bus.kind!r}")
    attachments = [b.load_attachment for b in network.buses
                   if b.load_attachment is not None]
    if sorted(attachments) != list(range(len(attachments))):
        violations.append(f"load attachments not contiguous 0..{len(attachments) - 1}: "
                          f"{sorted(attachments)}")
    for k, line in enumerate(network.lines):
        if line.from_bus == line.to_bus:
            violations.append(f"line {k} is a self-loop at bus {line.from_bus}")
        if abs(line.series_impedance) == 0.0:
            violations.append(f"line {k} has zero series impedance")
    if not _connected(network.n_bus, network.lines):
        reachable = _reachable_from_slack(network)
        isolated = sorted(set(range(network.n_bus)) - reachable)
        violations.append(f"buses unreachable from slack: {isolated}")
    if network.Y.shape != (network.n_bus, network.n_bus):
        violations.append(f"Y has shape {network.Y.shape}, expected "
                          f"({network.n_bus}, {network.n_bus})")
    elif np.max(np.abs(network.Y - network.Y.T)) != 0.0:
        violations.append("Y is not symmetric")
    return violations


def _reachable_from_slack(network: Network) -> set[int]:
    adjacency: list[list[int]] = [[] for _ in range(network.n_bus)]
    for line in network.lines:
        adjacency[line.from_bus].append(line.to_bus)
        adjacency[line.to_bus].append(line.from_bus)
    try:
        start = network.slack_index
    except NetworkStructureError:
        start = 0
    seen = {start}
    stack = [start]
    while stack:
        node = stack.pop()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def load_network(path) -> Network:
    """Read a network definition file (YAML schema, see docs/formats)."""
    with open(path) as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, dict) or "buses" not in raw or "lines" not in raw:
        raise NetworkValidationError(f"{path}: expected mapping with 'buses' and 'lines'")
    buses = [
        Bus(
            id=int(entry["id"]),
            kind=str(entry.get("kind", PQ)),
            base_voltage=float(entry.get("base_voltage", 1.0)),
            load_attachment=(int(entry["load"]) if "load" in entry and entry["load"] is not None
                             else None),
        )
        for entry in raw["buses"]
    ]
    lines = [
        Line(
            from_bus=int(entry["from"]),
            to_bus=int(entry["to"]),
            resistance=float(entry.get("r", 0.0)),
            reactance=float(entry.get("x", 0.0)),
            shunt_susceptance=float(entry.get("b", 0.0)),
        )
        for entry in raw["lines"]
    ]
    return make_network(buses, lines, name=str(raw.get("name", "network")))


def save_network(network: Network, path) -> None:
    doc = {
        "name": network.name,
        "buses": [
            {"id": b.id, "kind": b.kind,
             **({"load": b.load_attachment} if b.load_attachment is not None else {})}
            for b in network.buses
        ],
        "lines": [
            {"from": ln.from_bus, "to": ln.to_bus, "r": ln.resistance,
             "x": ln.reactance, "b": ln.shunt_susceptance}
            for ln in network.lines
        ],
    }
    with open(path, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False)
