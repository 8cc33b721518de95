"""Frequency plans for crossed resonators.

Every pair of resonators that cross at an airbridge must be detuned by at least
``delta_min`` (10 MHz by default, the measured crosstalk bandwidth of a single
crossing).  Candidate frequencies lie on a lattice of step ``delta_min / 2``
starting at the lower band edge, so the search is finite and deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import networkx as nx

from .layout import PhysicalLayout, ValidationError, crossing_pairs

DEFAULT_DELTA_MIN_HZ = 10e6


class InfeasibleError(Exception):
    """No plan exists on the lattice; ``certificate`` explains why."""

    def __init__(self, message: str, certificate: dict):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class CrossingGraph:
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    def neighbors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {n: [] for n in self.nodes}
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def max_degree(self) -> int:
        return max((len(v) for v in self.neighbors().values()), default=0)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g


@dataclass
class FrequencyPlan:
    band: tuple[float, float]
    delta_min: float
    assignment: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "band": list(self.band),
            "delta_min": self.delta_min,
            "assignment": {str(k): v for k, v in sorted(self.assignment.items())},
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> FrequencyPlan:
        try:
            band = tuple(float(x) for x in data["band"])
            return cls(
                band=(band[0], band[1]),
                delta_min=float(data["delta_min"]),
                assignment={int(k): float(v) for k, v in data["assignment"].items()},
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ValidationError(f"malformed frequency plan: {exc}") from exc


def crossing_graph(layout: PhysicalLayout) -> CrossingGraph:
    """Resonators as nodes, one edge per airbridge crossing in the folded layout."""
    if not layout.is_folded:
        raise ValidationError("crossing graph needs a folded layout")
    edges = tuple(sorted({(i, j) for i, j, _ in crossing_pairs(layout)}))
    return CrossingGraph(nodes=tuple(range(len(layout.resonators))), edges=edges)


def _slot_count(band: tuple[float, float], delta_min: float) -> int:
    width = band[1] - band[0]
    return int(math.floor(width / (delta_min / 2) + 1e-9)) + 1


def _clique_certificate(graph: CrossingGraph, slots: int) -> dict | None:
    g = graph.to_networkx()
    if g.number_of_edges() == 0:
        return None
    clique, _ = nx.max_weight_clique(g, weight=None)
    if 2 * (len(clique) - 1) >= slots:
        return {"kind": "clique", "nodes": sorted(clique), "size": len(clique)}
    return None


def allocate(
    graph: CrossingGraph,
    band: tuple[float, float],
    delta_min: float = DEFAULT_DELTA_MIN_HZ,
) -> FrequencyPlan:
    """Greedy lattice assignment with bounded backtracking.

    Nodes are visited by decreasing degree (ties by id); each takes the lowest
    lattice frequency at least ``delta_min`` away from its assigned neighbours.
    At most ``len(nodes)`` backtracking steps are spent before giving up.
    """
    f_min, f_max = band
    if not f_max > f_min:
        raise ValidationError(f"empty band {band}")
    if not delta_min > 0:
        raise ValidationError(f"delta_min must be positive, got {delta_min}")
    slots = _slot_count(band, delta_min)
    step = delta_min / 2

    adj = graph.neighbors()
    order = sorted(graph.nodes, key=lambda n: (-len(adj[n]), n))
    slot: dict[int, int] = {}

    def first_free(node: int, start: int) -> int | None:
        blocked = {slot[u] + k for u in adj[node] if u in slot for k in (-1, 0, 1)}
        for m in range(start, slots):
            if m not in blocked:
                return m
        return None

    budget = len(order)
    pos = 0
    start = 0
    saturated = None
    while pos < len(order):
        node = order[pos]
        m = first_free(node, start)
        if m is not None:
            slot[node] = m
            pos += 1
            start = 0
            continue
        if saturated is None:
            saturated = node
        if pos == 0 or budget == 0:
            cert = _clique_certificate(graph, slots)
            if cert is not None:
                cert.update(band_hz=f_max - f_min, required_hz=(cert["size"] - 1) * delta_min)
                raise InfeasibleError(
                    f"clique of {cert['size']} crossed resonators needs "
                    f"{cert['required_hz']:.4g} Hz but the band is {cert['band_hz']:.4g} Hz wide",
                    cert,
                )
            blocking = {u: f_min + slot[u] * step for u in adj[saturated] if u in slot}
            raise InfeasibleError(
                f"resonator {saturated} has no free frequency in the band",
                {"kind": "saturated", "node": saturated, "neighbors": blocking},
            )
        budget -= 1
        pos -= 1
        prev = order[pos]
        start = slot.pop(prev) + 1

    return FrequencyPlan(
        band=(f_min, f_max),
        delta_min=delta_min,
        assignment={n: f_min + slot[n] * step for n in graph.nodes},
    )


def verify(plan: FrequencyPlan, graph: CrossingGraph) -> list[tuple[int, int, float]]:
    """Crossing pairs closer than ``delta_min``, as ``(i, j, |f_i - f_j|)``."""
    missing = [n for n in graph.nodes if n not in plan.assignment]
    if missing:
        raise ValidationError(f"plan has no frequency for resonators {missing[:10]}")
    tol = 1e-9 * plan.delta_min
    violations = []
    for i, j in graph.edges:
        gap = abs(plan.assignment[i] - plan.assignment[j])
        if gap < plan.delta_min - tol:
            violations.append((i, j, gap))
    return violations


def apply_plan(layout: PhysicalLayout, plan: FrequencyPlan) -> PhysicalLayout:
    """Copy plan frequencies onto the layout's resonator edges (in place) and return it."""
    for n, res in enumerate(layout.resonators):
        res.frequency = plan.assignment.get(n)
    return layout
