from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudo2d.freqalloc import (
    CrossingGraph,
    FrequencyPlan,
    InfeasibleError,
    allocate,
    apply_plan,
    crossing_graph,
    verify,
)
from pseudo2d.layout import SurfaceCodeSpec, ValidationError, build_grid, fold

BAND = (7.0e9, 10.2e9)
DELTA = 10e6


def brute_force_violations(plan: FrequencyPlan, graph: CrossingGraph) -> set[tuple[int, int]]:
    bad = set()
    for i, j in graph.edges:
        if abs(plan.assignment[i] - plan.assignment[j]) < plan.delta_min * (1 - 1e-9):
            bad.add((i, j))
    return bad


def complete_graph(k: int) -> CrossingGraph:
    return CrossingGraph(tuple(range(k)), tuple(itertools.combinations(range(k), 2)))


@pytest.fixture(scope="module")
def d3n2_graph():
    return crossing_graph(fold(build_grid(SurfaceCodeSpec(3, 2))))


def test_allocation_on_folded_layout(d3n2_graph):
    plan = allocate(d3n2_graph, BAND, DELTA)
    assert verify(plan, d3n2_graph) == []
    assert all(BAND[0] <= f <= BAND[1] for f in plan.assignment.values())
    assert len(set(plan.assignment.values())) <= d3n2_graph.max_degree() + 1


def test_crossing_graph_degree(d3n2_graph):
    assert d3n2_graph.max_degree() == 2 * (3 - 1)


def test_unfolded_layout_rejected():
    with pytest.raises(ValidationError):
        crossing_graph(build_grid(SurfaceCodeSpec(3)))


def test_clique_with_narrow_band_is_infeasible():
    k = 6
    with pytest.raises(InfeasibleError) as info:
        allocate(complete_graph(k), (7e9, 7e9 + (k - 2) * DELTA), DELTA)
    cert = info.value.certificate
    assert cert["kind"] == "clique" and cert["size"] == k
    assert cert["required_hz"] > cert["band_hz"]


@settings(max_examples=40, deadline=None)
@given(k=st.integers(2, 9), extra=st.integers(-3, 3))
def test_clique_feasible_iff_band_fits(k, extra):
    width = (k - 1) * DELTA + extra * DELTA / 2
    if width <= 0:
        return
    feasible = (k - 1) * DELTA <= width + 1e-6
    try:
        plan = allocate(complete_graph(k), (7e9, 7e9 + width), DELTA)
    except InfeasibleError:
        assert not feasible
    else:
        assert feasible
        assert verify(plan, complete_graph(k)) == []


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_verify_matches_brute_force(seed, d3n2_graph):
    rng = np.random.default_rng(seed)
    freqs = 7e9 + DELTA / 2 * rng.integers(0, 8, size=len(d3n2_graph.nodes))
    plan = FrequencyPlan(BAND, DELTA, {n: float(f) for n, f in zip(d3n2_graph.nodes, freqs)})
    found = {(i, j) for i, j, _ in verify(plan, d3n2_graph)}
    assert found == brute_force_violations(plan, d3n2_graph)


def test_verify_missing_frequency(d3n2_graph):
    plan = FrequencyPlan(BAND, DELTA, {0: 7e9})
    with pytest.raises(ValidationError):
        verify(plan, d3n2_graph)


def test_plan_json_round_trip_and_apply(d3n2_graph):
    plan = allocate(d3n2_graph, BAND, DELTA)
    again = FrequencyPlan.from_dict(plan.to_dict())
    assert again.assignment == plan.assignment
    layout = apply_plan(fold(build_grid(SurfaceCodeSpec(3, 2))), plan)
    assert [r.frequency for r in layout.resonators] == [plan.assignment[n] for n in range(len(layout.resonators))]


@pytest.mark.parametrize("band", [(8e9, 8e9), (9e9, 8e9)])
def test_empty_band_rejected(band, d3n2_graph):
    with pytest.raises(ValidationError):
        allocate(d3n2_graph, band, DELTA)


def test_large_layout_allocates():
    graph = crossing_graph(fold(build_grid(SurfaceCodeSpec(21, 3))))
    plan = allocate(graph, BAND, DELTA)
    assert verify(plan, graph) == []
