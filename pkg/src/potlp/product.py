"""Product of the known grid with the task automaton; shortest paths in known space."""
from __future__ import annotations

import heapq
import math
from typing import Callable, Mapping, NamedTuple

from .scltl import Dfa
from .world import BeliefMap, Cell, Frontier, GridMap, truth_adjacency


class ImmediateViolation(RuntimeError):
    """The start cell's label already drives the automaton into a dead state."""


class ProductState(NamedTuple):
    cell: Cell
    z: int


class PAPath(NamedTuple):
    states: list[ProductState]
    cost: float


class PaSearch:
    """Single-source shortest paths over (cell, automaton state) pairs."""

    def __init__(self, start: ProductState, dist: dict, parent: dict):
        self.start = start
        self.dist = dist
        self.parent = parent

    def cost(self, cell: Cell, z: int) -> float:
        return self.dist.get((cell, z), math.inf)

    def path_to(self, cell: Cell, z: int) -> list[ProductState]:
        key = (cell, z)
        if key not in self.dist:
            raise KeyError(f"{key} unreachable")
        out = []
        while key is not None:
            out.append(ProductState(*key))
            key = self.parent[key]
        return out[::-1]


def initial_product_state(belief: BeliefMap | GridMap, dfa: Dfa, pose: Cell) -> ProductState:
    z = dfa.step(dfa.initial, belief.label(pose))
    if not dfa.is_live(z):
        raise ImmediateViolation(f"label at start {pose} leads to dead state {z}")
    return ProductState(pose, z)


def _search(adj: Mapping[Cell, tuple[Cell, ...]], label: Callable[[Cell], int], dfa: Dfa,
            start: ProductState) -> PaSearch:
    delta, hops = dfa.delta, dfa.hops
    src = (start.cell, start.z)
    dist = {src: 0}
    parent = {src: None}
    heap = [(0, start.cell[1], start.cell[0], start.z)]
    done = set()
    while heap:
        d, r, c, z = heapq.heappop(heap)
        key = ((c, r), z)
        if key in done:
            continue
        done.add(key)
        nd = d + 1
        for nxt in adj.get((c, r), ()):
            z2 = delta[z][label(nxt)]
            if hops[z2] == math.inf:
                continue
            k2 = (nxt, z2)
            old = dist.get(k2)
            if old is None or nd < old:
                dist[k2] = nd
                parent[k2] = key
                heapq.heappush(heap, (nd, nxt[1], nxt[0], z2))
    return PaSearch(start, dist, parent)


def pa_dijkstra(belief: BeliefMap, dfa: Dfa, start: ProductState) -> PaSearch:
    """Exact known-space costs from ``start``; never enters dead automaton states.

    Ties are settled in (cost, row, col, z) order, so parents are deterministic.
    """
    return _search(belief.adjacency(), belief.label, dfa, start)


def truth_dijkstra(truth: GridMap, dfa: Dfa, start: ProductState) -> PaSearch:
    return _search(truth_adjacency(truth), truth.label, dfa, start)


def z_reach(belief: BeliefMap, dfa: Dfa, start: ProductState, frontier: Frontier,
            search: PaSearch | None = None) -> dict[int, float]:
    """Live automaton states reachable at the frontier's subgoal point, with their costs."""
    search = search or pa_dijkstra(belief, dfa, start)
    out = {}
    for z in dfa.states:
        d = search.cost(frontier.point, z)
        if d < math.inf and dfa.is_live(z):
            out[z] = d
    return out


def _best_accepting(search: PaSearch, dfa: Dfa) -> PAPath | None:
    best = None
    for (cell, z), d in search.dist.items():
        if z in dfa.accepting:
            key = (d, cell[1], cell[0], z)
            if best is None or key < best[0]:
                best = (key, cell, z)
    if best is None:
        return None
    return PAPath(search.path_to(best[1], best[2]), best[0][0])


def known_space_completion(belief: BeliefMap, dfa: Dfa, start: ProductState,
                           search: PaSearch | None = None) -> PAPath | None:
    """Cheapest known-space path to any accepting product state, if one exists."""
    return _best_accepting(search or pa_dijkstra(belief, dfa, start), dfa)


def known_map_optimum(truth: GridMap, dfa: Dfa) -> float:
    """Full-information optimal cost from the map's start (inf if unsatisfiable)."""
    try:
        start = initial_product_state(truth, dfa, truth.start)
    except ImmediateViolation:
        return math.inf
    found = _best_accepting(truth_dijkstra(truth, dfa, start), dfa)
    return math.inf if found is None else found.cost


def completion_costs(belief: BeliefMap, dfa: Dfa) -> dict[tuple[Cell, int], int]:
    """Known-space cost-to-go to acceptance from every (cell, z), by backward search."""
    adj = belief.adjacency()
    n_letters = 1 << dfa.n
    inverse: dict[tuple[int, int], list[int]] = {}
    for z in dfa.states:
        if not dfa.is_live(z):
            continue
        for m in range(n_letters):
            inverse.setdefault((dfa.delta[z][m], m), []).append(z)
    dist: dict[tuple[Cell, int], int] = {}
    heap = []
    for cell in adj:
        for z in sorted(dfa.accepting):
            dist[(cell, z)] = 0
            heap.append((0, cell[1], cell[0], z))
    heapq.heapify(heap)
    done = set()
    while heap:
        d, r, c, z = heapq.heappop(heap)
        key = ((c, r), z)
        if key in done:
            continue
        done.add(key)
        m = belief.label((c, r))
        for prev_z in inverse.get((z, m), ()):
            for prev in adj[(c, r)]:
                k2 = (prev, prev_z)
                if d + 1 < dist.get(k2, math.inf):
                    dist[k2] = d + 1
                    heapq.heappush(heap, (d + 1, prev[1], prev[0], prev_z))
    return dist
