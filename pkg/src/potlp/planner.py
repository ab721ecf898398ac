"""Planning over high-level actions with history-augmented beliefs.

A :class:`PlanningProblem` freezes everything a search needs at one replan:
the candidate transition pairs with their cached estimates, distances
between subgoal points, and known-space completion costs.  Both the exact
expectimax evaluator and PO-UCT search operate on it, so they agree on the
model by construction.

Within a rollout the belief is ``(anchor, z, failed, succeeded, depth)``.
The anchor is the subgoal index of the last simulated action (``-1`` before
the first).  ``failed``/``succeeded`` are bitmasks over pair indices.
"""
from __future__ import annotations

import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

from .actions import HighLevelAction, explorable, z_next
from .estimate import EstimateTriple, Estimator
from .product import ProductState, completion_costs
from .scltl import Dfa
from .world import BeliefMap, Cell, Frontier, grid_distances

log = logging.getLogger(__name__)

FINISH = -1
SUCCESS, FAILURE = 1, 0


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    c_ucb: float = 50.0
    n_sims: int = 2000
    max_depth: int = 12
    fail_cost: float | None = None  # None: 4 * (width + height)
    seed: int = 0
    workers: int = 1
    parallel: bool = False

    def __post_init__(self):
        if self.c_ucb <= 0 or self.n_sims <= 0 or self.max_depth <= 0 or self.workers <= 0:
            raise ValueError("planner constants must be positive")
        if self.fail_cost is not None and self.fail_cost <= 0:
            raise ValueError("fail_cost must be positive")


class Pair(NamedTuple):
    """One (subgoal, z', z'') transition attempt with its cached estimate."""

    s: int
    z1: int
    z2: int
    est: EstimateTriple
    root_d: float | None = None  # known-space D when available at the root


@dataclass
class PlanningProblem:
    pairs: list[Pair]
    dist: Sequence[Sequence[float]]  # label-free distance between subgoals
    root_z: int
    accepting: frozenset[int]
    fail_cost: float
    max_depth: int = 12
    root_finish: float | None = None
    # cost to complete in known space from (subgoal, z); missing means impossible
    finish_from: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        self._by_z: dict[int, list[int]] = {}
        for i, pr in enumerate(self.pairs):
            self._by_z.setdefault(pr.z1, []).append(i)
        self._actions: dict = {}

    def root_actions(self) -> list[int]:
        out = [i for i, pr in enumerate(self.pairs) if pr.root_d is not None]
        if self.root_finish is not None:
            out.append(FINISH)
        return out

    def actions(self, anchor: int, z: int, failed: int) -> list[int]:
        """Available action codes in a non-terminal belief; pair indices, then FINISH."""
        if anchor < 0:
            return [i for i in self.root_actions() if i == FINISH or not failed >> i & 1]
        key = (anchor, z, failed)
        got = self._actions.get(key)
        if got is None:
            got = [i for i in self._by_z.get(z, ()) if not failed >> i & 1]
            if (anchor, z) in self.finish_from:
                got.append(FINISH)
            self._actions[key] = got
        return got

    def p_success(self, code: int, succeeded: int) -> float:
        return 1.0 if succeeded >> code & 1 else self.pairs[code].est.p

    def terminal_value(self, z: int, acts: list[int], depth: int) -> float | None:
        if z in self.accepting:
            return 0.0
        if not acts or depth >= self.max_depth:
            return self.fail_cost
        return None


def _finish_cost(prob: PlanningProblem, anchor: int, z: int) -> float:
    return prob.root_finish if anchor < 0 else prob.finish_from[(anchor, z)]


# --------------------------------------------------------------------------
# Exact expectimax

def exact_expectimax(prob: PlanningProblem, max_pairs: int = 16) -> tuple[float, int, dict[int, float]]:
    """Exact Q values at the root; returns (value, argmin action code, Q per root action)."""
    if len(prob.pairs) > max_pairs:
        raise InstanceTooLarge(f"{len(prob.pairs)} pairs exceed the bound of {max_pairs}")
    memo: dict = {}

    def value(anchor, z, failed, succeeded, depth):
        key = (anchor, z, failed, succeeded, depth)
        if key in memo:
            return memo[key]
        acts = prob.actions(anchor, z, failed) if z not in prob.accepting else []
        term = prob.terminal_value(z, acts, depth)
        v = term if term is not None else min(q(anchor, z, failed, succeeded, depth, a) for a in acts)
        memo[key] = v
        return v

    def q(anchor, z, failed, succeeded, depth, a):
        if a == FINISH:
            return _finish_cost(prob, anchor, z)
        pr = prob.pairs[a]
        d = pr.root_d if anchor < 0 else prob.dist[anchor][pr.s]
        p = prob.p_success(a, succeeded)
        out = d
        if p > 0:
            out += p * (pr.est.cs + value(pr.s, pr.z2, failed, succeeded | 1 << a, depth + 1))
        if p < 1:
            out += (1 - p) * (pr.est.cf + value(pr.s, pr.z1, failed | 1 << a, succeeded, depth + 1))
        return out

    acts = prob.root_actions()
    if prob.root_z in prob.accepting or not acts:
        return (0.0 if prob.root_z in prob.accepting else prob.fail_cost), (acts[0] if acts else FINISH), {}
    qs = {a: q(-1, prob.root_z, 0, 0, 0, a) for a in acts}
    best = min(acts, key=lambda a: qs[a])
    return qs[best], best, qs


# --------------------------------------------------------------------------
# PO-UCT

class _Node:
    __slots__ = ("state", "acts", "n", "na", "va", "children", "terminal")

    def __init__(self, prob: PlanningProblem, state):
        anchor, z, failed, succeeded, depth = state
        self.state = state
        self.acts = prob.actions(anchor, z, failed) if z not in prob.accepting else []
        self.terminal = prob.terminal_value(z, self.acts, depth)
        self.n = 0
        self.na = [0] * len(self.acts)
        self.va = [0.0] * len(self.acts)
        self.children: dict = {}


class SearchResult(NamedTuple):
    action: int
    q: dict[int, float]
    visits: dict[int, int]


class HistoryBelief(NamedTuple):
    anchor: int
    z: int
    failed: int = 0
    succeeded: int = 0
    depth: int = 0


def augmented_action_set(prob: PlanningProblem, b: HistoryBelief) -> list[int]:
    """Actions left after pruning failed pairs; only pairs leaving the current z survive."""
    if b.z in prob.accepting:
        return []
    return list(prob.actions(b.anchor, b.z, b.failed))


def augmented_success_prob(prob: PlanningProblem, b: HistoryBelief, a: int) -> float:
    return 1.0 if a == FINISH else prob.p_success(a, b.succeeded)


def augmented_distance(prob: PlanningProblem, b: HistoryBelief, a: int) -> float:
    if a == FINISH:
        return _finish_cost(prob, b.anchor, b.z)
    pr = prob.pairs[a]
    return pr.root_d if b.anchor < 0 else prob.dist[b.anchor][pr.s]


def simulate(prob: PlanningProblem, b: HistoryBelief, a: int,
             rng: random.Random) -> tuple[HistoryBelief | None, float]:
    """Sample an outcome of ``a``; the next belief is None once the task is finished."""
    step = _step(prob, b, a, rng)
    return (None if step[1] is None else HistoryBelief(*step[1])), step[0]


def _step(prob: PlanningProblem, state, a: int, rng: random.Random):
    """Sample one outcome; returns (cost, next state or None when the task is done)."""
    anchor, z, failed, succeeded, depth = state
    if a == FINISH:
        return _finish_cost(prob, anchor, z), None
    pr = prob.pairs[a]
    d = pr.root_d if anchor < 0 else prob.dist[anchor][pr.s]
    p = 1.0 if succeeded >> a & 1 else pr.est.p
    if p >= 1.0 or (p > 0.0 and rng.random() < p):
        return d + pr.est.cs, (pr.s, pr.z2, failed, succeeded | 1 << a, depth + 1), SUCCESS
    return d + pr.est.cf, (pr.s, pr.z1, failed | 1 << a, succeeded, depth + 1), FAILURE


def _rollout(prob: PlanningProblem, state, rng: random.Random) -> float:
    total = 0.0
    while state is not None:
        anchor, z, failed, succeeded, depth = state
        if z in prob.accepting:
            return total
        acts = prob.actions(anchor, z, failed)
        term = prob.terminal_value(z, acts, depth)
        if term is not None:
            return total + term
        step = _step(prob, state, acts[int(rng.random() * len(acts))], rng)
        total += step[0]
        state = step[1]
    return total


def _search_worker(prob: PlanningProblem, n_sims: int, c: float, seed: int,
                   trace: Callable[[str], None] | None = None):
    rng = random.Random(seed)
    root = _Node(prob, (-1, prob.root_z, 0, 0, 0))
    sqrt, log_ = math.sqrt, math.log
    for sim in range(n_sims):
        node = root
        path = []  # (node, action index, step cost)
        tail = 0.0
        labels = []
        while True:
            if node.terminal is not None:
                tail = node.terminal
                break
            na = node.na
            try:
                k = na.index(0)
            except ValueError:
                bonus = c * sqrt(log_(node.n))
                va = node.va
                k, best = 0, math.inf
                for j in range(len(na)):
                    score = va[j] - bonus / sqrt(na[j])
                    if score < best:
                        k, best = j, score
            a = node.acts[k]
            step = _step(prob, node.state, a, rng)
            path.append((node, k, step[0]))
            if step[1] is None:
                if trace:
                    labels.append("finish")
                break
            outcome = step[2]
            if trace:
                labels.append(f"{a}{'+' if outcome else '-'}")
            child = node.children.get((k, outcome))
            if child is None:
                child = node.children[(k, outcome)] = _Node(prob, step[1])
                tail = child.terminal if child.terminal is not None else _rollout(prob, step[1], rng)
                break
            node = child
        total = tail
        for node, k, cost in reversed(path):
            total += cost
            node.n += 1
            node.na[k] += 1
            node.va[k] += (total - node.va[k]) / node.na[k]
        if trace:
            trace(f"sim={sim} path={','.join(labels) or '-'} cost={total:g}")
    return root.acts, root.na, root.va


def pouct_search(prob: PlanningProblem, config: PlannerConfig,
                 trace: Callable[[str], None] | None = None) -> SearchResult:
    """Cost-minimizing PO-UCT; returns the root argmin with per-action means and counts."""
    acts = prob.root_actions()
    if not acts:
        raise ValueError("no root actions to search over")
    k = config.workers
    shares = [config.n_sims // k + (1 if i < config.n_sims % k else 0) for i in range(k)]
    seeds = [config.seed * 1_000_003 + i for i in range(k)]
    jobs = [(prob, shares[i], config.c_ucb, seeds[i]) for i in range(k) if shares[i] > 0]
    if config.parallel and len(jobs) > 1:
        with ProcessPoolExecutor(len(jobs)) as pool:
            results = list(pool.map(_search_worker, *zip(*jobs)))
    else:
        results = [_search_worker(*job, trace=trace) for job in jobs]
    counts = {a: 0 for a in acts}
    sums = {a: 0.0 for a in acts}
    for codes, na, va in results:
        for a, n, v in zip(codes, na, va):
            counts[a] += n
            sums[a] += n * v
    q = {a: sums[a] / counts[a] for a in acts if counts[a]}
    best = min(q, key=lambda a: (q[a], acts.index(a)))
    return SearchResult(best, q, counts)


# --------------------------------------------------------------------------
# Building a problem from the real belief

def build_problem(belief: BeliefMap, dfa: Dfa, start: ProductState, frontiers: Sequence[Frontier],
                  actions: Sequence[HighLevelAction], estimator: Estimator,
                  fail_cost: float, max_depth: int) -> tuple[PlanningProblem, dict[int, HighLevelAction]]:
    """Freeze a planning problem at the current belief.

    Besides the root actions, every (frontier, z', z'') with z' reachable
    from the current automaton state becomes a pair, so that rollouts can
    chain transitions beyond what known space reaches.  Returns the problem
    and a map from root action codes back to the actions.
    """
    adj = belief.adjacency()
    fronts = sorted(frontiers, key=lambda f: f.id)
    index = {f.id: i for i, f in enumerate(fronts)}
    from_start = grid_distances(adj, start.cell)
    reachable = [f for f in fronts if f.point in from_start]
    dist_rows = [grid_distances(adj, f.point) for f in fronts]
    dist = [[row.get(g.point, math.inf) for g in fronts] for row in dist_rows]

    live_z = _forward_states(dfa, start.z)
    root = {(a.frontier, a.z1, a.z2): a for a in actions if not a.is_finish}
    pairs: list[Pair] = []
    codes: dict[int, HighLevelAction] = {}
    for f in reachable:
        for z1 in live_z:
            for z2 in z_next(dfa, z1):
                act = root.get((f.id, z1, z2))
                if act is None:
                    enc = explorable(dfa, z1, z2)
                    if enc is None:
                        continue
                    act = HighLevelAction("explore", float(from_start[f.point]), f.id, z1, z2, f.point, enc,
                                          f.cells)
                    root_d = None
                else:
                    root_d = float(act.D)
                    codes[len(pairs)] = act
                pairs.append(Pair(index[f.id], z1, z2, estimator(act), root_d))
    finish = next((a for a in actions if a.is_finish), None)
    if finish is not None:
        codes[FINISH] = finish
    done = completion_costs(belief, dfa)
    finish_from = {(index[f.id], z): float(done[(f.point, z)])
                   for f in reachable for z in live_z if (f.point, z) in done}
    prob = PlanningProblem(pairs, dist, start.z, dfa.accepting, fail_cost, max_depth,
                           None if finish is None else float(finish.D), finish_from)
    return prob, codes


def _forward_states(dfa: Dfa, z: int) -> list[int]:
    seen = {z}
    stack = [z]
    while stack:
        for t in dfa.successors(stack.pop()):
            if t not in seen and dfa.is_live(t):
                seen.add(t)
                stack.append(t)
    return sorted(seen)


def render_pair(prob: PlanningProblem, code: int) -> str:
    if code == FINISH:
        return "finish"
    pr = prob.pairs[code]
    return f"s{pr.s}:z'{pr.z1}->z''{pr.z2}"
