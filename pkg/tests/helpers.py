"""Small fixtures shared by the unit tests."""
from __future__ import annotations

import numpy as np

from potlp.scltl import compile_dfa, letter, parse_spec
from potlp.world import GridMap

FIRE_SPEC = "(!fire U ext) & (F fire)"
FIRE_SIGMA = ("ext", "fire")
E, F = letter(["ext"], FIRE_SIGMA), letter(["fire"], FIRE_SIGMA)


def fire_dfa():
    return compile_dfa(parse_spec(FIRE_SPEC, FIRE_SIGMA), FIRE_SIGMA)


def grid(rows, sigma=FIRE_SIGMA, legend=None, start=None, cues=(), cue_legend=None, blocking=()):
    """Build a map from ASCII rows: ``#`` obstacle, ``.`` free, legend letters are labeled free cells."""
    legend = legend or {"e": ("ext",), "f": ("fire",), "b": ("ext", "fire")}
    cue_legend = cue_legend or {}
    h, w = len(rows), len(rows[0])
    obstacle = np.zeros((h, w), dtype=bool)
    labels = np.zeros((h, w), dtype=np.int64)
    cue_arr = np.zeros((h, w), dtype=np.int64)
    s = None
    for r, line in enumerate(rows):
        for c, ch in enumerate(line):
            if ch == "#":
                obstacle[r, c] = True
            elif ch == "S":
                s = (c, r)
            elif ch in legend:
                for p in legend[ch]:
                    labels[r, c] |= 1 << sigma.index(p)
            elif ch in cue_legend:
                cue_arr[r, c] |= 1 << cues.index(cue_legend[ch])
    return GridMap(w, h, obstacle, labels, cue_arr, start or s or (0, 0), tuple(sigma), tuple(cues),
                   frozenset(blocking))


def corridor():
    """1x4 corridor x0..x3 with ext at x2 and fire at x3."""
    return grid(["S.ef"])


def partial(truth, cells):
    """A belief that knows exactly ``cells`` of ``truth``."""
    from potlp.world import BeliefMap
    b = BeliefMap.blank(truth)
    for cell in cells:
        b.set_known(cell, truth)
    return b


def random_grid(rng, width, height, sigma=("a", "b", "c"), p_obstacle=0.25, p_label=0.2):
    """Random map with a free start cell; labels are independent per proposition."""
    obstacle = rng.random((height, width)) < p_obstacle
    labels = np.zeros((height, width), dtype=np.int64)
    for i in range(len(sigma)):
        labels |= (rng.random((height, width)) < p_label).astype(np.int64) << i
    labels[obstacle] = 0
    free = np.argwhere(~obstacle)
    if len(free) == 0:
        obstacle[0, 0] = False
        free = np.array([[0, 0]])
    r, c = free[rng.integers(len(free))]
    return GridMap(width, height, obstacle, labels, np.zeros((height, width), dtype=np.int64),
                   (int(c), int(r)), tuple(sigma))


def random_problem(rng, max_subgoals=3, max_transitions=2, fail_cost=200.0):
    """Small planning instance: a chain automaton, costs in [1, 20], p in {0.1, ..., 0.9}."""
    from potlp.estimate import EstimateTriple
    from potlp.planner import Pair, PlanningProblem
    k = int(rng.integers(1, max_subgoals + 1))
    depth = int(rng.integers(1, max_transitions + 1))
    pairs = []
    for s in range(k):
        for z in range(depth):
            est = EstimateTriple(float(rng.integers(1, 10)) / 10, float(rng.integers(1, 21)),
                                 float(rng.integers(1, 21)))
            pairs.append(Pair(s, z, z + 1, est, float(rng.integers(1, 21)) if z == 0 else None))
    d = rng.integers(1, 21, size=(k, k)).astype(float)
    d = np.triu(d, 1) + np.triu(d, 1).T
    return PlanningProblem(pairs, d.tolist(), 0, frozenset({depth}), fail_cost)
