import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from potlp.world import (FREE, OBSTACLE, UNKNOWN, BeliefMap, GridMap, MapFormatError, bresenham,
                         extract_frontiers, grid_distances, lts_view, reveal)

from helpers import grid, partial, random_grid


def test_reveal_open_square():
    truth = grid(["...", ".S.", "..."])
    b, new = reveal(BeliefMap.blank(truth), truth, (1, 1), 2)
    assert len(new) == 9 and b.unknown_count() == 0


def test_reveal_occlusion():
    truth = grid(["S#."])
    b, new = reveal(BeliefMap.blank(truth), truth, (0, 0), 2)
    assert new == {(0, 0), (1, 0)}
    assert b.state((1, 0)) == OBSTACLE and b.state((2, 0)) == UNKNOWN


def test_reveal_radius_zero():
    truth = grid(["...", ".S.", "..."])
    _, new = reveal(BeliefMap.blank(truth), truth, (1, 1), 0)
    assert new == {(1, 1)}


def test_reveal_copies_labels():
    truth = grid(["Sef"])
    b, _ = reveal(BeliefMap.blank(truth), truth, (0, 0), 1)
    assert b.label((1, 0)) == truth.label((1, 0)) and b.label((2, 0)) == 0


def test_bresenham_endpoints():
    line = bresenham((0, 0), (3, 1))
    assert line[0] == (0, 0) and line[-1] == (3, 1) and len(line) == 4


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 6))
def test_reveal_monotone_idempotent_and_truthful(seed, radius):
    rng = np.random.default_rng(seed)
    truth = random_grid(rng, 7, 6)
    b = BeliefMap.blank(truth)
    reveal(b, truth, truth.start, radius)
    before = b.known.copy()
    _, again = reveal(b, truth, truth.start, radius)
    assert again == set() and (b.known == before).all()
    free = np.argwhere(b.known == FREE)
    r, c = free[rng.integers(len(free))]
    reveal(b, truth, (int(c), int(r)), radius)
    assert ((before == UNKNOWN) | (b.known == before)).all()
    assert b.consistent_with(truth)


def test_frontiers_fully_known_is_empty():
    truth = grid(["S..", "...", "..."])
    assert extract_frontiers(BeliefMap.full(truth)) == []


def test_frontier_left_column():
    truth = grid(["S..", "...", "..."])
    b = partial(truth, [(0, 0), (0, 1), (0, 2)])
    (f,) = extract_frontiers(b)
    assert f.size == 3 and f.point == (0, 1) and f.id == 0


def test_two_disconnected_frontiers():
    truth = grid(["S..", "###", "..."])
    b = partial(truth, [(0, 0), (0, 2), (0, 1), (1, 1), (2, 1)])
    fs = extract_frontiers(b)
    assert len(fs) == 2
    assert fs[0].cells == ((0, 0),) and fs[1].cells == ((0, 2),)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_frontiers_partition_boundary(seed):
    rng = np.random.default_rng(seed)
    truth = random_grid(rng, 8, 7)
    b, _ = reveal(BeliefMap.blank(truth), truth, truth.start, 3)
    fs = extract_frontiers(b)
    cells = [c for f in fs for c in f.cells]
    assert len(cells) == len(set(cells))
    for f in fs:
        assert f.point in f.cells
        for c, r in f.cells:
            assert b.state((c, r)) == FREE
            assert any(b.in_bounds(n) and b.state(n) == UNKNOWN
                       for n in ((c + 1, r), (c - 1, r), (c, r + 1), (c, r - 1)))
    assert [f.id for f in extract_frontiers(b)] == [f.id for f in fs]


def test_lts_examples():
    truth = grid(["S.", ".#"])
    two = lts_view(partial(truth, [(0, 0), (1, 0)]))
    assert len(two.states) == 2 and two.edges == [((0, 0), (1, 0), 1)]
    one = lts_view(partial(truth, [(0, 0)]))
    assert len(one.states) == 1 and one.edges == []
    ell = lts_view(BeliefMap.full(truth))
    assert len(ell.states) == 3 and len(ell.edges) == 2


def test_blocking_labels_cannot_be_crossed():
    truth = grid(["Sff."], blocking=("fire",))
    adj = BeliefMap.full(truth).adjacency()
    assert (2, 0) not in adj[(1, 0)] and (1, 0) in adj[(0, 0)]
    assert (3, 0) not in grid_distances(adj, (0, 0))


def test_map_text_roundtrip():
    truth = grid(["S.e#", ".bf."], cues=("smoke",), cue_legend={"~": "smoke"}, blocking=("fire",))
    text = truth.to_text()
    back = GridMap.from_text(text)
    assert back.to_text() == text and back.same_as(truth)
    assert text.startswith("v1 map 4 2 sigma=ext,fire")


def test_map_text_errors():
    with pytest.raises(MapFormatError):
        GridMap.from_text("map 1 1 sigma= cues= start=0,0\n.\n")
    with pytest.raises(MapFormatError):
        GridMap.from_text("v1 map 2 1 sigma= cues= start=0,0\n.\n")


def test_gridmap_invariants():
    with pytest.raises(ValueError):
        grid(["#."], start=(0, 0))
