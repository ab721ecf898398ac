"""Labeled occupancy grids, partial belief maps, line-of-sight sensing and frontiers."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple

import numpy as np
from scipy import ndimage

from .scltl import canonical_sigma, letter_names

Cell = tuple[int, int]  # (col, row)

UNKNOWN, FREE, OBSTACLE = 0, 1, 2

# fixed neighbor order keeps every search deterministic
MOVES: tuple[tuple[int, int], ...] = ((0, -1), (-1, 0), (1, 0), (0, 1))


class MapFormatError(ValueError):
    pass


def _mask(names: Iterable[str], order: tuple[str, ...]) -> int:
    index = {p: i for i, p in enumerate(order)}
    out = 0
    for p in names:
        if p not in index:
            raise MapFormatError(f"undeclared name {p!r}")
        out |= 1 << index[p]
    return out


@dataclass(frozen=True, eq=False)
class GridMap:
    """Ground truth: occupancy, per-cell proposition and cue bitmasks, start cell."""

    width: int
    height: int
    obstacle: np.ndarray
    labels: np.ndarray
    cues: np.ndarray
    start: Cell
    sigma: tuple[str, ...]
    cue_set: tuple[str, ...] = ()
    blocking: frozenset[str] = frozenset()
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        for name in ("obstacle", "labels", "cues"):
            arr = getattr(self, name)
            if arr.shape != (self.height, self.width):
                raise ValueError(f"{name} has shape {arr.shape}, expected {(self.height, self.width)}")
            arr.setflags(write=False)
        if tuple(self.sigma) != canonical_sigma(self.sigma) or tuple(self.cue_set) != tuple(sorted(set(self.cue_set))):
            raise ValueError("sigma and cue_set must be sorted and unique")
        if not self.blocking <= set(self.sigma):
            raise ValueError("blocking labels must be declared propositions")
        c, r = self.start
        if not (0 <= c < self.width and 0 <= r < self.height) or self.obstacle[r, c]:
            raise ValueError(f"start {self.start} is not a free cell")
        if ((self.labels != 0) & self.obstacle).any() or ((self.cues != 0) & self.obstacle).any():
            raise ValueError("labels and cues must sit on free cells")

    @property
    def blocking_mask(self) -> int:
        return _mask(self.blocking, self.sigma)

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.width, self.height))

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.obstacle[cell[1], cell[0]]

    def label(self, cell: Cell) -> int:
        return int(self.labels[cell[1], cell[0]])

    def label_names(self, cell: Cell) -> frozenset[str]:
        return letter_names(self.label(cell), self.sigma)

    def cells_with(self, prop: str) -> list[Cell]:
        bit = 1 << self.sigma.index(prop)
        rows, cols = np.nonzero(self.labels & bit)
        return sorted(zip(cols.tolist(), rows.tolist()), key=lambda c: (c[1], c[0]))

    def same_as(self, other: "GridMap") -> bool:
        return self.to_text() == other.to_text()

    # -- text format

    def to_text(self) -> str:
        head = (f"v1 map {self.width} {self.height} sigma={','.join(self.sigma)} "
                f"cues={','.join(self.cue_set)} start={self.start[0]},{self.start[1]}")
        lines = [head]
        for r in range(self.height):
            lines.append("".join("#" if self.obstacle[r, c] else "." for c in range(self.width)))
        for r in range(self.height):
            for c in range(self.width):
                for p in sorted(letter_names(int(self.labels[r, c]), self.sigma)):
                    lines.append(f"label {c},{r} {p}")
        for r in range(self.height):
            for c in range(self.width):
                for q in sorted(letter_names(int(self.cues[r, c]), self.cue_set)):
                    lines.append(f"cue {c},{r} {q}")
        lines += [f"flag blocksPassage {p}" for p in sorted(self.blocking)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GridMap":
        lines = text.splitlines()
        head = lines[0].split()
        if head[:2] != ["v1", "map"] or len(head) != 7:
            raise MapFormatError("expected header 'v1 map <w> <h> sigma=.. cues=.. start=c,r'")
        width, height = int(head[2]), int(head[3])
        fields = dict(tok.split("=", 1) for tok in head[4:])
        sigma = tuple(p for p in fields["sigma"].split(",") if p)
        cue_set = tuple(q for q in fields["cues"].split(",") if q)
        start = tuple(int(v) for v in fields["start"].split(","))
        rows = lines[1:1 + height]
        if len(rows) != height or any(len(row) != width or set(row) - {".", "#"} for row in rows):
            raise MapFormatError("grid rows do not match the declared size")
        obstacle = np.array([[ch == "#" for ch in row] for row in rows], dtype=bool).reshape(height, width)
        labels = np.zeros((height, width), dtype=np.int64)
        cues = np.zeros((height, width), dtype=np.int64)
        blocking = set()
        for line in lines[1 + height:]:
            parts = line.split()
            if not parts:
                continue
            if parts[0] in ("label", "cue") and len(parts) == 3:
                c, r = (int(v) for v in parts[1].split(","))
                if parts[0] == "label":
                    labels[r, c] |= _mask([parts[2]], sigma)
                else:
                    cues[r, c] |= _mask([parts[2]], cue_set)
            elif parts[:2] == ["flag", "blocksPassage"] and len(parts) == 3:
                blocking.add(parts[2])
            else:
                raise MapFormatError(f"cannot parse line {line!r}")
        return cls(width, height, obstacle, labels, cues, start, sigma, cue_set, frozenset(blocking))


class BeliefMap:
    """The agent's partial knowledge of a :class:`GridMap`.

    ``known`` holds UNKNOWN/FREE/OBSTACLE per cell; labels and cues are copied
    from the truth when a cell is revealed and stay zero elsewhere.
    """

    def __init__(self, width: int, height: int, sigma, cue_set=(), blocking=frozenset()):
        self.width, self.height = width, height
        self.sigma = tuple(sigma)
        self.cue_set = tuple(cue_set)
        self.blocking = frozenset(blocking)
        self.blocking_mask = _mask(self.blocking, self.sigma)
        self.known = np.zeros((height, width), dtype=np.int8)
        self.labels = np.zeros((height, width), dtype=np.int64)
        self.cues = np.zeros((height, width), dtype=np.int64)
        self.version = 0
        self._adjacency = None

    @classmethod
    def blank(cls, truth: GridMap) -> "BeliefMap":
        return cls(truth.width, truth.height, truth.sigma, truth.cue_set, truth.blocking)

    @classmethod
    def full(cls, truth: GridMap) -> "BeliefMap":
        b = cls.blank(truth)
        b.known[:] = np.where(truth.obstacle, OBSTACLE, FREE)
        b.labels[:] = truth.labels
        b.cues[:] = truth.cues
        return b

    def copy(self) -> "BeliefMap":
        b = BeliefMap(self.width, self.height, self.sigma, self.cue_set, self.blocking)
        b.known[:] = self.known
        b.labels[:] = self.labels
        b.cues[:] = self.cues
        b.version = self.version
        return b

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def state(self, cell: Cell) -> int:
        return int(self.known[cell[1], cell[0]])

    def is_known_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.known[cell[1], cell[0]] == FREE

    def label(self, cell: Cell) -> int:
        return int(self.labels[cell[1], cell[0]])

    def unknown_count(self) -> int:
        return int((self.known == UNKNOWN).sum())

    def set_known(self, cell: Cell, truth: GridMap) -> bool:
        c, r = cell
        if self.known[r, c] != UNKNOWN:
            return False
        self.known[r, c] = OBSTACLE if truth.obstacle[r, c] else FREE
        self.labels[r, c] = truth.labels[r, c]
        self.cues[r, c] = truth.cues[r, c]
        self.version += 1
        self._adjacency = None
        return True

    def adjacency(self) -> dict[Cell, tuple[Cell, ...]]:
        """Legal unit moves between known-free cells (cached until the next reveal)."""
        if self._adjacency is None:
            self._adjacency = grid_adjacency(self.known == FREE, self.labels, self.blocking_mask)
        return self._adjacency

    def consistent_with(self, truth: GridMap) -> bool:
        known = self.known != UNKNOWN
        return bool((((self.known == OBSTACLE) == truth.obstacle) | ~known).all()
                    and ((self.labels == truth.labels) | ~known).all()
                    and ((self.cues == truth.cues) | ~known).all())


def grid_adjacency(free: np.ndarray, labels: np.ndarray, blocking_mask: int) -> dict[Cell, tuple[Cell, ...]]:
    """4-connected moves over ``free`` cells.

    A move between two cells that both carry a passage-blocking label is
    not allowed, so a run of such cells can be entered but not crossed.
    """
    height, width = free.shape
    blocked = (labels & blocking_mask) != 0 if blocking_mask else np.zeros_like(free)
    rows, cols = np.nonzero(free)
    adj: dict[Cell, tuple[Cell, ...]] = {}
    for r, c in zip(rows.tolist(), cols.tolist()):
        out = []
        for dc, dr in MOVES:
            cc, rr = c + dc, r + dr
            if 0 <= cc < width and 0 <= rr < height and free[rr, cc]:
                if blocked[r, c] and blocked[rr, cc]:
                    continue
                out.append((cc, rr))
        adj[(c, r)] = tuple(out)
    return adj


def truth_adjacency(truth: GridMap) -> dict[Cell, tuple[Cell, ...]]:
    return grid_adjacency(~truth.obstacle, truth.labels, truth.blocking_mask)


# --------------------------------------------------------------------------
# Sensing

def bresenham(a: Cell, b: Cell) -> list[Cell]:
    """Grid cells on the segment from ``a`` to ``b`` inclusive."""
    x0, y0 = a
    x1, y1 = b
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = [(x0, y0)]
    while (x0, y0) != (x1, y1):
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
        out.append((x0, y0))
    return out


@lru_cache(maxsize=64)
def _rays(radius: float) -> tuple[tuple[int, int, tuple[Cell, ...]], ...]:
    reach = int(np.floor(radius))
    rays = []
    for dy in range(-reach, reach + 1):
        for dx in range(-reach, reach + 1):
            if dx * dx + dy * dy <= radius * radius:
                rays.append((dx, dy, tuple(bresenham((0, 0), (dx, dy))[1:-1])))
    rays.sort(key=lambda t: (abs(t[0]) + abs(t[1]), t[1], t[0]))
    return tuple(rays)


def reveal(belief: BeliefMap, truth: GridMap, pose: Cell, radius: float) -> tuple[BeliefMap, set[Cell]]:
    """Mark every cell in line of sight within ``radius`` as known (in place).

    A target is visible when no intermediate cell of the Bresenham ray from
    the pose is an obstacle; obstacle cells themselves are seen.
    """
    pc, pr = pose
    obstacle = truth.obstacle
    new: set[Cell] = set()
    for dx, dy, between in _rays(float(radius)):
        c, r = pc + dx, pr + dy
        if not (0 <= c < truth.width and 0 <= r < truth.height):
            continue
        if belief.known[r, c] != UNKNOWN:
            continue
        if any(obstacle[pr + iy, pc + ix] for ix, iy in between):
            continue
        belief.set_known((c, r), truth)
        new.add((c, r))
    return belief, new


# --------------------------------------------------------------------------
# Frontiers

@dataclass(frozen=True)
class Frontier:
    id: int
    cells: tuple[Cell, ...]
    point: Cell

    @property
    def size(self) -> int:
        return len(self.cells)


_EIGHT = np.ones((3, 3), dtype=int)


def extract_frontiers(belief: BeliefMap) -> list[Frontier]:
    """Known-free cells touching unknown space, grouped into 8-connected components.

    Each component's subgoal point is its cell nearest the centroid (ties by
    row then column); components are numbered by their first cell in
    row-major order.
    """
    free = belief.known == FREE
    unknown = belief.known == UNKNOWN
    touch = np.zeros_like(unknown)
    touch[1:, :] |= unknown[:-1, :]
    touch[:-1, :] |= unknown[1:, :]
    touch[:, 1:] |= unknown[:, :-1]
    touch[:, :-1] |= unknown[:, 1:]
    boundary = free & touch
    labeled, count = ndimage.label(boundary, structure=_EIGHT)
    groups = []
    for k in range(1, count + 1):
        rows, cols = np.nonzero(labeled == k)
        cells = sorted(zip(rows.tolist(), cols.tolist()))
        cr, cc = rows.mean(), cols.mean()
        best = min(cells, key=lambda rc: ((rc[0] - cr) ** 2 + (rc[1] - cc) ** 2, rc[0], rc[1]))
        groups.append((cells[0], cells, best))
    groups.sort(key=lambda g: g[0])
    return [Frontier(i, tuple((c, r) for r, c in cells), (best[1], best[0]))
            for i, (_, cells, best) in enumerate(groups)]


class Lts(NamedTuple):
    states: list[Cell]
    edges: list[tuple[Cell, Cell, int]]
    adjacency: dict[Cell, tuple[Cell, ...]]
    labels: dict[Cell, frozenset[str]]


def lts_view(belief: BeliefMap) -> Lts:
    """The known-free part of the belief as a labeled transition system (unit weights)."""
    adj = belief.adjacency()
    states = sorted(adj, key=lambda c: (c[1], c[0]))
    order = {c: i for i, c in enumerate(states)}
    edges = sorted({(a, b, 1) if order[a] < order[b] else (b, a, 1) for a in adj for b in adj[a]},
                   key=lambda e: (order[e[0]], order[e[1]]))
    labels = {c: letter_names(belief.label(c), belief.sigma) for c in states}
    return Lts(states, edges, adj, labels)


def grid_distances(adj: Mapping[Cell, tuple[Cell, ...]], source: Cell) -> dict[Cell, int]:
    """Label-free breadth-first distances over an adjacency map."""
    dist = {source: 0}
    frontier = [source]
    while frontier:
        nxt = []
        for a in frontier:
            d = dist[a] + 1
            for b in adj.get(a, ()):
                if b not in dist:
                    dist[b] = d
                    nxt.append(b)
        frontier = nxt
    return dist
