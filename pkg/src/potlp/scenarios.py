"""Seeded generators for the firefighting and delivery worlds."""
from __future__ import annotations

import numpy as np

from .world import GridMap

FIRE_SIGMA = ("alarm", "exit", "extinguisher", "fire")
FIRE_CUES = ("green_floor", "smoke")
ROOM_TYPES = ("office", "lab", "classroom")
PERSON_FOR_ROOM = {"office": "professor", "lab": "grad", "classroom": "undergrad"}
DELIVERY_SIGMA = ("grad", "professor", "undergrad")
DELIVERY_CUES = ("classroom_wall", "lab_wall", "lit_room", "office_wall")

# Task vocabulary used by the CLI and the benchmark harness.
FIREFIGHTING_SPECS = {
    1: "(!fire U alarm) | ((!fire U extinguisher) & F fire)",
    2: "!fire U (alarm & F exit)",
    3: "(!fire U extinguisher) & F (fire & F exit)",
    4: "!fire U exit",
}
DELIVERY_SPECS = {
    1: "F professor & F grad & F undergrad",
}
SPECS = {"firefighting": FIREFIGHTING_SPECS, "delivery": DELIVERY_SPECS}


class ParamError(ValueError):
    pass


def _bit(order, name):
    return 1 << order.index(name)


def gen_firefighting(seed: int, room_size: int = 5, hallway_length: int = 12, hallway_count: int = 3,
                     smoke_cells: int = 2, fire_length: int = 2, cue_correlation: float = 1.0) -> GridMap:
    """Two rooms joined by parallel hallways.

    One hallway is a dead end (open toward the start room) with the alarm at
    its closed end and ``green_floor`` on its floor.  One hallway, possibly
    the same one, holds a run of ``fire_length`` fire cells flagged as
    passage-blocking, with ``smoke`` on the ``smoke_cells`` hallway cells
    nearest each open mouth.  Extinguisher and exit are in the far room.

    With probability ``1 - cue_correlation`` each cue is painted on a
    uniformly drawn hallway instead of the one it advertises.
    """
    if hallway_count < 3:
        raise ParamError("need at least 3 hallways so that one always connects the rooms")
    if room_size < 2 * hallway_count - 1:
        raise ParamError(f"room_size {room_size} too small for {hallway_count} separated hallways")
    if hallway_length < fire_length + smoke_cells + 3:
        raise ParamError("hallway too short for fire, smoke and alarm")
    if fire_length < 2:
        raise ParamError("fire_length must be at least 2 for the fire to block passage")
    if not 0.0 <= cue_correlation <= 1.0:
        raise ParamError("cue_correlation must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    rs, hl = room_size, hallway_length
    width, height = 2 * rs + hl + 2, rs + 2
    obstacle = np.ones((height, width), dtype=bool)
    left = (1, 1 + rs)
    right = (1 + rs + hl, 1 + 2 * rs + hl)
    obstacle[1:1 + rs, left[0]:left[1]] = False
    obstacle[1:1 + rs, right[0]:right[1]] = False
    hall_rows = [1 + round(i * (rs - 1) / (hallway_count - 1)) for i in range(hallway_count)]
    hall_cols = list(range(1 + rs, 1 + rs + hl))
    for r in hall_rows:
        obstacle[r, hall_cols[0]:hall_cols[-1] + 1] = False

    start_left = bool(rng.integers(2))
    start_room, other_room = (left, right) if start_left else (right, left)
    # hallway cells ordered from the start room toward the other room
    toward_other = hall_cols if start_left else hall_cols[::-1]

    alarm_hall = int(rng.integers(hallway_count))
    fire_hall = int(rng.integers(hallway_count))
    draws = rng.random(2)
    decoys = rng.integers(hallway_count, size=2)
    green_hall = alarm_hall if draws[0] < cue_correlation else int(decoys[0])
    smoke_hall = fire_hall if draws[1] < cue_correlation else int(decoys[1])

    labels = np.zeros((height, width), dtype=np.int64)
    cues = np.zeros((height, width), dtype=np.int64)

    ar = hall_rows[alarm_hall]
    obstacle[ar, toward_other[-1]] = True
    alarm_span = toward_other[:-1]
    labels[ar, alarm_span[-1]] |= _bit(FIRE_SIGMA, "alarm")
    for c in toward_other:
        if not obstacle[hall_rows[green_hall], c]:
            cues[hall_rows[green_hall], c] |= _bit(FIRE_CUES, "green_floor")

    fr = hall_rows[fire_hall]
    span = alarm_span if fire_hall == alarm_hall else toward_other
    if fire_hall == alarm_hall:
        # keep the fire strictly between the mouth and the alarm
        lo = smoke_cells
        hi = len(span) - 1 - fire_length
    else:
        lo = smoke_cells
        hi = len(span) - smoke_cells - fire_length
    first = lo + (hi - lo) // 2
    fire_cols = span[first:first + fire_length]
    for c in fire_cols:
        labels[fr, c] |= _bit(FIRE_SIGMA, "fire")
    sr = hall_rows[smoke_hall]
    smoke_span = alarm_span if smoke_hall == alarm_hall else toward_other
    mouths = [smoke_span[:smoke_cells]]
    if smoke_hall != alarm_hall:
        mouths.append(smoke_span[::-1][:smoke_cells])
    for group in mouths:
        for c in group:
            cues[sr, c] |= _bit(FIRE_CUES, "smoke")

    def room_cells(room):
        return [(c, r) for r in range(1, 1 + rs) for c in range(room[0], room[1])]

    far = room_cells(other_room)
    picks = rng.choice(len(far), size=2, replace=False)
    ext_cell, exit_cell = far[int(picks[0])], far[int(picks[1])]
    labels[ext_cell[1], ext_cell[0]] |= _bit(FIRE_SIGMA, "extinguisher")
    labels[exit_cell[1], exit_cell[0]] |= _bit(FIRE_SIGMA, "exit")
    near = room_cells(start_room)
    start = near[int(rng.integers(len(near)))]

    meta = {"alarm_hall": alarm_hall, "fire_hall": fire_hall, "green_hall": green_hall,
            "smoke_hall": smoke_hall, "start_left": start_left,
            "hall_rows": tuple(hall_rows)}
    return GridMap(width, height, obstacle, labels, cues, start, FIRE_SIGMA, FIRE_CUES,
                   frozenset({"fire"}), meta)


def gen_delivery(seed: int, room_count: int = 6, hallway_layout: str = "straight", room_size: int = 4) -> GridMap:
    """Rooms off a single corridor; one occupied room per person type.

    ``hallway_layout`` is ``"straight"`` (rooms on both sides of the corridor)
    or ``"one-sided"``.  Each room is entered through a door in the middle
    of its corridor wall; room cells and the door carry the room-type wall
    cue, and occupied rooms additionally carry ``lit_room``.
    """
    if room_count < len(ROOM_TYPES):
        raise ParamError("need at least one room of each type")
    if room_size < 2:
        raise ParamError("room_size must be at least 2")
    if hallway_layout not in ("straight", "one-sided"):
        raise ParamError(f"unknown hallway layout {hallway_layout!r}")
    rng = np.random.default_rng(seed)
    rs = room_size
    sides = 2 if hallway_layout == "straight" else 1
    per_side = -(-room_count // sides)
    width = per_side * (rs + 1) + 1
    height = 2 * rs + 5 if sides == 2 else rs + 4
    corridor = rs + 2
    obstacle = np.ones((height, width), dtype=bool)
    obstacle[corridor, 1:width - 1] = False

    rooms = []  # (cells, door)
    for k in range(room_count):
        side, i = (k % sides, k // sides)
        c0 = 1 + i * (rs + 1)
        r0 = 1 if side == 0 else corridor + 2
        door_row = corridor - 1 if side == 0 else corridor + 1
        cells = [(c, r) for r in range(r0, r0 + rs) for c in range(c0, c0 + rs)]
        for c, r in cells:
            obstacle[r, c] = False
        door = (c0 + rs // 2, door_row)
        obstacle[door[1], door[0]] = False
        rooms.append((cells, door))

    kinds = list(ROOM_TYPES) + [ROOM_TYPES[int(rng.integers(3))] for _ in range(room_count - 3)]
    kinds = [kinds[int(j)] for j in rng.permutation(room_count)]
    labels = np.zeros((height, width), dtype=np.int64)
    cues = np.zeros((height, width), dtype=np.int64)
    occupied = {}
    for kind in ROOM_TYPES:
        choices = [k for k in range(room_count) if kinds[k] == kind]
        occupied[kind] = choices[int(rng.integers(len(choices)))]
    for k, (cells, door) in enumerate(rooms):
        tag = _bit(DELIVERY_CUES, f"{kinds[k]}_wall")
        lit = _bit(DELIVERY_CUES, "lit_room") if occupied[kinds[k]] == k else 0
        for c, r in cells + [door]:
            cues[r, c] |= tag | lit
    for kind, k in occupied.items():
        cells = rooms[k][0]
        c, r = cells[int(rng.integers(len(cells)))]
        labels[r, c] |= _bit(DELIVERY_SIGMA, PERSON_FOR_ROOM[kind])
    start = (int(rng.integers(1, width - 1)), corridor)
    meta = {"room_types": tuple(kinds), "occupied": dict(occupied),
            "doors": tuple(door for _, door in rooms)}
    return GridMap(width, height, obstacle, labels, cues, start, DELIVERY_SIGMA, DELIVERY_CUES,
                   frozenset(), meta)


GENERATORS = {"firefighting": gen_firefighting, "delivery": gen_delivery}


def generate(scenario: str, seed: int, **params) -> GridMap:
    try:
        gen = GENERATORS[scenario]
    except KeyError:
        raise ParamError(f"unknown scenario {scenario!r}") from None
    return gen(seed, **params)
