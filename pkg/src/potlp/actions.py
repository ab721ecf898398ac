"""High-level actions: explore a frontier to attempt one automaton transition, or finish in known space."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .product import PaSearch, ProductState, known_space_completion, pa_dijkstra, z_reach
from .scltl import Dfa, NoSelfLoop, NoSuchTransition, TransitionEncoding, transition_encoding
from .world import BeliefMap, Cell, Frontier

EXPLORE, FINISH = "explore", "finish"


@dataclass(frozen=True)
class HighLevelAction:
    kind: str
    D: float
    frontier: int = -1
    z1: int = -1
    z2: int = -1
    point: Cell | None = None
    encoding: TransitionEncoding | None = None
    # cells of the frontier the point summarizes
    region: tuple[Cell, ...] = field(default=(), compare=False, repr=False)
    # known-space route that realizes D; not part of the action's identity
    path: tuple[ProductState, ...] = field(default=(), compare=False, repr=False)

    @property
    def is_finish(self) -> bool:
        return self.kind == FINISH

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.frontier, self.z1, self.z2)

    def __str__(self) -> str:
        if self.is_finish:
            return f"finish D={self.D:g}"
        return f"s{self.frontier}:z'{self.z1}->z''{self.z2} D={self.D:g}"


def z_next(dfa: Dfa, z: int) -> list[int]:
    """Live states other than ``z`` that one letter can move ``z`` to."""
    return [z2 for z2 in dfa.successors(z) if z2 != z and dfa.is_live(z2)]


def explorable(dfa: Dfa, z1: int, z2: int) -> TransitionEncoding | None:
    """Encoding of z1 -> z2 when it is a valid explore transition, else None."""
    if z1 == z2 or not dfa.is_live(z1) or not dfa.is_live(z2):
        return None
    try:
        return transition_encoding(dfa, z1, z2)
    except (NoSuchTransition, NoSelfLoop):
        return None


def enumerate_actions(belief: BeliefMap, dfa: Dfa, start: ProductState, frontiers: Sequence[Frontier],
                      search: PaSearch | None = None) -> list[HighLevelAction]:
    """The action set A(b), ordered by (frontier id, z', z'') with Finish last."""
    search = search or pa_dijkstra(belief, dfa, start)
    out = []
    for s in sorted(frontiers, key=lambda f: f.id):
        for z1, d in sorted(z_reach(belief, dfa, start, s, search).items()):
            for z2 in z_next(dfa, z1):
                enc = explorable(dfa, z1, z2)
                if enc is None:
                    continue
                out.append(HighLevelAction(EXPLORE, d, s.id, z1, z2, s.point, enc, s.cells,
                                           tuple(search.path_to(s.point, z1))))
    done = known_space_completion(belief, dfa, start, search)
    if done is not None:
        out.append(HighLevelAction(FINISH, done.cost, path=tuple(done.states)))
    return out
