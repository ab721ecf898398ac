"""Non-learned comparison planner: finish when possible, else the nearest progressing frontier."""
from __future__ import annotations

from typing import Sequence

from .actions import HighLevelAction
from .scltl import Dfa, dist_to_accept


class NoAction(ValueError):
    pass


def baseline_key(dfa: Dfa, a: HighLevelAction) -> tuple:
    return (a.D, dist_to_accept(dfa, a.z2), a.frontier, a.z1, a.z2)


def baseline_select(dfa: Dfa, actions: Sequence[HighLevelAction]) -> HighLevelAction:
    """Finish if offered; otherwise minimize (D, hops from z'' to acceptance, frontier, z', z'')."""
    if not actions:
        raise NoAction("empty action set")
    for a in actions:
        if a.is_finish:
            return a
    return min(actions, key=lambda a: baseline_key(dfa, a))
