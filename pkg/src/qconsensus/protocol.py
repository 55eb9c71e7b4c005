"""Node variables and the exact arithmetic shared by all three protocols.

Every node carries a *mass* ``(y, z)`` that moves through the network and a
*state* ``(ys, zs)`` that only changes on trigger events.  The state's ratio
``ys / zs`` is the node's estimate of the average; it is never turned into a
float here.  All comparisons between pairs are lexicographic on ``(z, y)``.

Python integers are unbounded, so sums cannot overflow.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional, Sequence


class Mass(NamedTuple):
    y: int
    z: int


class StatePair(NamedTuple):
    y: int
    z: int


class NodeState(NamedTuple):
    mass: Mass
    state: StatePair
    rr: int = 0  # index of the next recipient in the node's priority order


class Average(NamedTuple):
    total: int
    n: int


ZERO = Mass(0, 0)


def lex_key(pair: tuple[int, int]) -> tuple[int, int]:
    """Sort key ordering ``(y, z)`` pairs by ``z`` first, then ``y``."""
    return pair[1], pair[0]


def exact_average(initial_values: Sequence[int]) -> Average:
    if len(initial_values) < 2:
        raise ValueError(f"need at least 2 values, got {len(initial_values)}")
    return Average(total=sum(int(v) for v in initial_values), n=len(initial_values))


def merge_masses(own: Mass, incoming: Iterable[Mass]) -> Mass:
    y, z = own
    for m in incoming:
        y += m.y
        z += m.z
    return Mass(y, z)


def trigger_alg1(mass: Mass, state: StatePair) -> bool:
    # no tie-break on y: the randomized protocol only compares counts
    return mass.z >= state.z


def trigger_alg2(mass: Mass, state: StatePair) -> bool:
    return mass.z > state.z or (mass.z == state.z and mass.y >= state.y)


def alg3_cond1_update(
    state: StatePair, received: Iterable[StatePair]
) -> Optional[StatePair]:
    """Adopt the largest received state if any received state beats ours.

    Returns ``None`` when nothing received strictly dominates ``state``.
    The node's own state takes part in the maximum, so the result is never
    lexicographically below the input.
    """
    best = state
    for s in received:
        if lex_key(s) > lex_key(best):
            best = s
    if best is state:
        return None
    return StatePair(*best)


def alg3_cond2(mass: Mass, state: StatePair) -> bool:
    """True when the node should hand its (non-empty) mass on."""
    return 0 < mass.z < state.z or (mass.z == state.z and mass.y < state.y)


def alg3_cond3(mass: Mass, state: StatePair) -> bool:
    return mass.z > state.z or (mass.z == state.z and mass.y > state.y)


def state_equals_average(state: tuple[int, int], avg: Average) -> bool:
    ys, zs = state
    return ys * avg.n == zs * avg.total
