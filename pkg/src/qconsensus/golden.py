"""The two worked examples, with every expected table cell embedded.

Each table row is ``(y, z, ys, zs)`` for nodes v1..v4.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .engine import RunConfig, Trace, run
from .graph import Digraph, PriorityMap, assign_priorities, build_digraph

Row = tuple[int, int, int, int]

# example 1: directed ring v1 -> v2 -> v3 -> v4 -> v1, run with alg2
EXAMPLE1_EDGES = [(2, 1), (3, 2), (4, 3), (1, 4)]
EXAMPLE1_VALUES = [9, 3, 9, 3]
EXAMPLE1_TABLES: dict[int, list[Row]] = {
    0: [(9, 1, 9, 1), (3, 1, 3, 1), (9, 1, 9, 1), (3, 1, 3, 1)],
    1: [(3, 1, 9, 1), (9, 1, 9, 1), (3, 1, 9, 1), (9, 1, 9, 1)],
    2: [(12, 2, 12, 2), (0, 0, 9, 1), (12, 2, 12, 2), (0, 0, 9, 1)],
    3: [(0, 0, 12, 2), (12, 2, 12, 2), (0, 0, 12, 2), (12, 2, 12, 2)],
}

# example 2: four nodes, six edges, fixed priorities, run with alg3
EXAMPLE2_EDGES = [(3, 1), (4, 1), (1, 2), (1, 3), (4, 3), (2, 4)]
EXAMPLE2_PRIORITIES = [(1, 4, 0), (1, 3, 1), (2, 1, 0), (3, 1, 0), (3, 4, 1), (4, 2, 0)]
EXAMPLE2_VALUES = [2, 4, 7, 9]
EXAMPLE2_TABLES: dict[int, list[Row]] = {
    0: [(2, 1, 2, 1), (4, 1, 4, 1), (7, 1, 7, 1), (9, 1, 9, 1)],
    1: [(4, 1, 7, 1), (0, 0, 9, 1), (7, 1, 7, 1), (11, 2, 11, 2)],
    2: [(0, 0, 9, 1), (0, 0, 9, 1), (11, 2, 11, 2), (11, 2, 11, 2)],
    3: [(0, 0, 9, 1), (0, 0, 11, 2), (11, 2, 11, 2), (11, 2, 11, 2)],
    4: [(0, 0, 11, 2), (0, 0, 11, 2), (11, 2, 11, 2), (11, 2, 11, 2)],
}

FIELDS = ("y", "z", "ys", "zs")


def example1_graph() -> Digraph:
    return build_digraph(4, [(j - 1, i - 1) for j, i in EXAMPLE1_EDGES])


def example2_graph() -> Digraph:
    return build_digraph(4, [(j - 1, i - 1) for j, i in EXAMPLE2_EDGES])


def example2_priorities(d: Optional[Digraph] = None) -> PriorityMap:
    d = d or example2_graph()
    return assign_priorities(d, [(j - 1, l - 1, o) for j, l, o in EXAMPLE2_PRIORITIES])


def example1_config(**kw) -> RunConfig:
    return RunConfig("alg2", example1_graph(), EXAMPLE1_VALUES, **kw)


def example2_config(**kw) -> RunConfig:
    g = example2_graph()
    return RunConfig("alg3", g, EXAMPLE2_VALUES, priorities=example2_priorities(g), **kw)


@dataclass
class Mismatch:
    round: int
    node: int  # 1-based, as in the tables
    field: str
    expected: int
    actual: Optional[int]

    def __str__(self) -> str:
        return (
            f"round {self.round}, node v{self.node}, field {self.field}: "
            f"expected {self.expected}, got {self.actual}"
        )


def diff_table(trace: Trace, k: int, table: Sequence[Row]) -> Optional[Mismatch]:
    """First differing cell of table ``k`` (row-major), or ``None``."""
    if k >= len(trace.snapshots):
        return Mismatch(k, 1, FIELDS[0], table[0][0], None)
    net = trace.snapshots[k]
    for j, expected in enumerate(table):
        s = net[j]
        actual = (s.mass.y, s.mass.z, s.state.y, s.state.z)
        for name, e, a in zip(FIELDS, expected, actual):
            if e != a:
                return Mismatch(k, j + 1, name, e, a)
    return None


@dataclass
class GoldenResult:
    name: str
    round: int
    mismatch: Optional[Mismatch]

    @property
    def ok(self) -> bool:
        return self.mismatch is None


def check_example(name: str, trace: Trace, tables: dict[int, list[Row]]) -> list[GoldenResult]:
    return [GoldenResult(name, k, diff_table(trace, k, t)) for k, t in sorted(tables.items())]


def run_golden(
    tables1: dict[int, list[Row]] = EXAMPLE1_TABLES,
    tables2: dict[int, list[Row]] = EXAMPLE2_TABLES,
    extra_rounds: int = 20,
) -> tuple[list[GoldenResult], Trace, Trace]:
    """Replay both examples and compare against the embedded tables.

    Example 2 is run ``extra_rounds`` past its last table so callers can
    confirm that nothing is sent once the tables end.
    """
    t1 = run(example1_config())
    last2 = max(tables2)
    t2 = run(example2_config(termination="round-cap", max_rounds=last2 + extra_rounds))
    results = check_example("example1", t1, tables1) + check_example("example2", t2, tables2)
    return results, t1, t2
