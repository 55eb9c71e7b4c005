"""Directed communication graphs and the per-node transmission schedules.

Nodes are indexed ``0..n-1`` inside the library.  An edge is stored as the
pair ``(receiver, sender)``: ``(j, i)`` means node ``j`` can hear node ``i``.
Text formats (see :mod:`qconsensus.io`) use 1-based ids.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np


class GraphError(ValueError):
    """Raised for malformed graphs, priority lists or probability tables."""


@dataclass(frozen=True)
class Digraph:
    """Immutable digraph with cached neighbour lists (sorted by node id)."""

    n: int
    edges: frozenset[tuple[int, int]]
    in_neighbors: tuple[tuple[int, ...], ...]
    out_neighbors: tuple[tuple[int, ...], ...]

    @property
    def m(self) -> int:
        return len(self.edges)

    def in_degree(self, j: int) -> int:
        return len(self.in_neighbors[j])

    def out_degree(self, j: int) -> int:
        return len(self.out_neighbors[j])

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def build_digraph(n: int, edges: Iterable[tuple[int, int]]) -> Digraph:
    """Build a :class:`Digraph` from ``(receiver, sender)`` pairs.

    Raises :class:`GraphError` on ``n < 2``, out-of-range endpoints,
    self-edges and duplicate edges.  Strong connectivity is *not* checked
    here; see :func:`is_strongly_connected` / :func:`require_strongly_connected`.
    """
    if n < 2:
        raise GraphError(f"need at least 2 nodes, got {n}")
    seen: set[tuple[int, int]] = set()
    ins: list[list[int]] = [[] for _ in range(n)]
    outs: list[list[int]] = [[] for _ in range(n)]
    for edge in edges:
        j, i = (int(v) for v in edge)
        if not (0 <= j < n and 0 <= i < n):
            raise GraphError(f"edge {(j, i)} has an endpoint outside 0..{n - 1}")
        if j == i:
            raise GraphError(f"self-edge on node {j}")
        if (j, i) in seen:
            raise GraphError(f"duplicate edge {(j, i)}")
        seen.add((j, i))
        ins[j].append(i)
        outs[i].append(j)
    return Digraph(
        n=n,
        edges=frozenset(seen),
        in_neighbors=tuple(tuple(sorted(a)) for a in ins),
        out_neighbors=tuple(tuple(sorted(a)) for a in outs),
    )


def _reaches_all(start: int, adjacency: tuple[tuple[int, ...], ...]) -> bool:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == len(adjacency)


def is_strongly_connected(d: Digraph) -> bool:
    # forward reachability from node 0 plus reachability in the reversed graph
    return _reaches_all(0, d.out_neighbors) and _reaches_all(0, d.in_neighbors)


def require_strongly_connected(d: Digraph) -> Digraph:
    if not is_strongly_connected(d):
        raise GraphError("graph is not strongly connected")
    return d


# ---------------------------------------------------------------------------
# round-robin priorities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorityMap:
    """``order[j]`` lists the out-neighbours of ``j`` by increasing priority.

    ``order[j][p]`` is the neighbour ``l`` with ``P_lj == p``.
    """

    order: tuple[tuple[int, ...], ...]

    def priority(self, j: int, neighbor: int) -> int:
        return self.order[j].index(neighbor)

    def triples(self) -> list[tuple[int, int, int]]:
        """``(node, neighbor, order)`` rows, node-major."""
        return [(j, l, p) for j, row in enumerate(self.order) for p, l in enumerate(row)]


def assign_priorities(
    d: Digraph, explicit: Iterable[tuple[int, int, int]] | None = None
) -> PriorityMap:
    """Assign round-robin orders to every node's outgoing edges.

    With ``explicit=None`` the order follows ascending out-neighbour id.
    Otherwise ``explicit`` holds ``(node, neighbor, order)`` triples which
    must form a bijection onto ``0..D_j^+ - 1`` for every node.
    """
    if explicit is None:
        return PriorityMap(order=tuple(d.out_neighbors))

    slots: list[dict[int, int]] = [{} for _ in range(d.n)]
    for node, neighbor, order in explicit:
        if not 0 <= node < d.n:
            raise GraphError(f"priority for unknown node {node}")
        if neighbor not in d.out_neighbors[node]:
            raise GraphError(f"node {node} has no out-neighbour {neighbor}")
        if neighbor in slots[node].values():
            raise GraphError(f"node {node}: neighbour {neighbor} listed twice")
        if order in slots[node]:
            raise GraphError(f"node {node}: order {order} assigned twice")
        slots[node][order] = neighbor
    rows = []
    for j in range(d.n):
        want = set(range(d.out_degree(j)))
        if set(slots[j]) != want:
            raise GraphError(
                f"node {j}: orders {sorted(slots[j])} are not 0..{d.out_degree(j) - 1}"
            )
        rows.append(tuple(slots[j][p] for p in range(d.out_degree(j))))
    return PriorityMap(order=tuple(rows))


# ---------------------------------------------------------------------------
# transmission probabilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbabilityAssignment:
    """Per-node exact probabilities over ``N_j^+ ∪ {j}``.

    ``targets[j]`` and ``weights[j]`` are aligned; ``j`` itself appears
    first in ``targets[j]`` (the "keep the mass" outcome).
    """

    targets: tuple[tuple[int, ...], ...]
    weights: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        for j, (tgt, w) in enumerate(zip(self.targets, self.weights)):
            if len(tgt) != len(w) or not tgt or tgt[0] != j:
                raise GraphError(f"node {j}: malformed probability row")
            # a sink node (only possible in a non-strongly-connected graph) keeps 1
            if len(w) > 1 and any(not (0 < p < 1) for p in w):
                raise GraphError(f"node {j}: probabilities must lie in (0, 1)")
            if sum(w, Fraction(0)) != 1:
                raise GraphError(f"node {j}: probabilities sum to {sum(w)}")

    def b(self, l: int, j: int) -> Fraction:
        try:
            return self.weights[j][self.targets[j].index(l)]
        except ValueError:
            return Fraction(0)

    def sampler(self, j: int) -> tuple[int, tuple[int, ...]]:
        """Integer form of row ``j``: ``(L, cumulative)``.

        A uniform integer ``r`` in ``[0, L)`` selects
        ``targets[j][t]`` for the first ``t`` with ``r < cumulative[t]``.
        """
        L = int(np.lcm.reduce([p.denominator for p in self.weights[j]]))
        acc = 0
        cum = []
        for p in self.weights[j]:
            acc += p.numerator * (L // p.denominator)
            cum.append(acc)
        return L, tuple(cum)


def uniform_probabilities(d: Digraph) -> ProbabilityAssignment:
    """``b_lj = 1 / (1 + D_j^+)`` on ``N_j^+ ∪ {j}``."""
    targets = tuple((j, *d.out_neighbors[j]) for j in range(d.n))
    weights = tuple(
        tuple(Fraction(1, 1 + d.out_degree(j)) for _ in targets[j]) for j in range(d.n)
    )
    return ProbabilityAssignment(targets=targets, weights=weights)


def probabilities_from_mapping(
    d: Digraph, table: Mapping[int, Mapping[int, Fraction]]
) -> ProbabilityAssignment:
    """Build an assignment from ``{node: {target: probability}}``."""
    targets, weights = [], []
    for j in range(d.n):
        row = dict(table.get(j, {}))
        allowed = {j, *d.out_neighbors[j]}
        if set(row) != allowed:
            raise GraphError(f"node {j}: probabilities must cover exactly {sorted(allowed)}")
        order = (j, *d.out_neighbors[j])
        targets.append(order)
        weights.append(tuple(Fraction(row[l]) for l in order))
    return ProbabilityAssignment(targets=tuple(targets), weights=tuple(weights))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def gen_ring_directed(n: int) -> Digraph:
    """Directed cycle ``0 -> 1 -> ... -> n-1 -> 0``."""
    if n < 2:
        raise GraphError(f"need at least 2 nodes, got {n}")
    return build_digraph(n, [((i + 1) % n, i) for i in range(n)])


def gen_ring_undirected(n: int) -> Digraph:
    """Cycle with both directions on every edge (``n == 2`` gives one pair)."""
    if n < 2:
        raise GraphError(f"need at least 2 nodes, got {n}")
    edges = {((i + 1) % n, i) for i in range(n)} | {(i, (i + 1) % n) for i in range(n)}
    return build_digraph(n, sorted(edges))


def gen_random_strongly_connected(n: int, extra_edge_prob: float, seed: int) -> Digraph:
    """Random Hamiltonian cycle plus independent Bernoulli extra edges.

    The cycle visits the nodes in a seeded random order, so the result is
    strongly connected by construction.  Every other ordered pair becomes
    an edge with probability ``extra_edge_prob``.
    """
    if n < 2:
        raise GraphError(f"need at least 2 nodes, got {n}")
    if not 0.0 <= extra_edge_prob <= 1.0:
        raise GraphError(f"extra_edge_prob must be in [0, 1], got {extra_edge_prob}")
    rng = np.random.default_rng(seed)
    perm = [int(v) for v in rng.permutation(n)]
    edges = {(perm[(t + 1) % n], perm[t]) for t in range(n)}
    draws = rng.random(n * n)
    for j in range(n):
        for i in range(n):
            if i != j and (j, i) not in edges and draws[j * n + i] < extra_edge_prob:
                edges.add((j, i))
    return build_digraph(n, sorted(edges))
