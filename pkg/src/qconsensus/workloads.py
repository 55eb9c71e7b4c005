"""Graph and initial-value sources shared by the CLI, sweeps and tests."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .graph import Digraph, gen_random_strongly_connected, gen_ring_directed, gen_ring_undirected


class SpecError(ValueError):
    pass


def parse_graph_spec(spec: str) -> tuple[Callable[[int], Digraph], bool]:
    """Parse ``ring-directed:N``, ``ring-undirected:N`` or ``random:N:P[:SEED]``.

    Returns ``(make, fixed)``: ``make(instance_seed)`` builds the graph and
    ``fixed`` tells whether the result ignores the instance seed.
    """
    parts = spec.split(":")
    kind, args = parts[0], parts[1:]
    try:
        if kind in ("ring-directed", "ring-undirected") and len(args) == 1:
            n = int(args[0])
            gen = gen_ring_directed if kind == "ring-directed" else gen_ring_undirected
            g = gen(n)
            return (lambda _seed: g), True
        if kind == "random" and len(args) in (2, 3):
            n, p = int(args[0]), float(args[1])
            if len(args) == 3:
                g = gen_random_strongly_connected(n, p, int(args[2]))
                return (lambda _seed: g), True
            return (lambda seed: gen_random_strongly_connected(n, p, seed)), False
    except ValueError as exc:
        raise SpecError(f"bad graph spec {spec!r}: {exc}") from None
    raise SpecError(
        f"bad graph spec {spec!r}; use ring-directed:N, ring-undirected:N or random:N:P[:SEED]"
    )


def random_values(n: int, low: int, high: int, seed: int, total: Optional[int] = None) -> list[int]:
    """``n`` seeded integers from ``[low, high]``.

    With ``total`` the draw is shifted so the values sum to exactly
    ``total``; the shift is spread as evenly as possible, so values may
    leave ``[low, high]`` when ``total`` is far from the draw's sum.
    """
    if low > high:
        raise SpecError(f"empty value range {low}..{high}")
    rng = np.random.default_rng(seed)
    vals = [int(v) for v in rng.integers(low, high + 1, size=n)]
    if total is not None:
        q, r = divmod(total - sum(vals), n)
        bumped = set(int(i) for i in rng.permutation(n)[:r])
        vals = [v + q + (1 if i in bumped else 0) for i, v in enumerate(vals)]
    return vals


def parse_values_random(spec: str) -> tuple[int, int, Optional[int]]:
    """``LOW:HIGH`` or ``LOW:HIGH:TOTAL``."""
    try:
        parts = [int(p) for p in spec.split(":")]
    except ValueError:
        raise SpecError(f"bad random value spec {spec!r}") from None
    if len(parts) == 2:
        return parts[0], parts[1], None
    if len(parts) == 3:
        return parts[0], parts[1], parts[2]
    raise SpecError(f"bad random value spec {spec!r}; use LOW:HIGH[:TOTAL]")
