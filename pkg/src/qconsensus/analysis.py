"""Invariant checkers, convergence metrics and seed sweeps.

The checkers work on plain snapshot lists and message logs, so they apply
equally to an in-memory :class:`~qconsensus.engine.Trace` and to a trace
read back from CSV.
"""

from __future__ import annotations

import statistics
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .protocol import Average, NodeState, lex_key, state_equals_average

Network = Sequence[NodeState]

INVARIANTS = (
    "nonnegativity",
    "mass_conservation",
    "replay",
    "active_nodes_nonincreasing",
    "state_monotone",
    "leading_mass_transmits",
    "leading_mass_retained",
    "state_dominance",
    "quiescence",
)


def theoretical_bound_alg3(n: int, m: int) -> int:
    """Merge-plus-propagation budget ``(n-1)n + (n-1)m^2 + n``."""
    if n < 2 or m < n:
        raise ValueError(f"need n >= 2 and m >= n, got n={n}, m={m}")
    return (n - 1) * n + (n - 1) * m * m + n


def leading_mass_nodes(net: Network) -> set[int]:
    best = None
    nodes: set[int] = set()
    for j, s in enumerate(net):
        if s.mass.z <= 0:
            continue
        key = lex_key(s.mass)
        if best is None or key > best:
            best, nodes = key, {j}
        elif key == best:
            nodes.add(j)
    return nodes


def active_nodes(net: Network) -> int:
    """``|V+|``: nodes currently holding a non-zero mass."""
    return sum(1 for s in net if s.mass.z > 0)


def check_mass_conservation(net: Network, inflight: Iterable, avg: Average) -> bool:
    """Masses at nodes plus mass messages in flight add up to ``(S, n)``."""
    y = sum(s.mass.y for s in net)
    z = sum(s.mass.z for s in net)
    for msg in inflight:
        if msg.kind == "mass":
            y += msg.y
            z += msg.z
    return y == avg.total and z == avg.n


def convergence_round(trace_or_snapshots, avg: Average) -> Optional[int]:
    """Smallest ``k`` such that every snapshot from ``k`` on is converged."""
    snapshots = getattr(trace_or_snapshots, "snapshots", trace_or_snapshots)
    k0 = None
    for k in range(len(snapshots) - 1, -1, -1):
        if all(state_equals_average(s.state, avg) for s in snapshots[k]):
            k0 = k
        else:
            break
    return k0


def spread(net: Network) -> Fraction:
    """``max qs - min qs`` computed exactly."""
    ratios = [Fraction(s.state.y, s.state.z) for s in net]
    return max(ratios) - min(ratios)


def equal_mass_holders(net: Network) -> Optional[set[int]]:
    """Holder set when all non-zero masses are identical, else ``None``."""
    holders = [j for j, s in enumerate(net) if s.mass.z > 0]
    if holders and all(net[j].mass == net[holders[0]].mass for j in holders):
        return set(holders)
    return None


@dataclass
class RoundMetrics:
    round: int
    active: int
    leading: set[int]
    mass_msgs: int
    broadcast_msgs: int
    converged: bool
    equal_holders: Optional[set[int]] = None


def round_metrics(snapshots: Sequence[Network], messages: Iterable, avg: Average) -> list[RoundMetrics]:
    """One entry per snapshot; message counts are for messages sent in that round."""
    mass_count: dict[int, int] = defaultdict(int)
    bcast_count: dict[int, int] = defaultdict(int)
    for msg in messages:
        (mass_count if msg.kind == "mass" else bcast_count)[msg.send_round] += 1
    return [
        RoundMetrics(
            round=k,
            active=active_nodes(net),
            leading=leading_mass_nodes(net),
            mass_msgs=mass_count[k],
            broadcast_msgs=bcast_count[k],
            converged=all(state_equals_average(s.state, avg) for s in net),
            equal_holders=equal_mass_holders(net),
        )
        for k, net in enumerate(snapshots)
    ]


# ---------------------------------------------------------------------------
# invariant suite
# ---------------------------------------------------------------------------


def check_invariants(
    snapshots: Sequence[Network],
    messages: Iterable,
    algorithm: str,
    avg: Average,
) -> dict[str, list[str]]:
    """Run every invariant that applies to ``algorithm``.

    Returns ``{name: [violation, ...]}``; an empty list means the invariant
    held on every round.  Invariants that do not apply to the algorithm are
    omitted from the result.
    """
    by_round: dict[int, list] = defaultdict(list)
    for msg in messages:
        by_round[msg.send_round].append(msg)

    out: dict[str, list[str]] = {name: [] for name in INVARIANTS}
    last = len(snapshots) - 1
    prev_active = None
    for k, net in enumerate(snapshots):
        for j, s in enumerate(net):
            if s.mass.z < 0 or s.state.z < 1 or (s.mass.z == 0 and s.mass.y != 0):
                out["nonnegativity"].append(f"round {k} node {j}: mass={tuple(s.mass)} state={tuple(s.state)}")
        if not check_mass_conservation(net, (), avg):
            ty = sum(s.mass.y for s in net)
            tz = sum(s.mass.z for s in net)
            out["mass_conservation"].append(f"round {k}: sum y={ty} sum z={tz}, want {avg.total}, {avg.n}")

        active = active_nodes(net)
        if active < 1 or (prev_active is not None and active > prev_active):
            out["active_nodes_nonincreasing"].append(f"round {k}: |V+|={active} after {prev_active}")
        prev_active = active

        leading = leading_mass_nodes(net)
        if algorithm == "alg3" and leading:
            lead = lex_key(net[min(leading)].mass)
            for i, s in enumerate(net):
                if lex_key(s.state) > lead:
                    out["state_dominance"].append(f"round {k} node {i}: state {tuple(s.state)} above leading mass")

        if k == last:
            continue
        nxt = snapshots[k + 1]
        mass_msgs = [m for m in by_round.get(k, ()) if m.kind == "mass"]
        senders = {m.sender for m in mass_msgs}

        # replay: next masses are current masses minus what left plus what arrived
        ys = [s.mass.y for s in net]
        zs = [s.mass.z for s in net]
        for m in mass_msgs:
            if (m.y, m.z) != tuple(net[m.sender].mass):
                out["replay"].append(f"round {k}: node {m.sender} sent {(m.y, m.z)}, held {tuple(net[m.sender].mass)}")
            ys[m.sender] -= m.y
            zs[m.sender] -= m.z
        for m in mass_msgs:
            ys[m.receiver] += m.y
            zs[m.receiver] += m.z
        for j, s in enumerate(nxt):
            if (s.mass.y, s.mass.z) != (ys[j], zs[j]):
                out["replay"].append(f"round {k + 1} node {j}: mass {tuple(s.mass)} != replayed {(ys[j], zs[j])}")

        for j, (a, b) in enumerate(zip(net, nxt)):
            if algorithm == "alg1":
                bad = b.state.z < a.state.z
            else:
                bad = lex_key(b.state) < lex_key(a.state)
            if bad:
                out["state_monotone"].append(f"round {k + 1} node {j}: {tuple(a.state)} -> {tuple(b.state)}")

        if algorithm == "alg2":
            for j in sorted(leading - senders):
                out["leading_mass_transmits"].append(f"round {k}: leading node {j} did not transmit")
        if algorithm == "alg3":
            for j in sorted(leading & senders):
                out["leading_mass_retained"].append(f"round {k}: leading node {j} transmitted its mass")

    if algorithm == "alg3":
        # a round is quiet when it sends nothing and nothing sent earlier is still travelling
        travelling = defaultdict(int)
        for msgs in by_round.values():
            for m in msgs:
                for r in range(m.send_round + 1, m.deliver_round):
                    travelling[r] += 1
        quiet_from = None
        for k in range(last):
            if quiet_from is None:
                if (
                    not by_round.get(k)
                    and not travelling[k]
                    and all(state_equals_average(s.state, avg) for s in snapshots[k])
                ):
                    quiet_from = k
            elif by_round.get(k):
                out["quiescence"].append(f"round {k}: {len(by_round[k])} messages after quiet round {quiet_from}")

    keep = {
        "alg1": {"leading_mass_transmits", "leading_mass_retained", "state_dominance", "quiescence"},
        "alg2": {"leading_mass_retained", "state_dominance", "quiescence"},
        "alg3": {"leading_mass_transmits"},
    }[algorithm]
    return {name: v for name, v in out.items() if name not in keep}


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class RunRow:
    seed: int
    n: int
    m: int
    k0: Optional[int]
    terminated_by: str
    mass_msgs: int
    broadcast_msgs: int
    error: Optional[str] = None


@dataclass
class Distribution:
    min: float
    median: float
    mean: float
    max: float

    @classmethod
    def of(cls, values: Sequence[int]) -> Optional["Distribution"]:
        if not values:
            return None
        return cls(min(values), statistics.median(values), statistics.fmean(values), max(values))


@dataclass
class SweepSummary:
    runs: int
    fraction_converged: float
    k0: Optional[Distribution]
    total_msgs: Optional[Distribution]
    errors: int = 0


@dataclass
class PlotRow:
    round: int
    mean_spread: Fraction
    max_spread: Fraction
    frac_converged: Fraction


@dataclass
class SweepResult:
    rows: list[RunRow]
    summary: SweepSummary
    plot: list[PlotRow] = field(default_factory=list)


def _series(snapshots: Sequence[Network], avg: Average) -> tuple[list[Fraction], list[bool]]:
    spreads, conv = [], []
    prev_states = None
    for net in snapshots:
        states = tuple(s.state for s in net)
        if states != prev_states:
            current = spread(net)
            ok = all(state_equals_average(s, avg) for s in states)
            prev_states = states
        spreads.append(current)
        conv.append(ok)
    return spreads, conv


def _sweep_one(item):
    seed, cfg = item
    from .engine import run

    try:
        trace = run(cfg)
    except Exception as exc:  # reported per seed, never aborts the sweep
        return RunRow(seed, cfg.graph.n, cfg.graph.m, None, "error", 0, 0, repr(exc)), [], []
    term = trace.termination
    row = RunRow(
        seed=seed,
        n=cfg.graph.n,
        m=cfg.graph.m,
        k0=term.k0,
        terminated_by=term.reason,
        mass_msgs=trace.count("mass"),
        broadcast_msgs=trace.count("state"),
    )
    spreads, conv = _series(trace.snapshots, trace.average)
    return row, spreads, conv


def sweep(configs: Iterable[tuple[int, "object"]], workers: int = 1) -> SweepResult:
    """Run ``(seed, RunConfig)`` pairs and aggregate them in seed order.

    Plot rows extend each run's last snapshot forward to the longest run,
    so a finished run keeps contributing its final spread.
    """
    items = list(configs)
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, items))
    else:
        results = [_sweep_one(item) for item in items]

    rows = [r for r, _, _ in results]
    ok = [r for r in rows if r.error is None]
    converged = [r for r in ok if r.terminated_by in ("convergence", "quiescence") and r.k0 is not None]
    summary = SweepSummary(
        runs=len(rows),
        fraction_converged=len(converged) / len(rows) if rows else 0.0,
        k0=Distribution.of([r.k0 for r in converged]),
        total_msgs=Distribution.of([r.mass_msgs + r.broadcast_msgs for r in ok]),
        errors=len(rows) - len(ok),
    )

    series = [(s, c) for _, s, c in results if s]
    plot = []
    if series:
        length = max(len(s) for s, _ in series)
        for k in range(length):
            sp = [s[min(k, len(s) - 1)] for s, _ in series]
            cv = [c[min(k, len(c) - 1)] for _, c in series]
            plot.append(
                PlotRow(
                    round=k,
                    mean_spread=sum(sp, Fraction(0)) / len(sp),
                    max_spread=max(sp),
                    frac_converged=Fraction(sum(cv), len(cv)),
                )
            )
    return SweepResult(rows=rows, summary=summary, plot=plot)
