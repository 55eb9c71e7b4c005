"""Synchronous round scheduler for the three consensus protocols.

Round numbering
---------------
Snapshot ``k`` is the table of node variables at time step ``k``: every mass
sits at a node (nothing is in flight) and the round's trigger has already
been applied to the state.  ``step_*(..., k)`` turns snapshot ``k`` into
snapshot ``k + 1`` and returns the messages it sent, all tagged
``send_round = k``.

* alg1 -- each holder picks a destination at random, masses are delivered
  and merged, then ``z >= zs`` copies the mass into the state.
* alg2 -- nodes whose trigger held at snapshot ``k`` pass their whole mass
  to the next out-neighbour in round-robin order; receivers merge and
  re-evaluate the trigger.  At ``k = 0`` every node fires, which is the
  initial hand-off of the protocol.
* alg3 -- state broadcasts from earlier rounds are read, the node adopts a
  dominating neighbour state (and re-broadcasts it at once), hands on a
  mass that is smaller than its state, merges arriving masses, adopts a
  mass that beats its state, and finally announces its state if it moved
  mass or adopted one.  The final announcement reaches the neighbours two
  rounds later (``deliver_round = k + 2``); immediate re-broadcasts arrive
  at ``k + 1``.  Only this timing reproduces the worked example tables.

Every phase reads a snapshot taken at its start, so node iteration order
never matters.  The only source of randomness is the numpy ``PCG64``
stream seeded from :attr:`RunConfig.seed`; alg1 draws one integer per
mass holder per round, in ascending node order.
"""

from __future__ import annotations

import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .graph import (
    Digraph,
    PriorityMap,
    ProbabilityAssignment,
    assign_priorities,
    is_strongly_connected,
    uniform_probabilities,
)
from .protocol import (
    ZERO,
    Average,
    Mass,
    NodeState,
    StatePair,
    alg3_cond1_update,
    alg3_cond2,
    alg3_cond3,
    exact_average,
    merge_masses,
    state_equals_average,
    trigger_alg1,
    trigger_alg2,
)

logger = logging.getLogger(__name__)

ALGORITHMS = ("alg1", "alg2", "alg3")
TERMINATIONS = ("convergence", "quiescence", "round-cap", "all")

MASS = "mass"
STATE = "state"

Network = tuple[NodeState, ...]


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True, slots=True)
class Message:
    kind: str  # MASS (unicast) or STATE (one row per broadcast receiver)
    sender: int
    receiver: int
    y: int
    z: int
    send_round: int
    deliver_round: int


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    Missing priorities default to ascending neighbour id; missing
    probabilities default to the uniform ``1 / (1 + D_j^+)`` choice.
    ``max_rounds=None`` means ten times the explicit alg3 budget.
    """

    algorithm: str
    graph: Digraph
    initial_values: Sequence[int]
    priorities: Optional[PriorityMap] = None
    probabilities: Optional[ProbabilityAssignment] = None
    seed: int = 0
    max_rounds: Optional[int] = None
    termination: str = "convergence"

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.termination not in TERMINATIONS:
            raise ConfigError(f"unknown termination policy {self.termination!r}")
        if self.algorithm == "alg1" and self.termination == "quiescence":
            # a silent alg1 round is a coin flip (every holder kept its mass)
            raise ConfigError("alg1 never goes quiet; use convergence, round-cap or all")
        self.initial_values = tuple(int(v) for v in self.initial_values)
        if len(self.initial_values) != self.graph.n:
            raise ConfigError(
                f"got {len(self.initial_values)} initial values for {self.graph.n} nodes"
            )
        if not is_strongly_connected(self.graph):
            raise ConfigError("graph is not strongly connected")
        if self.priorities is None:
            self.priorities = assign_priorities(self.graph)
        elif [sorted(r) for r in self.priorities.order] != [
            list(r) for r in self.graph.out_neighbors
        ]:
            raise ConfigError("priority map does not match the graph")
        if self.probabilities is None:
            self.probabilities = uniform_probabilities(self.graph)
        if self.max_rounds is None:
            from .analysis import theoretical_bound_alg3

            self.max_rounds = 10 * theoretical_bound_alg3(self.graph.n, self.graph.m)
        if self.max_rounds < 0:
            raise ConfigError("max_rounds must be non-negative")

    @property
    def average(self) -> Average:
        return exact_average(self.initial_values)


class StepResult(NamedTuple):
    net: Network
    inflight: tuple[Message, ...]
    sent: tuple[Message, ...]


@dataclass
class Termination:
    reason: str  # "convergence" | "quiescence" | "max_rounds"
    round: int
    k0: Optional[int]


@dataclass
class Trace:
    config: RunConfig
    snapshots: list[Network] = field(default_factory=list)
    messages: list[Message] = field(default_factory=list)
    termination: Optional[Termination] = None

    @property
    def average(self) -> Average:
        return self.config.average

    @property
    def final(self) -> Network:
        return self.snapshots[-1]

    def sent_in_round(self, k: int) -> list[Message]:
        return [msg for msg in self.messages if msg.send_round == k]

    def count(self, kind: str) -> int:
        return sum(1 for msg in self.messages if msg.kind == kind)


# ---------------------------------------------------------------------------
# initialisation
# ---------------------------------------------------------------------------


def initial_network(values: Iterable[int]) -> Network:
    return tuple(NodeState(Mass(int(v), 1), StatePair(int(v), 1), 0) for v in values)


def init_run(cfg: RunConfig) -> StepResult:
    """Snapshot 0 plus whatever the initialisation puts on the wire.

    Only alg3 sends during initialisation: every node broadcasts its state
    (``send_round = -1``), read in round 0.  The alg2 initial hand-off is
    round 0 itself.
    """
    net = initial_network(cfg.initial_values)
    if cfg.algorithm != "alg3":
        return StepResult(net, (), ())
    sent = tuple(
        Message(STATE, j, l, s.state.y, s.state.z, -1, 0)
        for j, s in enumerate(net)
        for l in cfg.graph.out_neighbors[j]
    )
    return StepResult(net, sent, sent)


# ---------------------------------------------------------------------------
# alg1: randomized mass summation
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _sampling_tables(probs: ProbabilityAssignment) -> tuple[tuple[int, ...], tuple[tuple[int, ...], ...]]:
    tables = [probs.sampler(j) for j in range(len(probs.targets))]
    return tuple(L for L, _ in tables), tuple(cum for _, cum in tables)


def step_alg1(
    net: Network,
    graph: Digraph,
    probs: ProbabilityAssignment,
    rng: np.random.Generator,
    k: int,
) -> StepResult:
    n = graph.n
    limits, cumulative = _sampling_tables(probs)
    holders = [j for j in range(n) if net[j].mass.z > 0]
    draws = rng.integers(0, [limits[j] for j in holders]) if holders else ()

    kept = [s.mass for s in net]
    incoming: list[list[Mass]] = [[] for _ in range(n)]
    sent = []
    for j, r in zip(holders, draws):
        dest = probs.targets[j][bisect_right(cumulative[j], int(r))]
        if dest == j:
            continue
        mass = kept[j]
        sent.append(Message(MASS, j, dest, mass.y, mass.z, k, k + 1))
        incoming[dest].append(mass)
        kept[j] = ZERO

    out = []
    for j, s in enumerate(net):
        mass = merge_masses(kept[j], incoming[j]) if incoming[j] else kept[j]
        state = StatePair(*mass) if trigger_alg1(mass, s.state) else s.state
        out.append(NodeState(mass, state, s.rr))
    return StepResult(tuple(out), (), tuple(sent))


# ---------------------------------------------------------------------------
# alg2: event-triggered mass summation
# ---------------------------------------------------------------------------


def step_alg2(net: Network, graph: Digraph, priorities: PriorityMap, k: int) -> StepResult:
    n = graph.n
    kept = [s.mass for s in net]
    pointers = [s.rr for s in net]
    incoming: list[list[Mass]] = [[] for _ in range(n)]
    sent = []
    for j, s in enumerate(net):
        if not trigger_alg2(s.mass, s.state):
            continue
        row = priorities.order[j]
        dest = row[s.rr]
        sent.append(Message(MASS, j, dest, s.mass.y, s.mass.z, k, k + 1))
        incoming[dest].append(s.mass)
        kept[j] = ZERO
        pointers[j] = (s.rr + 1) % len(row)

    out = []
    for j, s in enumerate(net):
        mass = merge_masses(kept[j], incoming[j]) if incoming[j] else kept[j]
        state = StatePair(*mass) if trigger_alg2(mass, s.state) else s.state
        out.append(NodeState(mass, state, pointers[j]))
    return StepResult(tuple(out), (), tuple(sent))


# ---------------------------------------------------------------------------
# alg3: event-triggered minimum mass summation with stopping
# ---------------------------------------------------------------------------


def step_alg3(
    net: Network,
    inflight: Sequence[Message],
    graph: Digraph,
    priorities: PriorityMap,
    k: int,
) -> StepResult:
    n = graph.n
    received: list[list[StatePair]] = [[] for _ in range(n)]
    pending = []
    for msg in inflight:
        if msg.deliver_round == k:
            received[msg.receiver].append(StatePair(msg.y, msg.z))
        else:
            pending.append(msg)

    sent: list[Message] = []

    # adopt a dominating neighbour state and pass it on right away
    states = []
    for j, s in enumerate(net):
        upd = alg3_cond1_update(s.state, received[j])
        if upd is None:
            states.append(s.state)
            continue
        states.append(upd)
        sent.extend(
            Message(STATE, j, l, upd.y, upd.z, k, k + 1) for l in graph.out_neighbors[j]
        )

    # hand on masses that are beaten by the node's own state
    announce = [False] * n
    kept = [s.mass for s in net]
    pointers = [s.rr for s in net]
    incoming: list[list[Mass]] = [[] for _ in range(n)]
    for j, s in enumerate(net):
        if not alg3_cond2(s.mass, states[j]):
            continue
        row = priorities.order[j]
        dest = row[s.rr]
        sent.append(Message(MASS, j, dest, s.mass.y, s.mass.z, k, k))
        incoming[dest].append(s.mass)
        kept[j] = ZERO
        pointers[j] = (s.rr + 1) % len(row)
        announce[j] = True

    out = []
    for j in range(n):
        mass = merge_masses(kept[j], incoming[j]) if incoming[j] else kept[j]
        state = states[j]
        if alg3_cond3(mass, state):
            state = StatePair(*mass)
            announce[j] = True
        out.append(NodeState(mass, state, pointers[j]))

    for j in range(n):
        if announce[j]:
            st = out[j].state
            sent.extend(
                Message(STATE, j, l, st.y, st.z, k, k + 2) for l in graph.out_neighbors[j]
            )

    pending.extend(msg for msg in sent if msg.kind == STATE)
    return StepResult(tuple(out), tuple(pending), tuple(sent))


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def detect_convergence(net: Network, avg: Average) -> bool:
    """Every state's ratio equals the exact average."""
    return all(state_equals_average(s.state, avg) for s in net)


def consensus_reached(net: Network) -> bool:
    """Terminal configuration: all non-zero masses and all states are one pair.

    If every non-empty mass equals ``M`` then conservation forces
    ``M = (S / a, n / a)`` for the number ``a`` of holders, and no later
    merge, hand-off or adoption can move any state off the average.  A
    bare :func:`detect_convergence` can hold transiently when a partial
    sum happens to share the average's ratio.
    """
    target = net[0].state
    for s in net:
        if s.state != target:
            return False
        if s.mass.z and (s.mass.y, s.mass.z) != tuple(target):
            return False
    return True


def _stepper(cfg: RunConfig):
    graph = cfg.graph
    if cfg.algorithm == "alg1":
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        return lambda net, inflight, k: step_alg1(net, graph, cfg.probabilities, rng, k)
    if cfg.algorithm == "alg2":
        return lambda net, inflight, k: step_alg2(net, graph, cfg.priorities, k)
    if cfg.algorithm != "alg3":
        raise ConfigError(f"unknown algorithm {cfg.algorithm!r}")
    return lambda net, inflight, k: step_alg3(net, inflight, graph, cfg.priorities, k)


def run(cfg: RunConfig) -> Trace:
    """Execute ``cfg`` until its termination policy fires.

    ``convergence`` stops at the first snapshot satisfying
    :func:`consensus_reached`; ``quiescence`` stops once ``n`` consecutive
    rounds sent nothing and nothing is in flight; ``all`` stops at whichever
    of the two comes first.  Quiescence is never tested for alg1, whose
    silent rounds are random.  ``max_rounds`` always applies.
    """
    from .analysis import convergence_round

    trace = Trace(config=cfg)
    net, inflight, sent = init_run(cfg)
    trace.snapshots.append(net)
    trace.messages.extend(sent)
    step = _stepper(cfg)
    n = cfg.graph.n
    want_conv = cfg.termination in ("convergence", "all")
    want_quiet = cfg.termination in ("quiescence", "all") and cfg.algorithm != "alg1"

    quiet = 0
    k = 0
    reason = "max_rounds"
    while True:
        if want_conv and consensus_reached(net):
            reason = "convergence"
            break
        if want_quiet and quiet >= n and not inflight:
            reason = "quiescence"
            break
        if k >= cfg.max_rounds:
            break
        net, inflight, sent = step(net, inflight, k)
        trace.snapshots.append(net)
        trace.messages.extend(sent)
        quiet = 0 if sent else quiet + 1
        k += 1

    trace.termination = Termination(reason, k, convergence_round(trace.snapshots, cfg.average))
    logger.debug("%s n=%d terminated by %s at k=%d", cfg.algorithm, n, reason, k)
    return trace
