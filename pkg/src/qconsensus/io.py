"""Plain-text file formats.

All node ids in files are 1-based.

graph file::

    n m
    receiver sender      # m lines

priority file::

    node neighbor order  # one line per outgoing edge, order is 0-based

values file: integers separated by whitespace or commas.

Blank lines and ``#`` comments are ignored in every input format.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .analysis import PlotRow, RunRow
from .engine import Message, Trace
from .graph import Digraph, GraphError, PriorityMap, assign_priorities, build_digraph
from .protocol import Mass, NodeState, StatePair

TRACE_HEADER = ["round", "node", "y", "z", "ys", "zs", "q_float"]
MESSAGE_HEADER = ["round", "kind", "sender", "receiver", "y", "z", "deliver_round"]
SWEEP_HEADER = ["seed", "n", "m", "k0", "terminated_by", "mass_msgs", "broadcast_msgs"]
PLOT_HEADER = ["round", "mean_spread", "max_spread", "frac_converged"]


class FormatError(ValueError):
    pass


def fmt_float(x) -> str:
    return format(float(x), ".12g")


def _content_lines(text: str) -> list[tuple[int, list[str]]]:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    return rows


def _ints(fields: list[str], lineno: int, count: int) -> list[int]:
    if len(fields) != count:
        raise FormatError(f"line {lineno}: expected {count} integers, got {len(fields)}")
    try:
        return [int(f) for f in fields]
    except ValueError:
        raise FormatError(f"line {lineno}: non-integer field in {fields}") from None


def parse_graph(text: str) -> Digraph:
    rows = _content_lines(text)
    if not rows:
        raise FormatError("empty graph file")
    lineno, head = rows[0]
    n, m = _ints(head, lineno, 2)
    body = rows[1:]
    if len(body) != m:
        raise FormatError(f"header announces {m} edges, found {len(body)}")
    edges = []
    for lineno, fields in body:
        j, i = _ints(fields, lineno, 2)
        edges.append((j - 1, i - 1))
    try:
        return build_digraph(n, edges)
    except GraphError as exc:
        raise FormatError(f"invalid graph (1-based ids): {exc}") from None


def format_graph(d: Digraph) -> str:
    lines = [f"{d.n} {d.m}"]
    lines += [f"{j + 1} {i + 1}" for j, i in d.sorted_edges()]
    return "\n".join(lines) + "\n"


def parse_priorities(text: str, d: Digraph) -> PriorityMap:
    triples = []
    for lineno, fields in _content_lines(text):
        node, neighbor, order = _ints(fields, lineno, 3)
        triples.append((node - 1, neighbor - 1, order))
    try:
        return assign_priorities(d, triples)
    except GraphError as exc:
        raise FormatError(f"invalid priorities: {exc}") from None


def format_priorities(p: PriorityMap) -> str:
    return "".join(f"{j + 1} {l + 1} {o}\n" for j, l, o in p.triples())


def parse_values(text: str) -> list[int]:
    body = " ".join(line.split("#", 1)[0] for line in text.splitlines())
    tokens = body.replace(",", " ").split()
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise FormatError(f"bad value list: {exc}") from None


def read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# run outputs
# ---------------------------------------------------------------------------


def write_trace_csv(path, snapshots: Sequence[Sequence[NodeState]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for k, net in enumerate(snapshots):
            for j, s in enumerate(net):
                q = fmt_float(Fraction(s.state.y, s.state.z)) if s.state.z else "nan"
                w.writerow([k, j + 1, s.mass.y, s.mass.z, s.state.y, s.state.z, q])


def read_trace_csv(path) -> list[tuple[NodeState, ...]]:
    rounds: dict[int, dict[int, NodeState]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRACE_HEADER:
            raise FormatError(f"{path}: header {reader.fieldnames} != {TRACE_HEADER}")
        for row in reader:
            try:
                k, node, y, z, ys, zs = (int(row[c]) for c in TRACE_HEADER[:-1])
            except ValueError:
                raise FormatError(f"{path}: bad row {row}") from None
            rounds.setdefault(k, {})[node - 1] = NodeState(Mass(y, z), StatePair(ys, zs), 0)
    if sorted(rounds) != list(range(len(rounds))):
        raise FormatError(f"{path}: rounds are not contiguous from 0")
    snapshots = []
    n = len(rounds[0]) if rounds else 0
    for k in range(len(rounds)):
        if sorted(rounds[k]) != list(range(n)):
            raise FormatError(f"{path}: round {k} does not list nodes 1..{n}")
        snapshots.append(tuple(rounds[k][j] for j in range(n)))
    return snapshots


def write_messages_csv(path, messages: Iterable[Message]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MESSAGE_HEADER)
        for m in messages:
            w.writerow([m.send_round, m.kind, m.sender + 1, m.receiver + 1, m.y, m.z, m.deliver_round])


def read_messages_csv(path) -> list[Message]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MESSAGE_HEADER:
            raise FormatError(f"{path}: header {reader.fieldnames} != {MESSAGE_HEADER}")
        for row in reader:
            if row["kind"] not in ("mass", "state"):
                raise FormatError(f"{path}: unknown message kind {row['kind']!r}")
            try:
                out.append(
                    Message(
                        kind=row["kind"],
                        sender=int(row["sender"]) - 1,
                        receiver=int(row["receiver"]) - 1,
                        y=int(row["y"]),
                        z=int(row["z"]),
                        send_round=int(row["round"]),
                        deliver_round=int(row["deliver_round"]),
                    )
                )
            except ValueError:
                raise FormatError(f"{path}: bad row {row}") from None
    return out


def run_summary(trace: Trace) -> dict:
    cfg = trace.config
    term = trace.termination
    return {
        "algorithm": cfg.algorithm,
        "n": cfg.graph.n,
        "m": cfg.graph.m,
        "seed": cfg.seed,
        "k0": term.k0,
        "terminated_by": term.reason,
        "rounds": term.round,
        "total_mass_msgs": trace.count("mass"),
        "total_broadcast_msgs": trace.count("state"),
    }


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_sweep_csv(path, rows: Iterable[RunRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            k0 = "" if r.k0 is None else r.k0
            w.writerow([r.seed, r.n, r.m, k0, r.terminated_by, r.mass_msgs, r.broadcast_msgs])


def write_plot_csv(path, plot: Iterable[PlotRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_HEADER)
        for p in plot:
            w.writerow([p.round, fmt_float(p.mean_spread), fmt_float(p.max_spread), fmt_float(p.frac_converged)])
