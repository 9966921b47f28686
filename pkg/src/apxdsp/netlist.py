"""Signal-flow-graph netlists: text format, validation and graph queries.

A netlist is a directed graph of inputs, two-operand adders/subtractors,
constant multipliers, unit delays and outputs, with one global fractional
precision shared by every node. Feedback is expressed by letting a delay
forward-reference its source; all other references must point backwards.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction

NODE_KINDS = ("input", "add", "sub", "mul", "delay", "output")

_ARITY = {"input": 0, "add": 2, "sub": 2, "mul": 1, "delay": 1, "output": 1}


class NetlistError(ValueError):
    """Unparseable text or structurally invalid netlist."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class FixedFormat:
    """Global fixed-point format: signals live on the 2**-frac_bits grid."""

    frac_bits: int

    def __post_init__(self):
        if self.frac_bits < 1:
            raise NetlistError(f"frac_bits must be >= 1, got {self.frac_bits}")

    @property
    def lsb(self) -> Fraction:
        return Fraction(1, 2 ** self.frac_bits)


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    inputs: tuple[str, ...] = ()
    coeff: Fraction | None = None       # mul only
    coeff_rounded: bool = False         # true if snapped to the grid at parse time


@dataclass
class Netlist:
    fmt: FixedFormat
    nodes: dict[str, Node]              # insertion order == declaration order
    outputs: tuple[str, ...] = ()

    @property
    def frac_bits(self) -> int:
        return self.fmt.frac_bits

    def adders(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.kind in ("add", "sub")]

    def inputs(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.kind == "input"]

    def delays(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.kind == "delay"]

    def has_cycle(self) -> bool:
        """True if any feedback loop exists (all legal cycles pass a delay)."""
        try:
            order = topological_order(self)
        except NetlistError:
            return True
        pos = {nid: i for i, nid in enumerate(order)}
        for node in self.nodes.values():
            if node.kind == "delay":
                for src in node.inputs:
                    if pos[src] > pos[node.id]:
                        return True
        return False

    def __eq__(self, other):
        if not isinstance(other, Netlist):
            return NotImplemented
        return (self.fmt == other.fmt
                and list(self.nodes.items()) == list(other.nodes.items())
                and self.outputs == other.outputs)


def _coefficient(token: str, frac_bits: int) -> tuple[Fraction, bool]:
    """Parse a p/q or decimal coefficient; snap off-grid values to 2**-N."""
    try:
        c = Fraction(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise NetlistError(f"bad coefficient {token!r}") from exc
    q = c.denominator
    if q & (q - 1) == 0:
        return c, False
    scale = 2 ** frac_bits
    return Fraction(round(c * scale), scale), True


def parse_netlist(text: str) -> Netlist:
    """Parse the line-oriented netlist format into a Netlist."""
    fmt: FixedFormat | None = None
    nodes: dict[str, Node] = {}
    outputs: list[str] = []
    pending_delays: list[tuple[int, str, str]] = []  # (line, delay id, source id)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stmt = raw.split("#", 1)[0].strip()
        if not stmt:
            continue
        tok = stmt.split()
        op = tok[0]

        if op == "format":
            if fmt is not None:
                raise NetlistError("duplicate format statement", lineno)
            if nodes:
                raise NetlistError("format must be the first statement", lineno)
            if len(tok) != 2 or not tok[1].startswith("frac="):
                raise NetlistError("expected: format frac=<N>", lineno)
            try:
                fmt = FixedFormat(int(tok[1][5:]))
            except ValueError as exc:
                raise NetlistError(f"bad frac value {tok[1]!r}", lineno) from exc
            continue

        if fmt is None:
            raise NetlistError("format frac=<N> must come first", lineno)
        if op not in _ARITY:
            raise NetlistError(f"unknown statement {op!r}", lineno)
        if len(tok) < 2:
            raise NetlistError(f"{op} statement needs an id", lineno)
        nid = tok[1]
        if nid in nodes:
            raise NetlistError(f"duplicate id {nid!r}", lineno)

        if op == "input":
            if len(tok) != 2:
                raise NetlistError("expected: input <id>", lineno)
            nodes[nid] = Node(nid, "input")
        elif op in ("add", "sub"):
            if len(tok) != 4:
                raise NetlistError(f"expected: {op} <id> <src> <src>", lineno)
            srcs = (tok[2], tok[3])
            for s in srcs:
                if s == nid:
                    raise NetlistError(f"combinational cycle: {nid!r} feeds itself", lineno)
                if s not in nodes:
                    raise NetlistError(f"undeclared source {s!r}", lineno)
            nodes[nid] = Node(nid, op, srcs)
        elif op == "mul":
            if len(tok) != 4:
                raise NetlistError("expected: mul <id> <src> <coeff>", lineno)
            if tok[2] == nid:
                raise NetlistError(f"combinational cycle: {nid!r} feeds itself", lineno)
            if tok[2] not in nodes:
                raise NetlistError(f"undeclared source {tok[2]!r}", lineno)
            coeff, rounded = _coefficient(tok[3], fmt.frac_bits)
            nodes[nid] = Node(nid, "mul", (tok[2],), coeff, rounded)
        elif op == "delay":
            if len(tok) != 3:
                raise NetlistError("expected: delay <id> <src>", lineno)
            # a delay may forward-reference its source (feedback loops)
            nodes[nid] = Node(nid, "delay", (tok[2],))
            pending_delays.append((lineno, nid, tok[2]))
        elif op == "output":
            if len(tok) != 3:
                raise NetlistError("expected: output <id> <src>", lineno)
            if tok[2] not in nodes:
                raise NetlistError(f"undeclared source {tok[2]!r}", lineno)
            nodes[nid] = Node(nid, "output", (tok[2],))
            outputs.append(nid)

    if fmt is None:
        raise NetlistError("missing format statement")
    for lineno, nid, src in pending_delays:
        if src not in nodes:
            raise NetlistError(f"undeclared source {src!r}", lineno)
    return Netlist(fmt, nodes, tuple(outputs))


def render(netlist: Netlist) -> str:
    """Canonical text for a netlist; parse_netlist(render(nl)) == nl."""
    lines = [f"format frac={netlist.frac_bits}"]
    for node in netlist.nodes.values():
        if node.kind == "input":
            lines.append(f"input {node.id}")
        elif node.kind in ("add", "sub", "delay", "output"):
            lines.append(f"{node.kind} {node.id} {' '.join(node.inputs)}")
        elif node.kind == "mul":
            c = node.coeff
            lines.append(f"mul {node.id} {node.inputs[0]} {c.numerator}/{c.denominator}")
    return "\n".join(lines) + "\n"


def validate(netlist: Netlist) -> list[str]:
    """Structural diagnostics; empty list iff all netlist invariants hold."""
    diags = []
    nodes = netlist.nodes
    for node in nodes.values():
        if node.kind not in NODE_KINDS:
            diags.append(f"{node.id}: unknown kind {node.kind!r}")
            continue
        if len(node.inputs) != _ARITY[node.kind]:
            diags.append(f"{node.id}: {node.kind} needs {_ARITY[node.kind]} "
                         f"source(s), has {len(node.inputs)}")
        for src in node.inputs:
            if src not in nodes:
                diags.append(f"{node.id}: undeclared source {src!r}")
        if node.kind == "mul":
            if node.coeff is None:
                diags.append(f"{node.id}: mul without coefficient")
            else:
                q = node.coeff.denominator
                if q & (q - 1) != 0 and not node.coeff_rounded:
                    diags.append(f"{node.id}: coefficient {node.coeff} is off the "
                                 f"2^-{netlist.frac_bits} grid and not flagged rounded")
    if not netlist.outputs:
        diags.append("no output")
    if not netlist.inputs():
        diags.append("no input")
    for out in netlist.outputs:
        if out not in nodes:
            diags.append(f"output {out!r} undeclared")
        elif nodes[out].kind != "output":
            diags.append(f"{out!r} listed as output but has kind {nodes[out].kind}")
    try:
        topological_order(netlist)
    except NetlistError as exc:
        diags.append(str(exc))
    # every output must be fed from at least one input
    for out in netlist.outputs:
        if out not in nodes:
            continue
        seen, stack = set(), [out]
        while stack:
            cur = stack.pop()
            if cur in seen or cur not in nodes:
                continue
            seen.add(cur)
            stack.extend(nodes[cur].inputs)
        if not any(nodes[s].kind == "input" for s in seen if s in nodes):
            diags.append(f"output {out!r} unreachable from any input")
    return diags


def topological_order(netlist: Netlist) -> list[str]:
    """Deterministic evaluation order (ties broken by id).

    Delay nodes act as registers: their consumers read last-step state, so
    edges from a delay to its readers are not ordering constraints. A delay
    is ordered after its own source (the value it captures).
    """
    nodes = netlist.nodes
    if not nodes:
        raise NetlistError("empty netlist")
    succ: dict[str, list[str]] = {nid: [] for nid in nodes}
    indeg = {nid: 0 for nid in nodes}
    for node in nodes.values():
        for src in node.inputs:
            if src not in nodes:
                raise NetlistError(f"{node.id}: undeclared source {src!r}")
            if nodes[src].kind == "delay":
                continue  # register output: available at step start
            succ[src].append(node.id)
            indeg[node.id] += 1
    ready = [nid for nid, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for nxt in succ[nid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != len(nodes):
        stuck = sorted(set(nodes) - set(order))
        raise NetlistError(f"cycle without delay through {stuck}")
    return order


def fanin_cone(netlist: Netlist, output_id: str) -> set[str]:
    """Ids of every add/sub from which a directed path reaches output_id."""
    if output_id not in netlist.nodes or netlist.nodes[output_id].kind != "output":
        raise NetlistError(f"unknown output id {output_id!r}")
    seen: set[str] = set()
    stack = [output_id]
    while stack:
        cur = stack.pop()
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(netlist.nodes[cur].inputs)
    return {nid for nid in seen if netlist.nodes[nid].kind in ("add", "sub")}


# ---------------------------------------------------------------------------
# assignments: adder id -> number of approximate fractional bits

def parse_assignment(text: str) -> dict[str, int]:
    asg: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stmt = raw.split("#", 1)[0].strip()
        if not stmt:
            continue
        tok = stmt.split()
        if len(tok) != 2:
            raise NetlistError("expected: <adder-id> <k>", lineno)
        if tok[0] in asg:
            raise NetlistError(f"duplicate adder id {tok[0]!r}", lineno)
        try:
            asg[tok[0]] = int(tok[1])
        except ValueError as exc:
            raise NetlistError(f"bad k value {tok[1]!r}", lineno) from exc
    return asg


def render_assignment(assignment: dict[str, int]) -> str:
    return "".join(f"{nid} {k}\n" for nid, k in assignment.items())


def check_assignment(netlist: Netlist, assignment: dict[str, int]) -> None:
    """Raise unless the assignment covers exactly the adders with 0 <= k <= N."""
    adders = set(netlist.adders())
    given = set(assignment)
    if missing := adders - given:
        raise NetlistError(f"assignment missing adders {sorted(missing)}")
    if extra := given - adders:
        raise NetlistError(f"assignment names non-adders {sorted(extra)}")
    for nid, k in assignment.items():
        if not 0 <= k <= netlist.frac_bits:
            raise NetlistError(f"{nid}: k={k} outside 0..{netlist.frac_bits}")


def uniform_assignment(netlist: Netlist, k: int) -> dict[str, int]:
    return {nid: k for nid in netlist.adders()}
