"""Causal-graph derivation, polarity inference, and feedback-loop analysis."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import expr
from .expr import Binary, Call, ExpressionAst, Identifier, NumberLiteral, Unary
from .model import STOCK, Diagnostic, SystemModel

__all__ = [
    "POSITIVE",
    "NEGATIVE",
    "UNKNOWN",
    "REINFORCING",
    "BALANCING",
    "UNDETERMINED",
    "CausalLink",
    "CausalGraph",
    "FeedbackLoop",
    "LoopList",
    "LoopBudgetExceeded",
    "DependencyAbsent",
    "derive_causal_graph",
    "infer_polarity",
    "classify_loop",
    "enumerate_loops",
]

POSITIVE = "positive"
NEGATIVE = "negative"
UNKNOWN = "unknown"

REINFORCING = "reinforcing"
BALANCING = "balancing"
UNDETERMINED = "undetermined"

DEFAULT_LOOP_CAP = 10_000


class LoopBudgetExceeded(RuntimeError):
    def __init__(self, cap: int):
        super().__init__(f"elementary cycle count exceeds the cap of {cap}")
        self.cap = cap


class DependencyAbsent(ValueError):
    pass


@dataclass(frozen=True)
class CausalLink:
    source: str
    target: str
    polarity: str  # positive | negative | unknown
    provenance: str = "declared"  # equation | inflow | outflow | declared | edit


@dataclass(frozen=True)
class CausalGraph:
    """Directed graph of canonical variable names with polarized links.

    Nodes are kept in lexicographic order and links sorted by (source,
    target); at most one link exists per ordered pair.
    """

    nodes: tuple[str, ...]
    links: tuple[CausalLink, ...]

    @staticmethod
    def build(nodes: Iterable[str], links: Iterable[CausalLink]) -> "CausalGraph":
        node_tuple = tuple(sorted(set(nodes)))
        node_set = set(node_tuple)
        seen: set[tuple[str, str]] = set()
        ordered = []
        for link in sorted(links, key=lambda l: (l.source, l.target)):
            if link.source not in node_set or link.target not in node_set:
                raise ValueError(f"link endpoint not in nodes: {link.source}->{link.target}")
            pair = (link.source, link.target)
            if pair in seen:
                raise ValueError(f"duplicate link {pair}")
            seen.add(pair)
            ordered.append(link)
        return CausalGraph(nodes=node_tuple, links=tuple(ordered))

    def link(self, source: str, target: str) -> Optional[CausalLink]:
        for l in self.links:
            if l.source == source and l.target == target:
                return l
        return None

    def successors(self, node: str) -> list[CausalLink]:
        return [l for l in self.links if l.source == node]

    def same_structure(self, other: "CausalGraph") -> bool:
        """Equality over nodes and (source, target, polarity), ignoring provenance."""
        return self.nodes == other.nodes and [
            (l.source, l.target, l.polarity) for l in self.links
        ] == [(l.source, l.target, l.polarity) for l in other.links]


def _static_sign(node: ExpressionAst) -> Optional[int]:
    """Assumed sign of a subexpression: identifiers are treated as
    nonnegative quantities, literals carry their own sign, products and
    quotients multiply; anything else is indeterminate."""
    if isinstance(node, NumberLiteral):
        if node.value > 0:
            return 1
        if node.value < 0:
            return -1
        return None
    if isinstance(node, Identifier):
        return 1
    if isinstance(node, Unary):
        if node.op == "negate":
            s = _static_sign(node.child)
            return None if s is None else -s
        return None
    if isinstance(node, Binary):
        if node.op in ("*", "/"):
            a = _static_sign(node.left)
            b = _static_sign(node.right)
            if a is None or b is None:
                return None
            return a * b
        if node.op == "+":
            a = _static_sign(node.left)
            b = _static_sign(node.right)
            return a if a == b else None
        return None
    return None


def infer_polarity(ast: ExpressionAst, dep: str) -> str:
    """Sign-context polarity of `dep` within `ast`.

    The sign flips under negation, in a subtrahend, and in a denominator;
    a multiplying factor contributes its assumed static sign. Occurrences
    inside comparisons, boolean logic, exponents, ABS, or IF_THEN_ELSE
    conditions are indeterminate. All occurrences must agree, else unknown.
    """
    signs: list[Optional[int]] = []

    def walk(node: ExpressionAst, sign: Optional[int]) -> None:
        if isinstance(node, Identifier):
            if node.name == dep:
                signs.append(sign)
            return
        if isinstance(node, NumberLiteral):
            return
        if isinstance(node, Unary):
            if node.op == "negate":
                walk(node.child, None if sign is None else -sign)
            else:
                walk(node.child, None)
            return
        if isinstance(node, Binary):
            op = node.op
            if op == "+":
                walk(node.left, sign)
                walk(node.right, sign)
            elif op == "-":
                walk(node.left, sign)
                walk(node.right, None if sign is None else -sign)
            elif op == "*":
                _walk_factor(node.left, node.right, sign)
                _walk_factor(node.right, node.left, sign)
            elif op == "/":
                _walk_factor(node.left, node.right, sign)
                other = _static_sign(node.left)
                flipped = None if sign is None or other is None else -sign * other
                walk(node.right, flipped)
            else:  # ^, comparisons, and, or
                walk(node.left, None)
                walk(node.right, None)
            return
        if isinstance(node, Call):
            f = node.function
            if f == "IF_THEN_ELSE":
                walk(node.args[0], None)
                walk(node.args[1], sign)
                walk(node.args[2], sign)
            elif f == "SAFEDIV":
                _walk_factor(node.args[0], node.args[1], sign)
                other = _static_sign(node.args[0])
                flipped = None if sign is None or other is None else -sign * other
                walk(node.args[1], flipped)
                for extra in node.args[2:]:
                    walk(extra, None)
            elif f in ("MIN", "MAX", "EXP", "LN", "SQRT", "INT"):
                for a in node.args:
                    walk(a, sign)  # monotone increasing in each argument
            else:  # ABS and anything sign-ambiguous
                for a in node.args:
                    walk(a, None)
            return

    def _walk_factor(side: ExpressionAst, other: ExpressionAst, sign: Optional[int]) -> None:
        if dep not in expr.dependencies(side):
            return
        factor = _static_sign(other)
        walk(side, None if sign is None or factor is None else sign * factor)

    walk(ast, 1)
    if not signs:
        raise DependencyAbsent(f"{dep!r} does not occur in the expression")
    if all(s == 1 for s in signs):
        return POSITIVE
    if all(s == -1 for s in signs):
        return NEGATIVE
    return UNKNOWN


def derive_causal_graph(
    model: SystemModel, diagnostics: Optional[list[Diagnostic]] = None
) -> CausalGraph:
    """Build the causal-loop graph of a model.

    Link rules: every equation dependency d of v gives d->v with inferred
    polarity; each inflow f of stock s gives f->s positive and each
    outflow f->s negative. Stock/flow links win on conflict with
    equation-derived ones (a warning is recorded in `diagnostics`).
    """
    if model.error_diagnostics:
        raise ValueError("cannot derive a causal graph from a model with error diagnostics")

    nodes = sorted(model.variable_names)
    node_set = set(nodes)
    links: dict[tuple[str, str], CausalLink] = {}

    def record_conflict(pair: tuple[str, str], kept: str, dropped: str) -> None:
        if diagnostics is not None:
            diagnostics.append(
                Diagnostic(
                    "warning",
                    "conflicting_polarity",
                    f"link {pair[0]}->{pair[1]}: {dropped} polarity conflicts with {kept}; kept {kept}",
                    location=pair[1],
                )
            )

    for v in model.variables:
        if v.kind != STOCK:
            continue
        for f in v.inflows:
            pair = (f, v.name)
            existing = links.get(pair)
            if existing is not None and existing.polarity != POSITIVE:
                record_conflict(pair, POSITIVE, existing.polarity)
            if existing is None:
                links[pair] = CausalLink(f, v.name, POSITIVE, "inflow")
        for f in v.outflows:
            pair = (f, v.name)
            existing = links.get(pair)
            if existing is not None:
                if existing.polarity != NEGATIVE:
                    record_conflict(pair, existing.polarity, NEGATIVE)
                continue
            links[pair] = CausalLink(f, v.name, NEGATIVE, "outflow")

    for v in model.variables:
        if v.equation is None:
            continue
        for dep in sorted(expr.dependencies(v.equation)):
            if dep not in node_set:
                continue  # unresolved reference, already diagnosed at parse
            pair = (dep, v.name)
            polarity = infer_polarity(v.equation, dep)
            existing = links.get(pair)
            if existing is not None:
                if existing.polarity != polarity:
                    record_conflict(pair, existing.polarity, polarity)
                continue
            links[pair] = CausalLink(dep, v.name, polarity, "equation")

    return CausalGraph.build(nodes, links.values())


def classify_loop(polarities: list[str]) -> str:
    """Parity rule: odd negatives -> balancing, even -> reinforcing;
    any unknown polarity makes the loop undetermined."""
    if not polarities:
        raise ValueError("empty polarity list")
    if any(p == UNKNOWN for p in polarities):
        return UNDETERMINED
    negatives = sum(1 for p in polarities if p == NEGATIVE)
    return BALANCING if negatives % 2 == 1 else REINFORCING


@dataclass(frozen=True)
class FeedbackLoop:
    cycle: tuple[str, ...]  # canonical rotation: starts at smallest member
    links: tuple[CausalLink, ...]
    loop_type: str

    @staticmethod
    def from_cycle(cycle: list[str], graph: CausalGraph) -> "FeedbackLoop":
        i = cycle.index(min(cycle))
        rotated = tuple(cycle[i:] + cycle[:i])
        links = []
        for j, node in enumerate(rotated):
            nxt = rotated[(j + 1) % len(rotated)]
            link = graph.link(node, nxt)
            if link is None:
                raise ValueError(f"cycle uses missing link {node}->{nxt}")
            links.append(link)
        return FeedbackLoop(
            cycle=rotated,
            links=tuple(links),
            loop_type=classify_loop([l.polarity for l in links]),
        )


class LoopList(list):
    """List of FeedbackLoop with a truncation marker for max_length cuts."""

    def __init__(self, loops: Iterable[FeedbackLoop] = (), truncated: bool = False):
        super().__init__(loops)
        self.truncated = truncated


def enumerate_loops(
    graph: CausalGraph,
    max_length: Optional[int] = None,
    cap: int = DEFAULT_LOOP_CAP,
) -> LoopList:
    """All elementary cycles of the graph, canonically rotated and sorted
    by (length, cycle). Uses Johnson-style blocking; with `max_length` a
    bounded DFS is used instead and longer cycles are dropped (the result
    carries truncated=True when anything was cut)."""
    if max_length is not None:
        cycles, truncated = _bounded_cycles(graph, max_length)
    else:
        cycles = _johnson_cycles(graph, cap)
        truncated = False
    loops = [FeedbackLoop.from_cycle(c, graph) for c in cycles]
    loops.sort(key=lambda lp: (len(lp.cycle), lp.cycle))
    return LoopList(loops, truncated=truncated)


def _adjacency(graph: CausalGraph) -> dict[str, list[str]]:
    adj: dict[str, list[str]] = {n: [] for n in graph.nodes}
    for l in graph.links:
        adj[l.source].append(l.target)
    for targets in adj.values():
        targets.sort()
    return adj


def _johnson_cycles(graph: CausalGraph, cap: int) -> list[list[str]]:
    """Johnson's elementary-circuit enumeration with per-cycle output cost."""
    adj = _adjacency(graph)
    order = {n: i for i, n in enumerate(graph.nodes)}
    cycles: list[list[str]] = []

    # Self-loops first; Johnson's core assumes simple arcs.
    for n in graph.nodes:
        if n in adj[n]:
            cycles.append([n])
            if len(cycles) > cap:
                raise LoopBudgetExceeded(cap)

    nodes = list(graph.nodes)
    for start in nodes:
        # Subgraph induced by nodes >= start, without self-loops.
        sub = {
            n: [m for m in adj[n] if order[m] >= order[start] and m != n]
            for n in nodes
            if order[n] >= order[start]
        }
        if not sub.get(start):
            continue
        blocked: dict[str, bool] = {n: False for n in sub}
        block_map: dict[str, set[str]] = {n: set() for n in sub}
        stack: list[str] = []

        def unblock(u: str) -> None:
            blocked[u] = False
            pending = block_map[u]
            block_map[u] = set()
            for w in sorted(pending):
                if blocked[w]:
                    unblock(w)

        def circuit(v: str) -> bool:
            found = False
            stack.append(v)
            blocked[v] = True
            for w in sub[v]:
                if w == start:
                    cycles.append(list(stack))
                    if len(cycles) > cap:
                        raise LoopBudgetExceeded(cap)
                    found = True
                elif not blocked[w]:
                    if circuit(w):
                        found = True
            if found:
                unblock(v)
            else:
                for w in sub[v]:
                    block_map[w].add(v)
            stack.pop()
            return found

        circuit(start)
    return cycles


def _bounded_cycles(graph: CausalGraph, max_length: int) -> tuple[list[list[str]], bool]:
    """Simple-path DFS enumeration bounded by cycle length."""
    adj = _adjacency(graph)
    order = {n: i for i, n in enumerate(graph.nodes)}
    cycles: list[list[str]] = []
    truncated = False

    for start in graph.nodes:
        path = [start]
        on_path = {start}

        def dfs(v: str) -> None:
            nonlocal truncated
            for w in adj[v]:
                if order[w] < order[start]:
                    continue
                if w == start:
                    cycles.append(list(path))
                elif w not in on_path:
                    if len(path) >= max_length:
                        truncated = True
                        continue
                    path.append(w)
                    on_path.add(w)
                    dfs(w)
                    path.pop()
                    on_path.remove(w)

        dfs(start)
    kept = [c for c in cycles if len(c) <= max_length]
    if len(kept) < len(cycles):
        truncated = True
    return kept, truncated
