"""The structured diagram exchange form and its JSON wire format.

A StructuredDiagram lists variables, directional polarized links, and the
identified loops (R1/B1/U1-style ids). On the wire, polarity is "+", "-",
or "?" and loop types are spelled out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .graph import (
    BALANCING,
    NEGATIVE,
    POSITIVE,
    REINFORCING,
    UNDETERMINED,
    UNKNOWN,
    CausalGraph,
    CausalLink,
    FeedbackLoop,
    classify_loop,
)
from .model import Diagnostic
from .names import display_name_for

__all__ = [
    "DiagramVariable",
    "DiagramLink",
    "DiagramLoop",
    "StructuredDiagram",
    "InconsistentLoops",
    "DanglingReference",
    "DuplicateLink",
    "to_structured",
    "from_structured",
]

_POLARITY_TO_WIRE = {POSITIVE: "+", NEGATIVE: "-", UNKNOWN: "?"}
_WIRE_TO_POLARITY = {v: k for k, v in _POLARITY_TO_WIRE.items()}
_LOOP_PREFIX = {REINFORCING: "R", BALANCING: "B", UNDETERMINED: "U"}


class InconsistentLoops(ValueError):
    pass


class DanglingReference(ValueError):
    pass


class DuplicateLink(ValueError):
    pass


@dataclass(frozen=True)
class DiagramVariable:
    name: str
    display_name: str
    kind: Optional[str] = None


@dataclass(frozen=True)
class DiagramLink:
    source: str
    target: str
    polarity: str


@dataclass(frozen=True)
class DiagramLoop:
    id: str
    variables: tuple[str, ...]
    type: str


@dataclass(frozen=True)
class StructuredDiagram:
    variables: tuple[DiagramVariable, ...]
    links: tuple[DiagramLink, ...]
    loops: tuple[DiagramLoop, ...]

    def to_json_dict(self) -> dict:
        return {
            "variables": [
                {"name": v.name, "display_name": v.display_name}
                | ({"kind": v.kind} if v.kind is not None else {})
                for v in self.variables
            ],
            "links": [
                {"from": l.source, "to": l.target, "polarity": _POLARITY_TO_WIRE[l.polarity]}
                for l in self.links
            ],
            "loops": [
                {"id": lp.id, "variables": list(lp.variables), "type": lp.type}
                for lp in self.loops
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), ensure_ascii=False)

    @staticmethod
    def from_json_dict(data: Mapping) -> "StructuredDiagram":
        variables = tuple(
            DiagramVariable(
                name=v["name"],
                display_name=v.get("display_name", display_name_for(v["name"])),
                kind=v.get("kind"),
            )
            for v in data.get("variables", [])
        )
        links = tuple(
            DiagramLink(
                source=l["from"],
                target=l["to"],
                polarity=_WIRE_TO_POLARITY.get(l.get("polarity", "?"), UNKNOWN),
            )
            for l in data.get("links", [])
        )
        loops = tuple(
            DiagramLoop(id=lp["id"], variables=tuple(lp["variables"]), type=lp["type"])
            for lp in data.get("loops", [])
        )
        return StructuredDiagram(variables=variables, links=links, loops=loops)

    @staticmethod
    def from_json(text: str) -> "StructuredDiagram":
        return StructuredDiagram.from_json_dict(json.loads(text))


def assign_loop_ids(loops: Iterable[FeedbackLoop]) -> list[tuple[str, FeedbackLoop]]:
    """R1,R2,.../B1,.../U1,... ids, numbered independently in input order."""
    counters = {REINFORCING: 0, BALANCING: 0, UNDETERMINED: 0}
    out = []
    for lp in loops:
        counters[lp.loop_type] += 1
        out.append((f"{_LOOP_PREFIX[lp.loop_type]}{counters[lp.loop_type]}", lp))
    return out


def to_structured(
    graph: CausalGraph,
    loops: Iterable[FeedbackLoop],
    display_names: Optional[Mapping[str, str]] = None,
    kinds: Optional[Mapping[str, str]] = None,
) -> StructuredDiagram:
    """Project a graph and its loops into the exchange form."""
    display_names = display_names or {}
    kinds = kinds or {}
    link_set = {(l.source, l.target) for l in graph.links}
    loop_entries = []
    for loop_id, lp in assign_loop_ids(loops):
        for l in lp.links:
            if (l.source, l.target) not in link_set:
                raise InconsistentLoops(f"loop {loop_id} uses link {l.source}->{l.target} absent from graph")
        loop_entries.append(DiagramLoop(id=loop_id, variables=lp.cycle, type=lp.loop_type))
    return StructuredDiagram(
        variables=tuple(
            DiagramVariable(
                name=n,
                display_name=display_names.get(n, display_name_for(n)),
                kind=kinds.get(n),
            )
            for n in graph.nodes
        ),
        links=tuple(DiagramLink(l.source, l.target, l.polarity) for l in graph.links),
        loops=tuple(loop_entries),
    )


def from_structured(
    diagram: StructuredDiagram, diagnostics: Optional[list[Diagnostic]] = None
) -> CausalGraph:
    """Rebuild a CausalGraph from the exchange form.

    Declared loops are treated as validation input only: a declared type
    that contradicts the link polarities yields a loop_mismatch warning
    in `diagnostics`, never a different graph.
    """
    names = {v.name for v in diagram.variables}
    seen: set[tuple[str, str]] = set()
    links = []
    for l in diagram.links:
        if l.source not in names or l.target not in names:
            raise DanglingReference(f"link references undeclared variable: {l.source}->{l.target}")
        if (l.source, l.target) in seen:
            raise DuplicateLink(f"duplicate link {l.source}->{l.target}")
        seen.add((l.source, l.target))
        links.append(CausalLink(l.source, l.target, l.polarity, "declared"))
    graph = CausalGraph.build(names, links)

    for lp in diagram.loops:
        for v in lp.variables:
            if v not in names:
                raise DanglingReference(f"loop {lp.id} references undeclared variable {v!r}")
        polarities = []
        complete = True
        for i, v in enumerate(lp.variables):
            nxt = lp.variables[(i + 1) % len(lp.variables)]
            link = graph.link(v, nxt)
            if link is None:
                complete = False
                break
            polarities.append(link.polarity)
        recomputed = classify_loop(polarities) if complete and polarities else None
        if diagnostics is not None and recomputed is not None and recomputed != lp.type:
            diagnostics.append(
                Diagnostic(
                    "warning",
                    "loop_mismatch",
                    f"loop {lp.id} declared {lp.type} but links imply {recomputed}",
                    location=lp.id,
                )
            )
    return graph
