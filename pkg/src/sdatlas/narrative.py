"""Controlled natural-language translation and the co-pilot seam.

describe() renders a graph into fixed-template sentences; the controlled
grammar in parse_controlled_nl() is the inverse for link sentences, so
graphs survive a describe -> parse -> apply round trip.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Protocol, Union

from .graph import (
    BALANCING,
    NEGATIVE,
    POSITIVE,
    REINFORCING,
    UNKNOWN,
    CausalGraph,
    CausalLink,
    FeedbackLoop,
)
from .names import EmptyName, canonicalize_name, display_name_for
from .structured import StructuredDiagram, assign_loop_ids

__all__ = [
    "Narrative",
    "describe",
    "AddLink",
    "RemoveLink",
    "AddVariable",
    "RemoveVariable",
    "RenameVariable",
    "ModelEdit",
    "NlParse",
    "NoEditsParsed",
    "parse_controlled_nl",
    "EditConflict",
    "apply_edits",
    "CopilotReply",
    "CopilotAdapter",
    "DeterministicCopilot",
    "AdapterUnavailable",
    "copilot_respond",
]


# ---------------------------------------------------------------------------
# describe


@dataclass(frozen=True)
class Narrative:
    overview: str
    links: tuple[str, ...]
    loops: tuple[str, ...]

    @property
    def links_section(self) -> str:
        return " ".join(self.links)

    @property
    def text(self) -> str:
        parts = ["Overview", self.overview, "", "Links"]
        parts.extend(self.links)
        parts.append("")
        parts.append("Loops")
        parts.extend(self.loops)
        return "\n".join(parts)


def _link_sentence(link: CausalLink, names: Mapping[str, str]) -> str:
    a = names.get(link.source, display_name_for(link.source))
    b = names.get(link.target, display_name_for(link.target))
    if link.polarity == POSITIVE:
        return f"An increase in {a} causes {b} to increase."
    if link.polarity == NEGATIVE:
        return f"An increase in {a} causes {b} to decrease."
    return f"{a} influences {b} (direction unclear)."


def describe(
    graph: CausalGraph,
    loops: Iterable[FeedbackLoop],
    display_names: Optional[Mapping[str, str]] = None,
) -> Narrative:
    """Render a graph into a sectioned narrative using fixed templates."""
    names = dict(display_names or {})
    loops = list(loops)
    reinforcing = sum(1 for lp in loops if lp.loop_type == REINFORCING)
    balancing = sum(1 for lp in loops if lp.loop_type == BALANCING)
    overview = (
        f"This model has {len(graph.nodes)} variables, {len(graph.links)} causal links, "
        f"and {len(loops)} feedback loops ({reinforcing} reinforcing, {balancing} balancing)."
    )
    link_lines = tuple(_link_sentence(l, names) for l in graph.links)
    loop_lines = []
    for loop_id, lp in assign_loop_ids(loops):
        path = [names.get(n, display_name_for(n)) for n in lp.cycle]
        path.append(path[0])
        loop_lines.append(f"{loop_id} is a {lp.loop_type} loop through {' → '.join(path)}.")
    return Narrative(overview=overview, links=link_lines, loops=tuple(loop_lines))


# ---------------------------------------------------------------------------
# model edits and the controlled grammar


@dataclass(frozen=True)
class AddLink:
    source: str
    target: str
    polarity: str


@dataclass(frozen=True)
class RemoveLink:
    source: str
    target: str


@dataclass(frozen=True)
class AddVariable:
    name: str


@dataclass(frozen=True)
class RemoveVariable:
    name: str


@dataclass(frozen=True)
class RenameVariable:
    old: str
    new: str


ModelEdit = Union[AddLink, RemoveLink, AddVariable, RemoveVariable, RenameVariable]


class NoEditsParsed(ValueError):
    def __init__(self, unparsed: list[str]):
        super().__init__("no sentence matched the controlled grammar")
        self.unparsed = unparsed


@dataclass
class NlParse:
    edits: list[ModelEdit] = field(default_factory=list)
    unparsed: list[str] = field(default_factory=list)


_SENTENCE_SPLIT = re.compile(r"[.!?]+")

_RULES: list[tuple[re.Pattern, object]] = [
    (
        re.compile(r"^an increase in (.+?) causes (.+?) to (increase|decrease)$", re.I),
        lambda m: AddLink(_name(m[1]), _name(m[2]), POSITIVE if m[3].lower() == "increase" else NEGATIVE),
    ),
    (
        re.compile(r"^remove the link from (.+?) to (.+)$", re.I),
        lambda m: RemoveLink(_name(m[1]), _name(m[2])),
    ),
    (re.compile(r"^add variable (.+)$", re.I), lambda m: AddVariable(_name(m[1]))),
    (re.compile(r"^remove variable (.+)$", re.I), lambda m: RemoveVariable(_name(m[1]))),
    (re.compile(r"^rename (.+?) to (.+)$", re.I), lambda m: RenameVariable(_name(m[1]), _name(m[2]))),
    (
        re.compile(r"^(.+?) increases (.+)$", re.I),
        lambda m: AddLink(_name(m[1]), _name(m[2]), POSITIVE),
    ),
    (
        re.compile(r"^(.+?) decreases (.+)$", re.I),
        lambda m: AddLink(_name(m[1]), _name(m[2]), NEGATIVE),
    ),
    (
        re.compile(r"^(.+?) influences (.+?)(?: \(direction unclear\))?$", re.I),
        lambda m: AddLink(_name(m[1]), _name(m[2]), UNKNOWN),
    ),
]


def _name(raw: str) -> str:
    return canonicalize_name(raw)


def parse_controlled_nl(text: str) -> NlParse:
    """Match each sentence against the controlled grammar.

    Raises NoEditsParsed when nothing matches; otherwise unmatched
    sentences are reported in the result, never guessed at.
    """
    sentences = [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]
    result = NlParse()
    for sentence in sentences:
        edit = None
        for pattern, build in _RULES:
            m = pattern.match(sentence)
            if m:
                try:
                    edit = build(m)  # type: ignore[operator]
                except EmptyName:
                    edit = None
                break
        if edit is None:
            result.unparsed.append(sentence)
        else:
            result.edits.append(edit)
    if not result.edits:
        raise NoEditsParsed(result.unparsed)
    return result


class EditConflict(ValueError):
    pass


def apply_edits(graph: CausalGraph, edits: Iterable[ModelEdit]) -> CausalGraph:
    """Apply edits in order, transactionally: any conflict raises
    EditConflict and the input graph is returned unchanged (graphs are
    immutable; no partial state ever escapes)."""
    nodes = set(graph.nodes)
    links: dict[tuple[str, str], CausalLink] = {(l.source, l.target): l for l in graph.links}

    for edit in edits:
        if isinstance(edit, AddLink):
            nodes.add(edit.source)
            nodes.add(edit.target)
            links[(edit.source, edit.target)] = CausalLink(edit.source, edit.target, edit.polarity, "edit")
        elif isinstance(edit, RemoveLink):
            if (edit.source, edit.target) not in links:
                raise EditConflict(f"no link {edit.source}->{edit.target} to remove")
            del links[(edit.source, edit.target)]
        elif isinstance(edit, AddVariable):
            nodes.add(edit.name)
        elif isinstance(edit, RemoveVariable):
            if edit.name not in nodes:
                raise EditConflict(f"no variable {edit.name!r} to remove")
            nodes.discard(edit.name)
            links = {k: v for k, v in links.items() if edit.name not in k}
        elif isinstance(edit, RenameVariable):
            if edit.old not in nodes:
                raise EditConflict(f"no variable {edit.old!r} to rename")
            if edit.new in nodes and edit.new != edit.old:
                raise EditConflict(f"variable {edit.new!r} already exists")
            nodes.discard(edit.old)
            nodes.add(edit.new)

            def sub(n: str) -> str:
                return edit.new if n == edit.old else n

            links = {
                (sub(s), sub(t)): CausalLink(sub(s), sub(t), l.polarity, l.provenance)
                for (s, t), l in links.items()
            }
        else:
            raise TypeError(f"unknown edit: {edit!r}")
    return CausalGraph.build(nodes, links.values())


# ---------------------------------------------------------------------------
# co-pilot


@dataclass(frozen=True)
class CopilotReply:
    text: str
    facts_used: tuple[str, ...]
    intent: str


class AdapterUnavailable(RuntimeError):
    pass


class AdapterTimeout(AdapterUnavailable):
    pass


class CopilotAdapter(Protocol):
    def respond(self, question: str, diagram: StructuredDiagram) -> CopilotReply: ...


_LOOP_ID_RE = re.compile(r"\b([RBU]\d+)\b", re.I)


class DeterministicCopilot:
    """Keyword-intent co-pilot: every answer is a projection of the
    diagram it was asked about, so replies never hallucinate."""

    def respond(self, question: str, diagram: StructuredDiagram) -> CopilotReply:
        q = question.lower()
        names = {v.name: v.display_name for v in diagram.variables}

        if "how many" in q and ("loop" in q or "feedback" in q):
            reinforcing = sum(1 for lp in diagram.loops if lp.type == REINFORCING)
            balancing = sum(1 for lp in diagram.loops if lp.type == BALANCING)
            text = (
                f"This model has {len(diagram.loops)} feedback loops: "
                f"{reinforcing} reinforcing and {balancing} balancing."
            )
            return CopilotReply(text, tuple(lp.id for lp in diagram.loops), "loop_count")

        if "list" in q and "variable" in q:
            listing = ", ".join(names[v.name] for v in diagram.variables)
            return CopilotReply(
                f"The variables are: {listing}.",
                tuple(v.name for v in diagram.variables),
                "list_variables",
            )

        if "explain" in q:
            m = _LOOP_ID_RE.search(question)
            if m:
                loop_id = m[1].upper()
                for lp in diagram.loops:
                    if lp.id == loop_id:
                        path = [names.get(n, display_name_for(n)) for n in lp.variables]
                        path.append(path[0])
                        text = f"{lp.id} is a {lp.type} loop through {' → '.join(path)}."
                        return CopilotReply(text, (lp.id,), "explain_loop")

        m = re.search(r"what happens if (.+?) increases", q)
        if m:
            target = _match_variable(m[1], diagram)
            if target is not None:
                effects = []
                facts = []
                for l in diagram.links:
                    if l.source != target:
                        continue
                    facts.append(f"{l.source}->{l.target}")
                    to_name = names.get(l.target, display_name_for(l.target))
                    if l.polarity == POSITIVE:
                        effects.append(f"{to_name} increases")
                    elif l.polarity == NEGATIVE:
                        effects.append(f"{to_name} decreases")
                    else:
                        effects.append(f"{to_name} changes (direction unclear)")
                subject = names.get(target, display_name_for(target))
                if effects:
                    text = f"If {subject} increases, {' and '.join(effects)}."
                else:
                    text = f"If {subject} increases, nothing downstream is affected directly."
                return CopilotReply(text, tuple(facts), "downstream_effects")

        return CopilotReply(self._overview(diagram), (), "fallback")

    @staticmethod
    def _overview(diagram: StructuredDiagram) -> str:
        reinforcing = sum(1 for lp in diagram.loops if lp.type == REINFORCING)
        balancing = sum(1 for lp in diagram.loops if lp.type == BALANCING)
        return (
            f"This model has {len(diagram.variables)} variables, {len(diagram.links)} causal links, "
            f"and {len(diagram.loops)} feedback loops ({reinforcing} reinforcing, {balancing} balancing)."
        )


def _match_variable(raw: str, diagram: StructuredDiagram) -> Optional[str]:
    try:
        canonical = canonicalize_name(raw)
    except EmptyName:
        return None
    for v in diagram.variables:
        if v.name == canonical:
            return v.name
    return None


def copilot_respond(
    question: str,
    diagram: StructuredDiagram,
    adapter: Optional[CopilotAdapter] = None,
) -> CopilotReply:
    """Delegate a question to an adapter; failures surface as
    AdapterUnavailable, never as a crash."""
    adapter = adapter or DeterministicCopilot()
    try:
        return adapter.respond(question, diagram)
    except AdapterUnavailable:
        raise
    except Exception as e:  # adapter contract: structured failure only
        raise AdapterUnavailable(str(e)) from e
