"""XMILE document parsing, serialization, and model validation.

The parser is lenient-collecting: any well-formed XML document bearing the
XMILE v1.0 namespace yields a SystemModel, with model-level problems
recorded as Diagnostics instead of raised. Serialization is byte
deterministic (UTF-8, 2-space indent, variables sorted by canonical name).
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Optional, Union
from xml.sax.saxutils import escape, quoteattr

from . import expr
from .expr import EquationSyntaxError, UnknownFunction, parse_equation, render_equation
from .model import (
    AUXILIARY,
    CONSTANT,
    FLOW,
    STOCK,
    Diagnostic,
    SimSpec,
    SystemModel,
    Variable,
    ViewHint,
)
from .names import EmptyName, canonicalize_name

__all__ = [
    "XMILE_NAMESPACE",
    "MalformedXml",
    "UnsupportedFormat",
    "EmptyModel",
    "OpaqueEquation",
    "parse_xmile",
    "serialize_xmile",
    "validate_model",
    "models_equal",
]

XMILE_NAMESPACE = "http://docs.oasis-open.org/xmile/ns/XMILE/v1.0"
_NS = f"{{{XMILE_NAMESPACE}}}"

_SKIPPED_SECTIONS = ("style", "macro", "macros", "group", "groups", "dimensions", "behavior")
_UNSUPPORTED_VAR_CHILDREN = ("gf", "conveyor", "queue", "oven", "dimensions", "element")


class MalformedXml(ValueError):
    def __init__(self, message: str, offset: tuple[int, int]):
        super().__init__(f"{message} (line {offset[0]}, column {offset[1]})")
        self.offset = offset


class UnsupportedFormat(ValueError):
    pass


class EmptyModel(ValueError):
    pass


class OpaqueEquation(ValueError):
    pass


def _text(parent: ET.Element, tag: str) -> Optional[str]:
    el = parent.find(_NS + tag)
    if el is None or el.text is None:
        return None
    return el.text.strip()


def parse_xmile(document: Union[bytes, str]) -> SystemModel:
    """Parse an XMILE document into a SystemModel.

    Raises MalformedXml, UnsupportedFormat, or EmptyModel; every other
    problem becomes a Diagnostic on the returned model.
    """
    if isinstance(document, str):
        document = document.encode("utf-8")
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        raise MalformedXml(str(e), e.position) from None

    if root.tag != _NS + "xmile":
        raise UnsupportedFormat(
            f"root element {root.tag!r} does not carry the XMILE v1.0 namespace"
        )

    diagnostics: list[Diagnostic] = []
    name = ""
    header = root.find(_NS + "header")
    if header is not None:
        name = _text(header, "name") or ""

    sim_spec = _parse_sim_specs(root, diagnostics)

    for child in root:
        local = child.tag.split("}")[-1]
        if not child.tag.startswith(_NS):
            diagnostics.append(
                Diagnostic("warning", "unsupported_feature", f"vendor element <{child.tag}> skipped")
            )
        elif local in _SKIPPED_SECTIONS:
            diagnostics.append(
                Diagnostic("warning", "skipped_section", f"section <{local}> skipped")
            )

    model_el = root.find(_NS + "model")
    if model_el is None:
        raise EmptyModel("document has no <model> section")
    variables_el = model_el.find(_NS + "variables")
    if variables_el is None or len(variables_el) == 0:
        raise EmptyModel("model defines no variables")

    variables = _parse_variables(variables_el, diagnostics)
    if not variables:
        raise EmptyModel("model defines no variables")

    _check_flow_attachments(variables, diagnostics)
    _check_references(variables, diagnostics)
    views = _parse_views(model_el, {v.name for v in variables}, diagnostics)

    return SystemModel(
        name=name,
        variables=tuple(variables),
        sim_spec=sim_spec,
        views=tuple(views),
        diagnostics=tuple(diagnostics),
    )


def _parse_sim_specs(root: ET.Element, diagnostics: list[Diagnostic]) -> Optional[SimSpec]:
    el = root.find(_NS + "sim_specs")
    if el is None:
        return None
    try:
        start = float(_text(el, "start") or "")
        stop = float(_text(el, "stop") or "")
        dt = float(_text(el, "dt") or "1")
    except ValueError:
        diagnostics.append(Diagnostic("warning", "bad_sim_spec", "sim_specs values not numeric"))
        return None
    if stop <= start or dt <= 0:
        diagnostics.append(
            Diagnostic("warning", "bad_sim_spec", f"invalid sim_specs start={start} stop={stop} dt={dt}")
        )
        return None
    return SimSpec(start=start, stop=stop, dt=dt)


def _parse_variables(variables_el: ET.Element, diagnostics: list[Diagnostic]) -> list[Variable]:
    variables: list[Variable] = []
    seen: set[str] = set()
    for el in variables_el:
        local = el.tag.split("}")[-1]
        if not el.tag.startswith(_NS) or local not in ("stock", "flow", "aux"):
            diagnostics.append(
                Diagnostic("warning", "unsupported_feature", f"variable element <{local}> skipped")
            )
            continue
        raw_name = el.get("name")
        if raw_name is None:
            diagnostics.append(
                Diagnostic("warning", "unsupported_feature", f"<{local}> without a name skipped")
            )
            continue
        try:
            canonical = canonicalize_name(raw_name)
        except EmptyName:
            diagnostics.append(
                Diagnostic("warning", "unsupported_feature", f"<{local}> with blank name skipped")
            )
            continue
        if canonical in seen:
            diagnostics.append(
                Diagnostic(
                    "error",
                    "duplicate_name",
                    f"duplicate variable name {raw_name!r}; first occurrence wins",
                    location=canonical,
                )
            )
            continue
        seen.add(canonical)
        variables.append(_parse_variable(el, local, canonical, raw_name, diagnostics))
    return variables


def _parse_variable(
    el: ET.Element,
    local: str,
    canonical: str,
    raw_name: str,
    diagnostics: list[Diagnostic],
) -> Variable:
    eqn_src = _text(el, "eqn")
    units = _text(el, "units")
    doc = _text(el, "doc")

    unsupported = [c.tag.split("}")[-1] for c in el if c.tag.split("}")[-1] in _UNSUPPORTED_VAR_CHILDREN]
    opaque: Optional[str] = None
    ast = None
    if unsupported:
        diagnostics.append(
            Diagnostic(
                "warning",
                "unsupported_feature",
                f"unsupported constructs {unsupported} on {raw_name!r}; equation kept as opaque text",
                location=canonical,
            )
        )
        opaque = eqn_src or ""
    elif eqn_src:
        try:
            ast = parse_equation(eqn_src)
        except EquationSyntaxError as e:
            diagnostics.append(
                Diagnostic("warning", "malformed_equation", f"{raw_name!r}: {e}", location=canonical)
            )
            opaque = eqn_src
        except UnknownFunction as e:
            diagnostics.append(
                Diagnostic("warning", "unknown_function", f"{raw_name!r}: {e}", location=canonical)
            )
            opaque = eqn_src

    if local == "stock":
        if ast is None and opaque is None:
            diagnostics.append(
                Diagnostic("error", "missing_initial", f"stock {raw_name!r} has no initial value", location=canonical)
            )
        inflows = _flow_names(el, "inflow")
        outflows = _flow_names(el, "outflow")
        return Variable(
            name=canonical,
            display_name=raw_name,
            kind=STOCK,
            initial=ast,
            opaque_equation=opaque,
            inflows=inflows,
            outflows=outflows,
            units=units,
            documentation=doc,
        )

    if ast is None and opaque is None:
        diagnostics.append(
            Diagnostic("warning", "missing_equation", f"{local} {raw_name!r} has no equation", location=canonical)
        )
    kind = FLOW if local == "flow" else AUXILIARY
    if kind == AUXILIARY and ast is not None and _is_literal(ast):
        kind = CONSTANT
    return Variable(
        name=canonical,
        display_name=raw_name,
        kind=kind,
        equation=ast,
        opaque_equation=opaque,
        units=units,
        documentation=doc,
    )


def _is_literal(ast: expr.ExpressionAst) -> bool:
    if isinstance(ast, expr.NumberLiteral):
        return True
    return isinstance(ast, expr.Unary) and ast.op == "negate" and isinstance(ast.child, expr.NumberLiteral)


def _flow_names(el: ET.Element, tag: str) -> tuple[str, ...]:
    names = []
    for child in el.findall(_NS + tag):
        if child.text and child.text.strip():
            names.append(canonicalize_name(child.text))
    return tuple(names)


def _check_flow_attachments(variables: list[Variable], diagnostics: list[Diagnostic]) -> None:
    flows = {v.name for v in variables if v.kind == FLOW}
    for i, v in enumerate(variables):
        if v.kind != STOCK:
            continue
        kept_in = tuple(f for f in v.inflows if f in flows)
        kept_out = tuple(f for f in v.outflows if f in flows)
        for missing in [f for f in v.inflows if f not in flows] + [f for f in v.outflows if f not in flows]:
            diagnostics.append(
                Diagnostic(
                    "warning",
                    "unknown_flow",
                    f"stock {v.display_name!r} references nonexistent flow {missing!r}; dropped",
                    location=v.name,
                )
            )
        if kept_in != v.inflows or kept_out != v.outflows:
            variables[i] = Variable(
                name=v.name,
                display_name=v.display_name,
                kind=v.kind,
                equation=v.equation,
                opaque_equation=v.opaque_equation,
                initial=v.initial,
                inflows=kept_in,
                outflows=kept_out,
                units=v.units,
                documentation=v.documentation,
            )


def _check_references(variables: list[Variable], diagnostics: list[Diagnostic]) -> None:
    names = {v.name for v in variables}
    for v in variables:
        for ast in (v.equation, v.initial):
            if ast is None:
                continue
            for dep in sorted(expr.dependencies(ast)):
                if dep not in names:
                    diagnostics.append(
                        Diagnostic(
                            "warning",
                            "unresolved_reference",
                            f"{v.display_name!r} references undefined {dep!r}",
                            location=v.name,
                        )
                    )


def _parse_views(
    model_el: ET.Element, names: set[str], diagnostics: list[Diagnostic]
) -> list[ViewHint]:
    hints: list[ViewHint] = []
    views_el = model_el.find(_NS + "views")
    if views_el is None:
        return hints
    seen: set[str] = set()
    for view in views_el.findall(_NS + "view"):
        for el in view:
            raw = el.get("name")
            x, y = el.get("x"), el.get("y")
            if raw is None or x is None or y is None:
                continue
            try:
                canonical = canonicalize_name(raw)
                hint = ViewHint(variable=canonical, x=float(x), y=float(y))
            except (EmptyName, ValueError):
                continue
            if canonical not in names:
                diagnostics.append(
                    Diagnostic(
                        "warning",
                        "dangling_view_hint",
                        f"view position for unknown variable {raw!r} dropped",
                        location=canonical,
                    )
                )
                continue
            if canonical in seen:
                continue
            seen.add(canonical)
            hints.append(hint)
    return hints


def _fmt(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def serialize_xmile(model: SystemModel) -> bytes:
    """Serialize a SystemModel to a deterministic XMILE byte sequence.

    Requires a model with no error diagnostics and no opaque equations.
    """
    if model.error_diagnostics:
        raise ValueError("cannot serialize a model with error diagnostics")
    for v in model.variables:
        if v.opaque_equation is not None:
            raise OpaqueEquation(f"variable {v.name!r} carries an unparsed equation")

    out: list[str] = ['<?xml version="1.0" encoding="utf-8"?>']
    out.append(f'<xmile version="1.0" xmlns="{XMILE_NAMESPACE}">')
    out.append("  <header>")
    out.append(f"    <name>{escape(model.name)}</name>")
    out.append("  </header>")
    if model.sim_spec is not None:
        out.append("  <sim_specs>")
        out.append(f"    <start>{_fmt(model.sim_spec.start)}</start>")
        out.append(f"    <stop>{_fmt(model.sim_spec.stop)}</stop>")
        out.append(f"    <dt>{_fmt(model.sim_spec.dt)}</dt>")
        out.append("  </sim_specs>")
    out.append("  <model>")
    out.append("    <variables>")
    for v in sorted(model.variables, key=lambda v: v.name):
        out.extend(_serialize_variable(v))
    out.append("    </variables>")
    if model.views:
        kinds = {v.name: v.kind for v in model.variables}
        out.append("    <views>")
        out.append("      <view>")
        for hint in sorted(model.views, key=lambda h: h.variable):
            tag = {STOCK: "stock", FLOW: "flow"}.get(kinds.get(hint.variable, AUXILIARY), "aux")
            out.append(
                f"        <{tag} name={quoteattr(hint.variable)} x=\"{_fmt(hint.x)}\" y=\"{_fmt(hint.y)}\"/>"
            )
        out.append("      </view>")
        out.append("    </views>")
    out.append("  </model>")
    out.append("</xmile>")
    return ("\n".join(out) + "\n").encode("utf-8")


def _serialize_variable(v: Variable) -> list[str]:
    tag = {STOCK: "stock", FLOW: "flow"}.get(v.kind, "aux")
    lines = [f"      <{tag} name={quoteattr(v.display_name)}>"]
    eqn = v.initial if v.kind == STOCK else v.equation
    if eqn is not None:
        lines.append(f"        <eqn>{escape(render_equation(eqn))}</eqn>")
    for f in v.inflows:
        lines.append(f"        <inflow>{escape(f)}</inflow>")
    for f in v.outflows:
        lines.append(f"        <outflow>{escape(f)}</outflow>")
    if v.units is not None:
        lines.append(f"        <units>{escape(v.units)}</units>")
    if v.documentation is not None:
        lines.append(f"        <doc>{escape(v.documentation)}</doc>")
    lines.append(f"      </{tag}>")
    return lines


def validate_model(model: SystemModel) -> list[Diagnostic]:
    """Parse diagnostics plus structural checks, deterministically ordered."""
    found: list[Diagnostic] = list(model.diagnostics)
    names: dict[str, int] = {}
    for v in model.variables:
        names[v.name] = names.get(v.name, 0) + 1
    for name, count in names.items():
        if count > 1:
            found.append(
                Diagnostic("error", "duplicate_name", f"duplicate canonical name {name!r}", location=name)
            )

    attached = set()
    for v in model.variables:
        if v.kind == STOCK:
            attached.update(v.inflows)
            attached.update(v.outflows)
            if v.initial is None and v.opaque_equation is None:
                found.append(
                    Diagnostic("error", "missing_initial", f"stock {v.name!r} has no initial value", location=v.name)
                )
    for v in model.variables:
        if v.kind == FLOW and v.name not in attached:
            found.append(
                Diagnostic("warning", "orphan_flow", f"flow {v.name!r} is attached to no stock", location=v.name)
            )
        if v.kind == CONSTANT and v.equation is not None and expr.dependencies(v.equation):
            found.append(
                Diagnostic(
                    "error",
                    "constant_with_dependencies",
                    f"constant {v.name!r} depends on other variables",
                    location=v.name,
                )
            )
        if v.equation is not None and v.name in expr.dependencies(v.equation):
            found.append(
                Diagnostic("warning", "self_link", f"{v.name!r} depends on itself", location=v.name)
            )
        for ast in (v.equation, v.initial):
            if ast is None:
                continue
            for dep in sorted(expr.dependencies(ast)):
                if dep not in names:
                    found.append(
                        Diagnostic(
                            "warning",
                            "unresolved_reference",
                            f"{v.display_name!r} references undefined {dep!r}",
                            location=v.name,
                        )
                    )
    for hint in model.views:
        if hint.variable not in names:
            found.append(
                Diagnostic(
                    "warning",
                    "dangling_view_hint",
                    f"view position for unknown variable {hint.variable!r}",
                    location=hint.variable,
                )
            )

    unique = sorted(
        set(found),
        key=lambda d: (0 if d.severity == "error" else 1, d.location or "", d.code, d.message),
    )
    return unique


def models_equal(a: SystemModel, b: SystemModel, tol: float = 1e-9) -> bool:
    """Structural equality: names, kinds, ASTs, flow attachments, sim_spec,
    view coordinates (to tol). Diagnostics and display-name casing ignored."""
    va = {v.name: v for v in a.variables}
    vb = {v.name: v for v in b.variables}
    if set(va) != set(vb):
        return False
    for name, x in va.items():
        y = vb[name]
        if (
            x.kind != y.kind
            or x.equation != y.equation
            or x.opaque_equation != y.opaque_equation
            or x.initial != y.initial
            or x.inflows != y.inflows
            or x.outflows != y.outflows
            or x.units != y.units
            or x.documentation != y.documentation
            or x.display_name.lower() != y.display_name.lower()
        ):
            return False
    if (a.sim_spec is None) != (b.sim_spec is None):
        return False
    if a.sim_spec is not None and b.sim_spec is not None:
        for fa, fb in (
            (a.sim_spec.start, b.sim_spec.start),
            (a.sim_spec.stop, b.sim_spec.stop),
            (a.sim_spec.dt, b.sim_spec.dt),
        ):
            if abs(fa - fb) > tol:
                return False
    ha = {h.variable: (h.x, h.y) for h in a.views}
    hb = {h.variable: (h.x, h.y) for h in b.views}
    if set(ha) != set(hb):
        return False
    for k, (xa, ya) in ha.items():
        xb, yb = hb[k]
        if abs(xa - xb) > tol or abs(ya - yb) > tol:
            return False
    return True
