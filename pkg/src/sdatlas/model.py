"""Domain types for parsed system-dynamics models."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .expr import ExpressionAst

__all__ = [
    "STOCK",
    "FLOW",
    "AUXILIARY",
    "CONSTANT",
    "Diagnostic",
    "DIAGNOSTIC_CODES",
    "SimSpec",
    "ViewHint",
    "Variable",
    "SystemModel",
]

STOCK = "stock"
FLOW = "flow"
AUXILIARY = "auxiliary"
CONSTANT = "constant"

VARIABLE_KINDS = (STOCK, FLOW, AUXILIARY, CONSTANT)

# The fixed enumeration of diagnostic codes emitted anywhere in the pipeline.
DIAGNOSTIC_CODES = frozenset(
    {
        "malformed_equation",
        "missing_equation",
        "unknown_function",
        "unresolved_reference",
        "duplicate_name",
        "unsupported_feature",
        "skipped_section",
        "missing_initial",
        "orphan_flow",
        "unknown_flow",
        "constant_with_dependencies",
        "dangling_view_hint",
        "self_link",
        "conflicting_polarity",
        "bad_sim_spec",
        "loop_mismatch",
    }
)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    location: Optional[str] = None

    def __post_init__(self):
        if self.severity not in ("error", "warning"):
            raise ValueError(f"bad severity: {self.severity}")
        if self.code not in DIAGNOSTIC_CODES:
            raise ValueError(f"unknown diagnostic code: {self.code}")


@dataclass(frozen=True)
class SimSpec:
    start: float
    stop: float
    dt: float


@dataclass(frozen=True)
class ViewHint:
    variable: str  # canonical identifier
    x: float
    y: float


@dataclass(frozen=True)
class Variable:
    """One model element. Stocks carry `initial` and flow attachments;
    constants carry a literal equation with no dependencies."""

    name: str  # canonical
    display_name: str
    kind: str
    equation: Optional[ExpressionAst] = None
    opaque_equation: Optional[str] = None  # unparsed source text, deps unknown
    initial: Optional[ExpressionAst] = None
    inflows: tuple[str, ...] = ()
    outflows: tuple[str, ...] = ()
    units: Optional[str] = None
    documentation: Optional[str] = None


@dataclass(frozen=True)
class SystemModel:
    name: str
    variables: tuple[Variable, ...]
    sim_spec: Optional[SimSpec] = None
    views: tuple[ViewHint, ...] = ()
    diagnostics: tuple[Diagnostic, ...] = ()

    def variable(self, name: str) -> Optional[Variable]:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    @property
    def variable_names(self) -> frozenset[str]:
        return frozenset(v.name for v in self.variables)

    @property
    def error_diagnostics(self) -> tuple[Diagnostic, ...]:
        return tuple(d for d in self.diagnostics if d.severity == "error")

    def stocks(self) -> tuple[Variable, ...]:
        return tuple(v for v in self.variables if v.kind == STOCK)
