"""sdatlas: a repository and analysis platform for system-dynamics models.

Parses XMILE into structured models, derives causal-loop structure,
indexes models with hybrid keyword/semantic search and SDG tagging, and
translates between graph, structured-JSON, and controlled natural
language forms.
"""

from .names import canonicalize_name
from .expr import dependencies, evaluate, parse_equation, render_equation
from .model import Diagnostic, SimSpec, SystemModel, Variable, ViewHint
from .xmile import parse_xmile, serialize_xmile, validate_model
from .graph import (
    CausalGraph,
    CausalLink,
    FeedbackLoop,
    classify_loop,
    derive_causal_graph,
    enumerate_loops,
    infer_polarity,
)
from .layout import LayoutResult, layout
from .structured import StructuredDiagram, from_structured, to_structured
from .narrative import apply_edits, copilot_respond, describe, parse_controlled_nl
from .catalog import Catalog, CatalogDocument, SearchQuery, classify_sdg, embed

__version__ = "0.1.0"
