"""Canonical identifier handling shared by the model and expression layers."""

from __future__ import annotations

import re

_RUNS = re.compile(r"[\s_]+")


class EmptyName(ValueError):
    """Raised when a name is empty or all whitespace after trimming."""


def canonicalize_name(raw: str) -> str:
    """Lowercase a variable name and collapse space/underscore runs to '_'.

    Idempotent: canonicalize_name(canonicalize_name(x)) == canonicalize_name(x).
    """
    trimmed = raw.strip()
    if not trimmed:
        raise EmptyName(f"variable name is empty: {raw!r}")
    return _RUNS.sub("_", trimmed).lower()


def display_name_for(canonical: str) -> str:
    """Default human-readable form of a canonical name ("birth_rate" -> "Birth Rate")."""
    return " ".join(part.capitalize() for part in canonical.split("_") if part)
