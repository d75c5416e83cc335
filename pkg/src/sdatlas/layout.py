"""Deterministic force-directed layout for causal graphs.

The constants below are part of the contract: given the same graph and
seed, every platform must produce bitwise-identical positions.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Optional

from .graph import CausalGraph

__all__ = ["LayoutResult", "layout", "REPULSION", "SPRING", "IDEAL_LENGTH", "ITERATIONS", "MIN_SEPARATION"]

REPULSION = 0.05
SPRING = 0.1
IDEAL_LENGTH = 0.15
ITERATIONS = 300
MIN_SEPARATION = 0.02
HINT_COVERAGE = 0.8


@dataclass(frozen=True)
class LayoutResult:
    positions: dict[str, tuple[float, float]]
    seed: int


def layout(
    graph: CausalGraph,
    seed: int,
    hints: Optional[Mapping[str, tuple[float, float]]] = None,
) -> LayoutResult:
    """Place graph nodes in the unit square.

    When `hints` covers at least 80% of the nodes those positions are
    normalized and used directly (missing nodes get seeded placements);
    otherwise a 300-iteration force-directed pass runs from a seeded
    random start. A post-pass enforces a minimum pairwise separation.
    """
    if not graph.nodes:
        raise ValueError("layout requires at least one node")
    nodes = list(graph.nodes)
    rng = random.Random(seed)
    pos = {n: (rng.random(), rng.random()) for n in nodes}

    use_hints = hints is not None and sum(1 for n in nodes if n in hints) >= HINT_COVERAGE * len(nodes)
    if use_hints:
        for n in nodes:
            if n in hints:  # type: ignore[operator]
                pos[n] = (float(hints[n][0]), float(hints[n][1]))  # type: ignore[index]
    else:
        _force_directed(nodes, graph, pos)

    pos = _normalize(nodes, pos)
    _separate(nodes, pos)
    return LayoutResult(positions={n: pos[n] for n in nodes}, seed=seed)


def _force_directed(nodes: list[str], graph: CausalGraph, pos: dict[str, tuple[float, float]]) -> None:
    edges = sorted({(min(l.source, l.target), max(l.source, l.target)) for l in graph.links if l.source != l.target})
    for step in range(ITERATIONS):
        temperature = 0.1 * (1.0 - step / ITERATIONS)  # linear cooling
        disp = {n: [0.0, 0.0] for n in nodes}
        for i, a in enumerate(nodes):
            ax, ay = pos[a]
            for b in nodes[i + 1 :]:
                bx, by = pos[b]
                dx, dy = ax - bx, ay - by
                d2 = dx * dx + dy * dy
                if d2 < 1e-12:
                    dx, dy, d2 = 1e-6, 1e-6, 2e-12
                d = math.sqrt(d2)
                f = REPULSION / d2
                fx, fy = f * dx / d, f * dy / d
                disp[a][0] += fx
                disp[a][1] += fy
                disp[b][0] -= fx
                disp[b][1] -= fy
        for a, b in edges:
            ax, ay = pos[a]
            bx, by = pos[b]
            dx, dy = ax - bx, ay - by
            d = math.sqrt(dx * dx + dy * dy)
            if d < 1e-9:
                continue
            f = SPRING * (d - IDEAL_LENGTH)
            fx, fy = f * dx / d, f * dy / d
            disp[a][0] -= fx
            disp[a][1] -= fy
            disp[b][0] += fx
            disp[b][1] += fy
        for n in nodes:
            dx, dy = disp[n]
            d = math.sqrt(dx * dx + dy * dy)
            if d > 1e-12:
                scale = min(d, temperature) / d
                pos[n] = (pos[n][0] + dx * scale, pos[n][1] + dy * scale)


def _normalize(nodes: list[str], pos: dict[str, tuple[float, float]]) -> dict[str, tuple[float, float]]:
    xs = [pos[n][0] for n in nodes]
    ys = [pos[n][1] for n in nodes]
    min_x, max_x = min(xs), max(xs)
    min_y, max_y = min(ys), max(ys)
    span_x = max_x - min_x
    span_y = max_y - min_y

    def norm(v: float, lo: float, span: float) -> float:
        if span < 1e-12:
            return 0.5
        return (v - lo) / span

    return {n: (norm(pos[n][0], min_x, span_x), norm(pos[n][1], min_y, span_y)) for n in nodes}


def _separate(nodes: list[str], pos: dict[str, tuple[float, float]]) -> None:
    """Push nodes apart until every pair is at least MIN_SEPARATION apart,
    falling back to a deterministic grid if pushing cannot converge."""
    if len(nodes) < 2:
        return
    for _ in range(400):
        moved = False
        for i, a in enumerate(nodes):
            for b in nodes[i + 1 :]:
                ax, ay = pos[a]
                bx, by = pos[b]
                dx, dy = ax - bx, ay - by
                d = math.sqrt(dx * dx + dy * dy)
                if d >= MIN_SEPARATION:
                    continue
                moved = True
                if d < 1e-12:
                    dx, dy, d = 1.0, 0.5, math.sqrt(1.25)
                push = (MIN_SEPARATION - d) / 2 + 1e-6
                ux, uy = dx / d, dy / d
                pos[a] = (min(1.0, max(0.0, ax + ux * push)), min(1.0, max(0.0, ay + uy * push)))
                pos[b] = (min(1.0, max(0.0, bx - ux * push)), min(1.0, max(0.0, by - uy * push)))
        if not moved:
            return
    # Grid fallback: guaranteed separation for any plausible node count.
    k = math.ceil(math.sqrt(len(nodes)))
    step = 1.0 / max(k - 1, 1)
    for idx, n in enumerate(nodes):
        pos[n] = ((idx % k) * step, (idx // k) * step)
