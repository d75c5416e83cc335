import type { AnalysisPayload, DiagramLink } from './api';
import { loopEdgeKeys } from './state';

const SVG_NS = 'http://www.w3.org/2000/svg';

export type DiagramOptions = {
    width?: number;
    height?: number;
    margin?: number;
    highlightedLoop?: string | null;
};

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
    return document.createElementNS(SVG_NS, tag);
}

function edgeKey(link: DiagramLink): string {
    return `${link.from}->${link.to}`;
}

/** Render an analysis payload as SVG. Node coordinates come straight from
 * the server layout; the client only scales them into the viewport. */
export function renderDiagram(analysis: AnalysisPayload, options: DiagramOptions = {}): SVGSVGElement {
    const width = options.width ?? 640;
    const height = options.height ?? 480;
    const margin = options.margin ?? 40;

    const scaleX = (x: number) => margin + x * (width - 2 * margin);
    const scaleY = (y: number) => margin + y * (height - 2 * margin);

    const highlighted = new Set<string>();
    if (options.highlightedLoop) {
        const loop = analysis.loops.find((lp) => lp.id === options.highlightedLoop);
        if (loop) {
            for (const key of loopEdgeKeys(loop.variables)) highlighted.add(key);
        }
    }

    const svg = svgEl('svg');
    svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
    svg.setAttribute('width', String(width));
    svg.setAttribute('height', String(height));
    svg.classList.add('diagram');

    const displayNames = new Map(analysis.diagram.variables.map((v) => [v.name, v.display_name]));

    for (const link of analysis.diagram.links) {
        const from = analysis.layout.positions[link.from];
        const to = analysis.layout.positions[link.to];
        if (!from || !to) continue;

        const group = svgEl('g');
        group.classList.add('edge');
        if (highlighted.has(edgeKey(link))) group.classList.add('highlighted');
        group.dataset.from = link.from;
        group.dataset.to = link.to;

        if (link.from === link.to) {
            const loopMark = svgEl('circle');
            loopMark.setAttribute('cx', String(scaleX(from[0]) + 14));
            loopMark.setAttribute('cy', String(scaleY(from[1]) - 14));
            loopMark.setAttribute('r', '10');
            loopMark.setAttribute('fill', 'none');
            group.append(loopMark);
        } else {
            const line = svgEl('line');
            line.setAttribute('x1', String(scaleX(from[0])));
            line.setAttribute('y1', String(scaleY(from[1])));
            line.setAttribute('x2', String(scaleX(to[0])));
            line.setAttribute('y2', String(scaleY(to[1])));
            group.append(line);
        }

        const glyph = svgEl('text');
        glyph.classList.add('polarity');
        glyph.setAttribute('x', String((scaleX(from[0]) + scaleX(to[0])) / 2 + 6));
        glyph.setAttribute('y', String((scaleY(from[1]) + scaleY(to[1])) / 2 - 6));
        glyph.textContent = link.polarity === '?' ? '?' : link.polarity === '+' ? '+' : '−';
        group.append(glyph);

        svg.append(group);
    }

    for (const variable of analysis.diagram.variables) {
        const pos = analysis.layout.positions[variable.name];
        if (!pos) continue;
        const group = svgEl('g');
        group.classList.add('node');
        if (variable.kind) group.classList.add(`kind-${variable.kind}`);
        group.dataset.name = variable.name;

        const dot = svgEl('circle');
        dot.setAttribute('cx', String(scaleX(pos[0])));
        dot.setAttribute('cy', String(scaleY(pos[1])));
        dot.setAttribute('r', '6');
        group.append(dot);

        const label = svgEl('text');
        label.setAttribute('x', String(scaleX(pos[0]) + 9));
        label.setAttribute('y', String(scaleY(pos[1]) + 4));
        label.textContent = displayNames.get(variable.name) ?? variable.name;
        group.append(label);

        svg.append(group);
    }

    return svg;
}
