import { describe, expect, it } from 'vitest';

import type { AnalysisPayload } from '../src/api';
import { renderDiagram } from '../src/diagram';

const population: AnalysisPayload = {
    diagram: {
        variables: [
            { name: 'population', display_name: 'Population', kind: 'stock' },
            { name: 'births', display_name: 'Births', kind: 'flow' },
            { name: 'deaths', display_name: 'Deaths', kind: 'flow' },
            { name: 'birth_rate', display_name: 'birth_rate', kind: 'constant' },
            { name: 'lifetime', display_name: 'lifetime', kind: 'constant' },
        ],
        links: [
            { from: 'birth_rate', to: 'births', polarity: '+' },
            { from: 'births', to: 'population', polarity: '+' },
            { from: 'deaths', to: 'population', polarity: '-' },
            { from: 'lifetime', to: 'deaths', polarity: '-' },
            { from: 'population', to: 'births', polarity: '+' },
            { from: 'population', to: 'deaths', polarity: '+' },
        ],
        loops: [
            { id: 'R1', variables: ['births', 'population'], type: 'reinforcing' },
            { id: 'B1', variables: ['deaths', 'population'], type: 'balancing' },
        ],
    },
    loops: [
        { id: 'R1', variables: ['births', 'population'], type: 'reinforcing' },
        { id: 'B1', variables: ['deaths', 'population'], type: 'balancing' },
    ],
    layout: {
        positions: {
            population: [0.5, 0.5],
            births: [0.2, 0.3],
            deaths: [0.8, 0.3],
            birth_rate: [0.1, 0.8],
            lifetime: [0.9, 0.8],
        },
        seed: 12,
    },
};

describe('renderDiagram', () => {
    it('renders one node per variable and one edge per link', () => {
        const svg = renderDiagram(population);
        expect(svg.querySelectorAll('.node').length).toBe(5);
        expect(svg.querySelectorAll('.edge').length).toBe(6);
    });

    it('marks edge polarities', () => {
        const svg = renderDiagram(population);
        const glyphs = Array.from(svg.querySelectorAll('.polarity')).map((t) => t.textContent);
        expect(glyphs.filter((g) => g === '+').length).toBe(4);
        expect(glyphs.filter((g) => g === '−').length).toBe(2);
    });

    it('highlights exactly the edges of the chosen loop', () => {
        const svg = renderDiagram(population, { highlightedLoop: 'B1' });
        const highlighted = Array.from(svg.querySelectorAll('.edge.highlighted')) as SVGGElement[];
        expect(highlighted.length).toBe(2);
        const pairs = highlighted.map((g) => `${g.dataset.from}->${g.dataset.to}`).sort();
        expect(pairs).toEqual(['deaths->population', 'population->deaths']);
    });

    it('applies only affine scaling to server positions', () => {
        const svg = renderDiagram(population, { width: 100, height: 100, margin: 0 });
        const node = svg.querySelector('.node[data-name="population"] circle')!;
        expect(node.getAttribute('cx')).toBe('50');
        expect(node.getAttribute('cy')).toBe('50');
    });

    it('is deterministic for the same payload', () => {
        const a = renderDiagram(population, { highlightedLoop: 'R1' });
        const b = renderDiagram(population, { highlightedLoop: 'R1' });
        expect(a.outerHTML).toBe(b.outerHTML);
    });

    it('renders self-loops without throwing', () => {
        const payload: AnalysisPayload = {
            diagram: {
                variables: [{ name: 'x', display_name: 'X' }],
                links: [{ from: 'x', to: 'x', polarity: '-' }],
                loops: [{ id: 'B1', variables: ['x'], type: 'balancing' }],
            },
            loops: [{ id: 'B1', variables: ['x'], type: 'balancing' }],
            layout: { positions: { x: [0.5, 0.5] }, seed: 1 },
        };
        const svg = renderDiagram(payload, { highlightedLoop: 'B1' });
        expect(svg.querySelectorAll('.edge.highlighted').length).toBe(1);
    });
});
