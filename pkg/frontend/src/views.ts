import type { DocumentRecord, SdgEntry, SearchResult } from './api';
import type { ChatMessage } from './state';

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className?: string,
    text?: string,
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.innerText = text;
    return node;
}

export function renderNotice(message: string): HTMLElement {
    return el('div', 'notice', message);
}

export function renderSearchForm(onSubmit: (text: string) => void): HTMLElement {
    const form = el('form', 'search-form');
    const input = el('input');
    input.type = 'search';
    input.placeholder = 'Search models and papers';
    input.name = 'q';
    const button = el('button', undefined, 'Search');
    button.type = 'submit';
    form.append(input, button);
    form.addEventListener('submit', (ev) => {
        ev.preventDefault();
        onSubmit(input.value);
    });
    return form;
}

export function renderSdgGrid(entries: SdgEntry[], onSelect: (goal: number) => void): HTMLElement {
    const grid = el('div', 'sdg-grid');
    for (const entry of entries) {
        const tile = el('button', 'sdg-tile');
        tile.type = 'button';
        tile.dataset.goal = String(entry.goal);
        tile.append(
            el('span', 'sdg-goal', String(entry.goal)),
            el('span', 'sdg-title', entry.title),
            el('span', 'sdg-count', String(entry.document_count)),
        );
        tile.addEventListener('click', () => onSelect(entry.goal));
        grid.append(tile);
    }
    return grid;
}

export function renderResults(
    results: SearchResult[],
    docs: Map<string, Pick<DocumentRecord, 'has_cld' | 'has_sfd'>>,
    onSelect: (id: string) => void,
): HTMLElement {
    const list = el('ul', 'results');
    // Diagram-bearing documents come first, then by the server's ranking.
    const ordered = [...results].sort((a, b) => {
        const aHas = docs.get(a.id)?.has_cld || docs.get(a.id)?.has_sfd ? 1 : 0;
        const bHas = docs.get(b.id)?.has_cld || docs.get(b.id)?.has_sfd ? 1 : 0;
        if (aHas !== bHas) return bHas - aHas;
        return results.indexOf(a) - results.indexOf(b);
    });
    for (const result of ordered) {
        const item = el('li', 'result');
        item.dataset.docId = result.id;
        const title = el('a', 'result-title', result.title);
        title.href = '#';
        title.addEventListener('click', (ev) => {
            ev.preventDefault();
            onSelect(result.id);
        });
        const score = el('span', 'result-score', result.score.toFixed(3));
        item.append(title, score);
        list.append(item);
    }
    return list;
}

export function renderLoopList(
    loops: { id: string; type: string }[],
    highlighted: string | null,
    onToggle: (id: string) => void,
): HTMLElement {
    const list = el('ul', 'loops');
    for (const loop of loops) {
        const item = el('li', `loop loop-${loop.type}`);
        if (loop.id === highlighted) item.classList.add('active');
        const button = el('button', undefined, `${loop.id} (${loop.type})`);
        button.type = 'button';
        button.dataset.loopId = loop.id;
        button.addEventListener('click', () => onToggle(loop.id));
        item.append(button);
        list.append(item);
    }
    const legend = el('li', 'legend', 'R = reinforcing, B = balancing');
    list.append(legend);
    return list;
}

export function renderMetadataCard(doc: DocumentRecord): HTMLElement {
    const card = el('div', 'doc-card');
    card.append(el('h2', undefined, doc.title));
    if (doc.year !== null) card.append(el('div', 'doc-year', String(doc.year)));
    if (doc.abstract) card.append(el('p', 'doc-abstract', doc.abstract));
    if (doc.authors.length) card.append(el('div', 'doc-authors', doc.authors.join(', ')));
    if (doc.sdg_labels.length) {
        card.append(el('div', 'doc-sdgs', doc.sdg_labels.map((l) => `SDG ${l.goal}`).join(' ')));
    }
    return card;
}

export function renderTranscript(messages: ChatMessage[]): HTMLElement {
    const log = el('div', 'transcript');
    for (const message of messages) {
        const row = el('div', `message message-${message.role}`, message.text);
        if (message.intent) row.dataset.intent = message.intent;
        log.append(row);
    }
    return log;
}
