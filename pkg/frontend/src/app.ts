import { ApiClient, ApiError } from './api';
import type { DocumentRecord } from './api';
import { renderDiagram } from './diagram';
import {
    appendMessage,
    initialState,
    selectDocument,
    setDraft,
    toggleLoop,
    type ExplorerState,
} from './state';
import {
    renderLoopList,
    renderMetadataCard,
    renderNotice,
    renderResults,
    renderSdgGrid,
    renderSearchForm,
    renderTranscript,
} from './views';

/** Wires the three panels (landing, explorer, co-pilot) against the HTTP
 * API. All methods are async and idempotent per input so tests can drive
 * the app without a browser event loop. */
export class App {
    api: ApiClient;
    state: ExplorerState;
    root: HTMLElement;

    private landing: HTMLElement;
    private drawer: HTMLElement;
    private canvas: HTMLElement;
    private copilot: HTMLElement;
    private docCache = new Map<string, DocumentRecord>();

    constructor(root: HTMLElement, api?: ApiClient) {
        this.api = api ?? new ApiClient();
        this.state = initialState();
        this.root = root;
        this.landing = document.createElement('section');
        this.landing.className = 'panel landing';
        this.drawer = document.createElement('section');
        this.drawer.className = 'panel drawer';
        this.canvas = document.createElement('section');
        this.canvas.className = 'panel canvas';
        this.copilot = document.createElement('section');
        this.copilot.className = 'panel copilot';
        root.replaceChildren(this.landing, this.drawer, this.canvas, this.copilot);
    }

    async start(): Promise<void> {
        this.landing.replaceChildren(renderSearchForm((text) => void this.search(text)));
        try {
            const sdgs = await this.api.sdgs();
            this.landing.append(renderSdgGrid(sdgs, (goal) => void this.browseSdg(goal)));
        } catch (err) {
            this.landing.append(renderNotice(describeError(err)));
        }
        this.renderCopilot();
    }

    async search(text: string): Promise<void> {
        this.state = { ...this.state, query: text, selectedSdg: null };
        await this.runQuery({ text, limit: 50 });
    }

    async browseSdg(goal: number): Promise<void> {
        this.state = { ...this.state, selectedSdg: goal, query: '' };
        await this.runQuery({ sdg: goal, limit: 50 });
    }

    private async runQuery(query: { text?: string; sdg?: number; limit: number }): Promise<void> {
        let results;
        try {
            results = await this.api.search(query);
        } catch (err) {
            this.drawer.replaceChildren(renderNotice(describeError(err)));
            return;
        }
        const docs = new Map<string, DocumentRecord>();
        for (const result of results) {
            const cached = this.docCache.get(result.id);
            if (cached) docs.set(result.id, cached);
        }
        this.drawer.replaceChildren(renderResults(results, docs, (id) => void this.select(id)));
    }

    async select(docId: string): Promise<void> {
        let doc: DocumentRecord;
        try {
            doc = await this.api.document(docId);
            this.docCache.set(docId, doc);
        } catch (err) {
            this.canvas.replaceChildren(renderNotice(describeError(err)));
            return;
        }
        try {
            const analysis = await this.api.analysis(docId);
            this.state = selectDocument(this.state, docId, analysis);
            this.renderCanvas(doc);
        } catch (err) {
            // A metadata-only paper has no derivable structure; show the
            // card without a canvas instead of an error.
            if (err instanceof ApiError && err.code === 'no_model') {
                this.state = selectDocument(this.state, docId, null);
                this.canvas.replaceChildren(renderMetadataCard(doc));
            } else {
                this.canvas.replaceChildren(renderNotice(describeError(err)));
            }
        }
        this.renderCopilot();
    }

    clickLoop(loopId: string): void {
        this.state = toggleLoop(this.state, loopId);
        const doc = this.state.selectedDocId ? this.docCache.get(this.state.selectedDocId) : undefined;
        if (doc) this.renderCanvas(doc);
    }

    private renderCanvas(doc: DocumentRecord): void {
        const analysis = this.state.analysis;
        if (!analysis) {
            this.canvas.replaceChildren(renderMetadataCard(doc));
            return;
        }
        this.canvas.replaceChildren(
            renderMetadataCard(doc),
            renderDiagram(analysis, { highlightedLoop: this.state.highlightedLoop }),
            renderLoopList(analysis.loops, this.state.highlightedLoop, (id) => this.clickLoop(id)),
        );
    }

    async ask(question: string): Promise<void> {
        const docId = this.state.selectedDocId;
        if (!docId) {
            this.state = appendMessage(this.state, { role: 'notice', text: 'Select a document first.' });
            this.renderCopilot();
            return;
        }
        this.state = appendMessage(this.state, { role: 'user', text: question });
        try {
            const reply = await this.api.copilot(docId, question);
            this.state = appendMessage(this.state, { role: 'copilot', text: reply.text, intent: reply.intent });
        } catch (err) {
            this.state = appendMessage(this.state, { role: 'notice', text: describeError(err) });
        }
        this.renderCopilot();
    }

    async compose(text: string): Promise<void> {
        this.state = appendMessage(this.state, { role: 'user', text });
        try {
            const result = await this.api.compose({
                text,
                base: this.state.draft ?? undefined,
            });
            this.state = setDraft(this.state, result.diagram);
            this.state = appendMessage(this.state, { role: 'copilot', text: result.narrative, intent: 'compose' });
            if (result.unparsed.length) {
                this.state = appendMessage(this.state, {
                    role: 'notice',
                    text: `Not understood: ${result.unparsed.join('; ')}`,
                });
            }
            this.canvas.replaceChildren(
                renderDiagram(
                    { diagram: result.diagram, loops: result.loops, layout: result.layout },
                    { highlightedLoop: null },
                ),
                renderLoopList(result.loops, null, () => undefined),
            );
        } catch (err) {
            this.state = appendMessage(this.state, { role: 'notice', text: describeError(err) });
        }
        this.renderCopilot();
    }

    private renderCopilot(): void {
        const form = document.createElement('form');
        form.className = 'copilot-form';
        const input = document.createElement('input');
        input.name = 'question';
        input.placeholder = 'Ask about this model, or compose one';
        const mode = document.createElement('select');
        for (const value of ['chat', 'compose']) {
            const option = document.createElement('option');
            option.value = value;
            option.innerText = value;
            mode.append(option);
        }
        const submit = document.createElement('button');
        submit.type = 'submit';
        submit.innerText = 'Send';
        form.append(mode, input, submit);
        form.addEventListener('submit', (ev) => {
            ev.preventDefault();
            const text = input.value.trim();
            if (!text) return;
            input.value = '';
            if (mode.value === 'compose') void this.compose(text);
            else void this.ask(text);
        });
        this.copilot.replaceChildren(renderTranscript(this.state.transcript), form);
    }
}

function describeError(err: unknown): string {
    if (err instanceof ApiError) return `${err.code}: ${err.message}`;
    return err instanceof Error ? err.message : String(err);
}
