export type Polarity = '+' | '-' | '?';

export type DiagramVariable = {
    name: string;
    display_name: string;
    kind?: string | null;
};

export type DiagramLink = {
    from: string;
    to: string;
    polarity: Polarity;
};

export type DiagramLoop = {
    id: string;
    variables: string[];
    type: 'reinforcing' | 'balancing' | 'undetermined';
};

export type Diagram = {
    variables: DiagramVariable[];
    links: DiagramLink[];
    loops: DiagramLoop[];
};

export type AnalysisPayload = {
    diagram: Diagram;
    loops: DiagramLoop[];
    layout: {
        positions: Record<string, [number, number]>;
        seed: number;
    };
};

export type SearchResult = {
    id: string;
    title: string;
    score: number;
    keyword_score: number;
    vector_score: number;
    matched_fields: string[];
};

export type SdgEntry = {
    goal: number;
    title: string;
    document_count: number;
};

export type DocumentRecord = {
    id: string;
    title: string;
    abstract: string;
    authors: string[];
    year: number | null;
    doi: string | null;
    diagram: Diagram | null;
    sdg_labels: { goal: number; target: string | null; confidence: number }[];
    topics: string[];
    has_cld: boolean;
    has_sfd: boolean;
    loop_count: number;
};

export type CopilotReply = {
    text: string;
    facts_used: string[];
    intent: string;
};

export type ComposeResult = {
    diagram: Diagram;
    loops: DiagramLoop[];
    layout: AnalysisPayload['layout'];
    narrative: string;
    unparsed: string[];
};

export class ApiError extends Error {
    code: string;
    status: number;

    constructor(status: number, code: string, message: string) {
        super(message);
        this.status = status;
        this.code = code;
    }
}

async function parseError(resp: Response): Promise<ApiError> {
    let code = 'unknown';
    let message = `HTTP ${resp.status}`;
    try {
        const body = await resp.json();
        if (typeof body.code === 'string') code = body.code;
        if (typeof body.message === 'string') message = body.message;
    } catch {
        // non-JSON error body; keep the defaults
    }
    return new ApiError(resp.status, code, message);
}

export class ApiClient {
    base: string;

    constructor(base = '/api/v1') {
        this.base = base.replace(/\/$/, '');
    }

    private async get<T>(path: string): Promise<T> {
        const resp = await fetch(this.base + path);
        if (!resp.ok) throw await parseError(resp);
        return resp.json();
    }

    private async post<T>(path: string, body: unknown): Promise<T> {
        const resp = await fetch(this.base + path, {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify(body),
        });
        if (!resp.ok) throw await parseError(resp);
        return resp.json();
    }

    search(query: { text?: string; sdg?: number; topic?: string; require_diagram?: boolean; limit?: number }) {
        return this.post<SearchResult[]>('/search', query);
    }

    sdgs() {
        return this.get<SdgEntry[]>('/sdgs');
    }

    document(id: string, view?: 'summary' | 'full') {
        const suffix = view ? `?view=${view}` : '';
        return this.get<DocumentRecord>(`/documents/${encodeURIComponent(id)}${suffix}`);
    }

    analysis(id: string) {
        return this.get<AnalysisPayload>(`/documents/${encodeURIComponent(id)}/analysis`);
    }

    copilot(id: string, question: string) {
        return this.post<CopilotReply>(`/documents/${encodeURIComponent(id)}/copilot`, { question });
    }

    compose(body: { text?: string; edits?: unknown[]; base?: Diagram }) {
        return this.post<ComposeResult>('/compose', body);
    }
}
