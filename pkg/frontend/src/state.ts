import type { AnalysisPayload, Diagram } from './api';

export type ChatMessage = {
    role: 'user' | 'copilot' | 'notice';
    text: string;
    intent?: string;
};

export type ExplorerState = {
    query: string;
    selectedSdg: number | null;
    selectedDocId: string | null;
    analysis: AnalysisPayload | null;
    highlightedLoop: string | null;
    transcript: ChatMessage[];
    draft: Diagram | null;
};

export function initialState(): ExplorerState {
    return {
        query: '',
        selectedSdg: null,
        selectedDocId: null,
        analysis: null,
        highlightedLoop: null,
        transcript: [],
        draft: null,
    };
}

export function selectDocument(state: ExplorerState, docId: string, analysis: AnalysisPayload | null): ExplorerState {
    return {
        ...state,
        selectedDocId: docId,
        analysis,
        highlightedLoop: null,
        transcript: [],
    };
}

/** Highlight a loop; ids outside the loaded analysis are ignored so the
 * highlight can never point at a loop that is not on screen. Clicking the
 * already-highlighted loop clears it. */
export function toggleLoop(state: ExplorerState, loopId: string): ExplorerState {
    const known = state.analysis?.loops.some((lp) => lp.id === loopId) ?? false;
    if (!known) return state;
    return {
        ...state,
        highlightedLoop: state.highlightedLoop === loopId ? null : loopId,
    };
}

export function appendMessage(state: ExplorerState, message: ChatMessage): ExplorerState {
    return { ...state, transcript: [...state.transcript, message] };
}

export function setDraft(state: ExplorerState, draft: Diagram | null): ExplorerState {
    return { ...state, draft };
}

/** The directed edges that make up a loop, as "from->to" keys. */
export function loopEdgeKeys(variables: string[]): Set<string> {
    const keys = new Set<string>();
    for (let i = 0; i < variables.length; i++) {
        keys.add(`${variables[i]}->${variables[(i + 1) % variables.length]}`);
    }
    return keys;
}
