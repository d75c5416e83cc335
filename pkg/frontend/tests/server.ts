// Global test setup: ingest the golden model corpus into a temporary
// snapshot and serve it over HTTP so the end-to-end suite talks to the
// real backend.
import { spawn, spawnSync, type ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { dirname, join, resolve } from 'node:path';
import { fileURLToPath } from 'node:url';

import { API_BASE, TEST_PORT } from './config';

let server: ChildProcess | null = null;
let workdir: string | null = null;

export default async function setup(): Promise<() => void> {
    const here = dirname(fileURLToPath(import.meta.url));
    const repoRoot = resolve(here, '..', '..');
    const golden = join(repoRoot, 'tests', 'golden');
    workdir = mkdtempSync(join(tmpdir(), 'sdatlas-e2e-'));
    const snapshot = join(workdir, 'snapshot');

    const ingest = spawnSync('python3', ['-m', 'sdatlas.cli', 'ingest', golden, '--out', snapshot], {
        cwd: repoRoot,
        encoding: 'utf-8',
    });
    if (ingest.status !== 0) {
        throw new Error(`ingest failed (${ingest.status}): ${ingest.stderr || ingest.stdout}`);
    }

    server = spawn(
        'python3',
        ['-m', 'sdatlas.cli', 'serve', '--snapshot', snapshot, '--port', String(TEST_PORT)],
        { cwd: repoRoot, stdio: ['ignore', 'pipe', 'pipe'] },
    );

    const deadline = Date.now() + 30000;
    for (;;) {
        try {
            const resp = await fetch(`${API_BASE}/sdgs`);
            if (resp.ok) break;
        } catch {
            // not up yet
        }
        if (Date.now() > deadline) {
            server.kill('SIGTERM');
            throw new Error('backend did not become ready within 30s');
        }
        await new Promise((r) => setTimeout(r, 200));
    }

    return () => {
        if (server) server.kill('SIGTERM');
        if (workdir) rmSync(workdir, { recursive: true, force: true });
    };
}
