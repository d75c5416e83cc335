import { defineConfig } from 'vitest/config';

export default defineConfig({
    test: {
        environment: 'happy-dom',
        environmentOptions: {
            // Same origin as the backend started in tests/server.ts, so the
            // simulated browser's same-origin policy lets fetch through.
            happyDOM: { url: 'http://127.0.0.1:8931' },
        },
        globalSetup: ['tests/server.ts'],
        testTimeout: 30000,
        hookTimeout: 60000,
    },
});
