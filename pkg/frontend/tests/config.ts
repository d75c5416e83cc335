export const TEST_PORT = 8931;
export const API_BASE = `http://127.0.0.1:${TEST_PORT}/api/v1`;
