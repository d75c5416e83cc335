import { ApiClient } from './api';
import { App } from './app';

declare global {
    interface Window {
        SDATLAS_API_BASE?: string;
    }
}

const root = document.getElementById('app');
if (root) {
    const app = new App(root, new ApiClient(window.SDATLAS_API_BASE ?? '/api/v1'));
    void app.start();
}
