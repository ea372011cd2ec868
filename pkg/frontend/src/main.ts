import { ServiceClient } from './api.js';
import { ChatApp } from './app.js';

declare global {
  interface Window {
    CLARIFY_BASE_URL?: string;
  }
}

const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app mount point');
}
new ChatApp(root, new ServiceClient(window.CLARIFY_BASE_URL ?? ''));
