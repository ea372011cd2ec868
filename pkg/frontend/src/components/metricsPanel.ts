/** Live CTR / THA panel fed by the /v1/metrics endpoint. */

import { createElement } from '../dom.js';
import type { Metrics } from '../types.js';

export interface MetricsPanel {
  element: HTMLDivElement;
  update(metrics: Metrics): void;
}

function percent(value: number | null): string {
  return value === null ? '-' : `${(100 * value).toFixed(1)}%`;
}

export function createMetricsPanel(): MetricsPanel {
  const ctr = createElement('span', { class: 'metrics-value', 'data-metric': 'ctr' }, ['-']);
  const tha = createElement('span', { class: 'metrics-value', 'data-metric': 'tha' }, ['-']);
  const sessions = createElement('span', { class: 'metrics-value', 'data-metric': 'sessions' }, ['0']);
  const element = createElement('div', { class: 'metrics-panel' }, [
    createElement('span', { class: 'metrics-item' }, ['CTR ', ctr]),
    createElement('span', { class: 'metrics-item' }, ['THA ', tha]),
    createElement('span', { class: 'metrics-item' }, ['sessions ', sessions]),
  ]);
  return {
    element,
    update(metrics: Metrics) {
      ctr.textContent = percent(metrics.ctr);
      tha.textContent = percent(metrics.tha);
      sessions.textContent = String(metrics.n);
    },
  };
}
