/**
 * The 6 label chips plus the none-of-the-above option.
 *
 * All buttons disable on the first click, so a double click cannot fire a
 * second request; the picked chip keeps a highlight.
 */

import { createElement } from '../dom.js';
import type { LabelChip } from '../types.js';

export const NONE_OF_THE_ABOVE = 'None of the above';

export function createLabelChips(
  labels: LabelChip[],
  noneOption: boolean,
  onPick: (labelId: number | null) => void,
): HTMLDivElement {
  const container = createElement('div', { class: 'chat-chips', 'data-widget': 'labels' });

  const add = (text: string, labelId: number | null) => {
    const btn = createElement('button', { class: 'chat-chip', type: 'button' });
    btn.textContent = text;
    btn.addEventListener('click', () => {
      if (btn.disabled) return;
      for (const b of container.querySelectorAll<HTMLButtonElement>('.chat-chip')) {
        b.disabled = true;
        if (b !== btn) b.classList.add('chat-chip--faded');
      }
      btn.classList.add('chat-chip--selected');
      onPick(labelId);
    });
    container.appendChild(btn);
  };

  for (const label of labels) {
    add(label.phrase, label.id);
  }
  if (noneOption) {
    add(NONE_OF_THE_ABOVE, null);
  }
  return container;
}
