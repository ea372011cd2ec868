/** Intent cards with answer previews, plus the transfer-to-agent option. */

import { createElement } from '../dom.js';
import type { IntentCard } from '../types.js';

export const TRANSFER_TEXT = 'Talk to a human agent';

export function createIntentCards(
  intents: IntentCard[],
  onPick: (choice: number | 'transfer') => void,
): HTMLDivElement {
  const container = createElement('div', { class: 'chat-cards', 'data-widget': 'intents' });

  const disableAll = (picked: HTMLButtonElement) => {
    for (const b of container.querySelectorAll<HTMLButtonElement>('button')) {
      b.disabled = true;
      if (b !== picked) b.classList.add('chat-card--faded');
    }
    picked.classList.add('chat-card--selected');
  };

  for (const intent of intents) {
    const card = createElement('button', { class: 'chat-card', type: 'button' });
    const title = createElement('div', { class: 'chat-card-title' });
    title.textContent = intent.text;
    const preview = createElement('div', { class: 'chat-card-preview' });
    preview.textContent = intent.answer;
    card.append(title, preview);
    card.addEventListener('click', () => {
      if (card.disabled) return;
      disableAll(card);
      onPick(intent.id);
    });
    container.appendChild(card);
  }

  const transfer = createElement('button', { class: 'chat-card chat-card--transfer', type: 'button' });
  transfer.textContent = TRANSFER_TEXT;
  transfer.addEventListener('click', () => {
    if (transfer.disabled) return;
    disableAll(transfer);
    onPick('transfer');
  });
  container.appendChild(transfer);
  return container;
}
