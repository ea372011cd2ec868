/**
 * Transcript bubbles: user (right), agent (left), system (center).
 * Content is set via textContent, never innerHTML.
 */

import { createElement } from '../dom.js';

export type BubbleVariant = 'user' | 'agent' | 'system';

export function createMessageBubble(content: string, variant: BubbleVariant): HTMLDivElement {
  const bubble = createElement('div', { class: `chat-msg chat-msg--${variant}` });
  const text = createElement('div', { class: 'chat-msg-text' });
  text.textContent = content;
  bubble.appendChild(text);
  return bubble;
}
