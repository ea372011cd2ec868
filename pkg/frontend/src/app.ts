/**
 * Chat controller: one live clarification session per page.
 *
 * Rendering rules: the transcript mirrors server event order, chips/cards
 * are exactly the server payload, and at most one pending-choice widget is
 * active at a time (older widgets are disabled when a new one renders).
 */

import { ApiError, ServiceClient } from './api.js';
import { createIntentCards } from './components/intentCards.js';
import { createLabelChips, NONE_OF_THE_ABOVE } from './components/labelChips.js';
import { createMessageBubble } from './components/messageBubble.js';
import { createMetricsPanel, type MetricsPanel } from './components/metricsPanel.js';
import { createElement } from './dom.js';
import { SessionStateMachine } from './state.js';
import type { IntentCard, LabelChip } from './types.js';

export interface ChatAppOptions {
  pollIntervalMs?: number;
}

export class ChatApp {
  readonly machine = new SessionStateMachine();
  private transcript!: HTMLDivElement;
  private input!: HTMLInputElement;
  private sendButton!: HTMLButtonElement;
  private metricsPanel!: MetricsPanel;
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ServiceClient,
    private readonly options: ChatAppOptions = {},
  ) {
    this.render();
    const interval = options.pollIntervalMs ?? 5000;
    if (interval > 0) {
      this.pollTimer = setInterval(() => void this.refreshMetrics(), interval);
    }
    void this.refreshMetrics();
  }

  dispose(): void {
    if (this.pollTimer !== null) clearInterval(this.pollTimer);
  }

  private render(): void {
    this.metricsPanel = createMetricsPanel();
    this.transcript = createElement('div', { class: 'chat-transcript', 'data-role': 'transcript' });
    this.input = createElement('input', {
      class: 'chat-input',
      type: 'text',
      placeholder: 'Ask an ambiguous question...',
    });
    this.sendButton = createElement('button', { class: 'chat-send', type: 'button' }, ['Send']);
    this.sendButton.disabled = true;

    this.input.addEventListener('input', () => this.syncSendButton());
    this.input.addEventListener('keydown', (event) => {
      if (event.key === 'Enter' && !this.sendButton.disabled) void this.send();
    });
    this.sendButton.addEventListener('click', () => void this.send());

    const composer = createElement('div', { class: 'chat-composer' }, [this.input, this.sendButton]);
    this.root.replaceChildren(this.metricsPanel.element, this.transcript, composer);
  }

  private syncSendButton(): void {
    const ready = this.machine.mode === 'idle' && !this.machine.busy;
    this.sendButton.disabled = !ready || !this.input.value.trim();
  }

  private append(node: Node): void {
    this.transcript.appendChild(node);
  }

  private appendError(message: string, retry: () => void): void {
    const bubble = createMessageBubble(`Something went wrong: ${message}`, 'system');
    bubble.classList.add('chat-msg--error');
    const button = createElement('button', { class: 'chat-retry', type: 'button' }, ['Retry']);
    button.addEventListener('click', () => {
      button.disabled = true;
      retry();
    });
    bubble.appendChild(button);
    this.append(bubble);
  }

  async send(): Promise<void> {
    const text = this.input.value.trim();
    this.machine.beginQuestion(text);
    this.append(createMessageBubble(text, 'user'));
    this.input.value = '';
    this.syncSendButton();
    try {
      const session = await this.client.startSession(text);
      this.machine.labelsShown(session.session_id, session.labels.map((l) => l.id));
      this.showLabels(session.labels, session.none_option);
    } catch (error) {
      this.machine.requestFailed();
      this.machine.reset();
      this.appendError(describe(error), () => {
        this.input.value = text;
        this.syncSendButton();
        void this.send();
      });
    }
    this.syncSendButton();
  }

  private showLabels(labels: LabelChip[], noneOption: boolean): void {
    this.append(createMessageBubble('Did you mean one of these?', 'agent'));
    this.append(createLabelChips(labels, noneOption, (labelId) => void this.pickLabel(labelId)));
  }

  async pickLabel(labelId: number | null): Promise<void> {
    this.machine.beginLabelPick(labelId);
    const phrase =
      labelId === null
        ? NONE_OF_THE_ABOVE
        : this.transcriptLabelPhrase(labelId);
    this.append(createMessageBubble(phrase, 'user'));
    try {
      const response = await this.client.selectLabel(this.machine.sessionId!, labelId);
      this.machine.intentsShown(response.intents.map((i) => i.id));
      this.showIntents(response.intents);
    } catch (error) {
      this.machine.requestFailed();
      if (error instanceof ApiError && (error.status === 404 || error.status === 409)) {
        this.machine.reset();
        this.appendError('this session is stale; please ask again', () => undefined);
      } else {
        this.appendError(describe(error), () => void this.pickLabel(labelId));
      }
    }
    this.syncSendButton();
  }

  private transcriptLabelPhrase(labelId: number): string {
    for (const btn of this.transcript.querySelectorAll<HTMLButtonElement>('.chat-chip--selected')) {
      return btn.textContent ?? `label ${labelId}`;
    }
    return `label ${labelId}`;
  }

  private showIntents(intents: IntentCard[]): void {
    this.append(createMessageBubble('Here is what I found:', 'agent'));
    this.append(createIntentCards(intents, (choice) => void this.pickIntent(choice)));
  }

  async pickIntent(choice: number | 'transfer'): Promise<void> {
    this.machine.beginIntentPick(choice);
    try {
      const response = await this.client.resolve(this.machine.sessionId!, choice);
      this.machine.resolved();
      const message =
        response.status === 'transferred'
          ? 'Transferred to a human agent.'
          : 'Resolved - glad that helped!';
      const bubble = createMessageBubble(message, 'system');
      bubble.setAttribute('data-outcome', response.status);
      this.append(bubble);
      await this.refreshMetrics();
    } catch (error) {
      this.machine.requestFailed();
      this.appendError(describe(error), () => void this.pickIntent(choice));
    }
    this.syncSendButton();
  }

  async refreshMetrics(): Promise<void> {
    try {
      this.metricsPanel.update(await this.client.metrics());
    } catch {
      // panel keeps the last value; polling will retry
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.status}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}
