/**
 * Client-side mirror of the server session state machine.
 *
 *   idle -> awaiting-label -> awaiting-intent -> idle
 *
 * Every API call is guarded by an assert on this machine, so a request that
 * is illegal for the current session state cannot be issued: the guard
 * throws before fetch runs.  `busy` blocks double submission while a request
 * is in flight.
 */

export type Mode = 'idle' | 'awaiting-label' | 'awaiting-intent';

export class IllegalStateError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'IllegalStateError';
  }
}

export class SessionStateMachine {
  mode: Mode = 'idle';
  busy = false;
  sessionId: string | null = null;
  shownLabels: number[] = [];
  shownIntents: number[] = [];

  private expect(mode: Mode, action: string): void {
    if (this.mode !== mode) {
      throw new IllegalStateError(`${action} requires mode ${mode}, but mode is ${this.mode}`);
    }
    if (this.busy) {
      throw new IllegalStateError(`${action} while a request is in flight`);
    }
  }

  /** Guard for POST /v1/session. */
  beginQuestion(text: string): void {
    this.expect('idle', 'sending a question');
    if (!text.trim()) {
      throw new IllegalStateError('question text is empty');
    }
    this.busy = true;
  }

  labelsShown(sessionId: string, labelIds: number[]): void {
    this.busy = false;
    this.sessionId = sessionId;
    this.shownLabels = [...labelIds];
    this.mode = 'awaiting-label';
  }

  /** Guard for POST /v1/session/{id}/label. */
  beginLabelPick(labelId: number | null): void {
    this.expect('awaiting-label', 'picking a label');
    if (labelId !== null && !this.shownLabels.includes(labelId)) {
      throw new IllegalStateError(`label ${labelId} was not among the shown chips`);
    }
    this.busy = true;
  }

  intentsShown(intentIds: number[]): void {
    this.busy = false;
    this.shownIntents = [...intentIds];
    this.mode = 'awaiting-intent';
  }

  /** Guard for POST /v1/session/{id}/resolve. */
  beginIntentPick(choice: number | 'transfer'): void {
    this.expect('awaiting-intent', 'resolving');
    if (choice !== 'transfer' && !this.shownIntents.includes(choice)) {
      throw new IllegalStateError(`intent ${choice} was not among the shown cards`);
    }
    this.busy = true;
  }

  resolved(): void {
    this.busy = false;
    this.mode = 'idle';
    this.sessionId = null;
    this.shownLabels = [];
    this.shownIntents = [];
  }

  /** Recover from a failed request without losing the session stage. */
  requestFailed(): void {
    this.busy = false;
  }

  /** Abandon the session entirely (e.g. the server no longer knows it). */
  reset(): void {
    this.busy = false;
    this.resolved();
  }
}
