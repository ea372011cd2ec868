/** Payload shapes of the clarification service API (consumed verbatim). */

export interface LabelChip {
  id: number;
  phrase: string;
}

export interface IntentCard {
  id: number;
  text: string;
  answer: string;
}

export interface SessionResponse {
  session_id: string;
  labels: LabelChip[];
  none_option: boolean;
}

export interface IntentsResponse {
  intents: IntentCard[];
}

export interface ResolveResponse {
  status: string;
}

export interface Metrics {
  t: number;
  c: number;
  ctr: number | null;
  n: number;
  m: number;
  tha: number;
}
