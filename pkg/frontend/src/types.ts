/** Wire types mirroring the gateway HTTP payloads. */

export type Answer = "yes" | "no" | "nei";

export interface QuestionPayload {
  id: string;
  text: string;
}

export interface PolicyPayload {
  id: string;
  text: string;
  source_url: string | null;
  questions: QuestionPayload[];
  tree: string | null;
  question_count: number;
}

export interface PoliciesPayload {
  policies: PolicyPayload[];
}

export type NextPayload =
  | { question: QuestionPayload }
  | { resolved: string }
  | { abandoned: true };

export interface TranscriptEntryPayload {
  question_id: string;
  answer: string;
  timestamp: number;
}

/** Node statuses come straight from the server snapshot; the client never
 * recomputes them. */
export interface TreeNodePayload {
  kind: "question" | "not" | "and" | "or";
  value: string; // "yes" | "no" | "nei" | "unanswered"
  question_id?: string;
  children?: TreeNodePayload[];
}

export interface SessionPayload {
  session_id: string;
  policy_id: string;
  strategy: string;
  status: "in_progress" | "resolved" | "abandoned";
  resolution: string | null;
  transcript: TranscriptEntryPayload[];
  next: NextPayload;
  missing_information: string[];
  tree: TreeNodePayload;
}

export interface SessionCreatedPayload {
  session_id: string;
  next: NextPayload;
}

export interface ErrorPayload {
  code: string;
  message: string;
  detail?: unknown;
}
