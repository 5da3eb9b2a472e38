import { GatewayClient, GatewayError } from "./api.js";
import { MemorySessionIdStore, type SessionIdStore } from "./storage.js";
import type {
  Answer,
  PolicyPayload,
  QuestionPayload,
  SessionPayload,
  TranscriptEntryPayload,
  TreeNodePayload,
} from "./types.js";

export type InterviewPhase = "idle" | "asking" | "resolved" | "abandoned" | "error";

export interface InterviewState {
  phase: InterviewPhase;
  sessionId: string | null;
  policy: PolicyPayload | null;
  question: QuestionPayload | null;
  /** The verdict string exactly as the server sent it; never computed locally. */
  verdict: string | null;
  missingInformation: string[];
  transcript: TranscriptEntryPayload[];
  tree: TreeNodePayload | null;
  error: string | null;
  busy: boolean;
}

type Listener = (state: InterviewState) => void;

const INITIAL: InterviewState = {
  phase: "idle",
  sessionId: null,
  policy: null,
  question: null,
  verdict: null,
  missingInformation: [],
  transcript: [],
  tree: null,
  error: null,
  busy: false,
};

/** One-question-at-a-time interview over a gateway session.
 *
 * The server is authoritative: every question, verdict, missing-information
 * list, and tree-node value shown comes from a gateway payload. Answers are
 * submitted one at a time with an in-flight guard, so a double-click cannot
 * produce two transcript entries; if a duplicate still reaches the server the
 * 409 response is resolved by re-reading the session.
 */
export class InterviewFlow {
  private state: InterviewState = { ...INITIAL };
  private listeners: Listener[] = [];

  constructor(
    private readonly client: GatewayClient,
    private readonly store: SessionIdStore = new MemorySessionIdStore(),
  ) {}

  getState(): InterviewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<InterviewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  async start(policyId: string, strategy = "order"): Promise<void> {
    this.update({ ...INITIAL, busy: true });
    try {
      const policy = await this.client.getPolicy(policyId);
      const created = await this.client.createSession(policyId, strategy);
      this.store.save(created.session_id);
      const session = await this.client.getSession(created.session_id);
      this.update({ policy, busy: false });
      this.apply(session);
    } catch (error) {
      this.fail(error);
    }
  }

  /** Re-attach to the session saved locally, if any. */
  async resume(): Promise<boolean> {
    const sessionId = this.store.load();
    if (!sessionId) {
      return false;
    }
    this.update({ ...INITIAL, busy: true });
    try {
      const session = await this.client.getSession(sessionId);
      const policy = await this.client.getPolicy(session.policy_id);
      this.update({ policy, busy: false });
      this.apply(session);
      return true;
    } catch (error) {
      this.store.clear();
      this.fail(error);
      return false;
    }
  }

  async answer(value: Answer): Promise<void> {
    const { sessionId, question, busy, phase } = this.state;
    if (busy || phase !== "asking" || !sessionId || !question) {
      return; // idempotent guard against double submits
    }
    this.update({ busy: true });
    try {
      const session = await this.client.answer(sessionId, question.id, value);
      this.apply(session);
    } catch (error) {
      if (error instanceof GatewayError && error.status === 409) {
        // Lost a race (e.g. duplicate submit from another tab): server wins.
        const session = await this.client.getSession(sessionId);
        this.apply(session);
        return;
      }
      this.fail(error);
    }
  }

  private apply(session: SessionPayload): void {
    const base = {
      sessionId: session.session_id,
      transcript: session.transcript,
      missingInformation: session.missing_information,
      tree: session.tree,
      error: null,
      busy: false,
    };
    if (session.status === "resolved") {
      this.store.clear();
      this.update({
        ...base,
        phase: "resolved",
        question: null,
        verdict: session.resolution,
      });
    } else if (session.status === "abandoned") {
      this.store.clear();
      this.update({ ...base, phase: "abandoned", question: null, verdict: null });
    } else {
      const next = "question" in session.next ? session.next.question : null;
      this.update({ ...base, phase: "asking", question: next, verdict: null });
    }
  }

  private fail(error: unknown): void {
    const message =
      error instanceof Error ? error.message : "unexpected gateway failure";
    this.update({ phase: "error", error: message, busy: false });
  }
}
