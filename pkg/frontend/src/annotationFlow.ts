import type { GatewayClient } from "./api.js";
import type { Answer, PolicyPayload } from "./types.js";

export interface AnnotationState {
  answers: Record<string, Answer | null>;
  chosenLabel: Answer | null;
  /** Tree-inferred label as reported by the gateway; null until inferred. */
  inferredLabel: string | null;
  mismatch: boolean;
  busy: boolean;
}

export interface SubmissionBlocked {
  ok: false;
  unanswered: string[];
  missingLabel: boolean;
}

export interface SubmissionAccepted {
  ok: true;
  policyId: string;
  answers: Record<string, Answer>;
  chosenLabel: Answer;
  inferredLabel: string;
  mismatch: boolean;
}

export type SubmissionResult = SubmissionBlocked | SubmissionAccepted;

/** All-questions annotation for one (policy, scenario) pair.
 *
 * The annotator answers every question in a grid and picks an overall label.
 * The tree-inferred label shown beside the chosen one is obtained by replaying
 * the answers through a throwaway gateway session, so the client never
 * evaluates the tree itself; a disagreement is flagged before submission.
 */
export class AnnotationFlow {
  private state: AnnotationState;

  constructor(
    private readonly client: GatewayClient,
    readonly policy: PolicyPayload,
    readonly scenarioText: string,
  ) {
    const answers: Record<string, Answer | null> = {};
    for (const question of policy.questions) {
      answers[question.id] = null;
    }
    this.state = {
      answers,
      chosenLabel: null,
      inferredLabel: null,
      mismatch: false,
      busy: false,
    };
  }

  getState(): AnnotationState {
    return this.state;
  }

  get unanswered(): string[] {
    return this.policy.questions
      .map((q) => q.id)
      .filter((id) => this.state.answers[id] === null);
  }

  get complete(): boolean {
    return this.unanswered.length === 0;
  }

  setAnswer(questionId: string, value: Answer): void {
    if (!(questionId in this.state.answers)) {
      throw new Error(`unknown question: ${questionId}`);
    }
    this.state = {
      ...this.state,
      answers: { ...this.state.answers, [questionId]: value },
      inferredLabel: null, // stale once any answer changes
      mismatch: false,
    };
  }

  setChosenLabel(value: Answer): void {
    this.state = {
      ...this.state,
      chosenLabel: value,
      mismatch:
        this.state.inferredLabel !== null && this.state.inferredLabel !== value,
    };
  }

  /** Replay the grid answers through a fresh session until the server resolves.
   *
   * The session asks only questions that can still change the verdict, so the
   * replay may stop early; the resolution it reports is exactly the tree's
   * label for the full answer set.
   */
  async inferLabel(): Promise<string> {
    if (!this.complete) {
      throw new Error("cannot infer a label before every question is answered");
    }
    this.state = { ...this.state, busy: true };
    try {
      const created = await this.client.createSession(this.policy.id, "order");
      let next = created.next;
      let resolution: string | null = "resolved" in next ? next.resolved : null;
      while (resolution === null) {
        if (!("question" in next)) {
          throw new Error("session ended without a resolution");
        }
        const value = this.state.answers[next.question.id];
        if (value === null) {
          throw new Error(`question ${next.question.id} lost its answer`);
        }
        const session = await this.client.answer(
          created.session_id,
          next.question.id,
          value,
        );
        if (session.status === "resolved") {
          resolution = session.resolution;
          break;
        }
        next = session.next;
      }
      if (resolution === null) {
        throw new Error("gateway did not report a resolution");
      }
      this.state = {
        ...this.state,
        inferredLabel: resolution,
        mismatch:
          this.state.chosenLabel !== null && resolution !== this.state.chosenLabel,
        busy: false,
      };
      return resolution;
    } catch (error) {
      this.state = { ...this.state, busy: false };
      throw error;
    }
  }

  async submit(): Promise<SubmissionResult> {
    if (!this.complete || this.state.chosenLabel === null) {
      return {
        ok: false,
        unanswered: this.unanswered,
        missingLabel: this.state.chosenLabel === null,
      };
    }
    const inferred = this.state.inferredLabel ?? (await this.inferLabel());
    return {
      ok: true,
      policyId: this.policy.id,
      answers: this.state.answers as Record<string, Answer>,
      chosenLabel: this.state.chosenLabel,
      inferredLabel: inferred,
      mismatch: inferred !== this.state.chosenLabel,
    };
  }
}
