import { describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { InterviewFlow } from "../src/interviewFlow.js";
import { MemorySessionIdStore } from "../src/storage.js";
import { FakeGateway, makePolicy, type TransitionTable } from "./fakeGateway.js";

const GATE_POLICY = makePolicy(
  "move_support",
  ["Q0", "Q1", "Q2", "Q3"],
  "(Q0 OR Q1 OR Q2) AND Q3",
);

// Greedy server behavior: the dominant gate question comes first; a "no"
// there settles the verdict immediately.
const GATE_TABLE: TransitionTable = {
  "": { next: { id: "Q3", text: "Question Q3?" } },
  "Q3:no": { resolution: "no", rootValue: "no" },
  "Q3:yes": { next: { id: "Q0", text: "Question Q0?" } },
  "Q3:yes|Q0:yes": { resolution: "yes", rootValue: "yes" },
  "Q3:nei": { next: { id: "Q0", text: "Question Q0?" } },
  "Q3:nei|Q0:yes": { resolution: "nei", missing: ["Q3"], rootValue: "nei" },
};

const PAIR_POLICY = makePolicy("pair", ["Q0", "Q1"], "Q0 AND Q1");
const PAIR_TABLE: TransitionTable = {
  "": { next: { id: "Q0", text: "Question Q0?" } },
  "Q0:nei": { next: { id: "Q1", text: "Question Q1?" } },
  "Q0:nei|Q1:nei": {
    resolution: "nei",
    missing: ["Q0", "Q1"],
    rootValue: "nei",
  },
  "Q0:no": { resolution: "no", rootValue: "no" },
};

function setup(tables = { [GATE_POLICY.id]: GATE_TABLE, [PAIR_POLICY.id]: PAIR_TABLE }) {
  const gateway = new FakeGateway(
    { [GATE_POLICY.id]: GATE_POLICY, [PAIR_POLICY.id]: PAIR_POLICY },
    tables,
  );
  const client = new GatewayClient("", gateway.fetch);
  const store = new MemorySessionIdStore();
  return { gateway, flow: new InterviewFlow(client, store), store };
}

describe("interview flow", () => {
  it("resolves the four-question policy after the single gate answer and displays no", async () => {
    const { gateway, flow } = setup();
    await flow.start(GATE_POLICY.id);
    expect(flow.getState().phase).toBe("asking");
    expect(flow.getState().question?.id).toBe("Q3");

    await flow.answer("no");
    const state = flow.getState();
    expect(state.phase).toBe("resolved");
    expect(state.verdict).toBe("no");
    expect(state.transcript).toHaveLength(1);

    // the verdict string is exactly what the server sent, never recomputed
    const lastSent = gateway.sentPayloads[gateway.sentPayloads.length - 1];
    expect(state.verdict).toBe(lastSent.resolution);
  });

  it("shows an NEI verdict with the server's missing-information list", async () => {
    const { flow } = setup();
    await flow.start(PAIR_POLICY.id);
    await flow.answer("nei");
    await flow.answer("nei");
    const state = flow.getState();
    expect(state.phase).toBe("resolved");
    expect(state.verdict).toBe("nei");
    expect(state.missingInformation).toEqual(["Q0", "Q1"]);
  });

  it("guards against duplicate submits while a request is in flight", async () => {
    const { gateway, flow } = setup();
    await flow.start(GATE_POLICY.id);
    const first = flow.answer("no");
    const second = flow.answer("no"); // double-click
    await Promise.all([first, second]);
    expect(gateway.postedAnswers).toBe(1);
    expect(flow.getState().transcript).toHaveLength(1);
  });

  it("recovers from a 409 by re-reading the server state", async () => {
    const { gateway, flow } = setup();
    await flow.start(GATE_POLICY.id);
    // sabotage: a second tab answered the same question already
    const sessionId = flow.getState().sessionId!;
    await gateway.fetch(`/sessions/${sessionId}/answer`, {
      method: "POST",
      body: JSON.stringify({ question_id: "Q3", answer: "no" }),
    });
    await flow.answer("yes"); // server replies 409 duplicate_answer
    const state = flow.getState();
    expect(state.phase).toBe("resolved");
    expect(state.verdict).toBe("no"); // the server's truth, not the local click
  });

  it("resumes a stored session id", async () => {
    const { gateway, flow, store } = setup();
    await flow.start(GATE_POLICY.id);
    const sessionId = flow.getState().sessionId!;

    const clientAgain = new GatewayClient("", gateway.fetch);
    store.save(sessionId);
    const resumedFlow = new InterviewFlow(clientAgain, store);
    expect(await resumedFlow.resume()).toBe(true);
    expect(resumedFlow.getState().question?.id).toBe("Q3");
    expect(resumedFlow.getState().policy?.id).toBe(GATE_POLICY.id);
  });

  it("surfaces gateway failures as an error phase with retry intact", async () => {
    const { flow } = setup();
    await flow.start("ghost-policy");
    expect(flow.getState().phase).toBe("error");
    expect(flow.getState().error).toContain("unknown policy");
  });

  it("renders tree node values verbatim from the server snapshot", async () => {
    const { gateway, flow } = setup();
    await flow.start(GATE_POLICY.id);
    await flow.answer("no");
    const sent = gateway.sentPayloads[gateway.sentPayloads.length - 1];
    expect(flow.getState().tree).toEqual(sent.tree);
  });
});

describe("scripted end-to-end runs", () => {
  it("every displayed label equals a gateway response across all runs", async () => {
    const scripts: { policy: string; answers: ("yes" | "no" | "nei")[] }[] = [
      { policy: GATE_POLICY.id, answers: ["no"] },
      { policy: GATE_POLICY.id, answers: ["yes", "yes"] },
      { policy: GATE_POLICY.id, answers: ["nei", "yes"] },
      { policy: PAIR_POLICY.id, answers: ["nei", "nei"] },
      { policy: PAIR_POLICY.id, answers: ["no"] },
    ];
    for (const script of scripts) {
      const { gateway, flow } = setup();
      await flow.start(script.policy);
      for (const value of script.answers) {
        expect(flow.getState().phase).toBe("asking");
        // the question on screen is the one the server asked for
        const askedByServer = gateway.sentPayloads
          .filter((p) => p.status === "in_progress")
          .map((p) => ("question" in p.next ? p.next.question.id : null))
          .pop();
        expect(flow.getState().question?.id).toBe(askedByServer);
        await flow.answer(value);
      }
      const state = flow.getState();
      const lastSent = gateway.sentPayloads[gateway.sentPayloads.length - 1];
      expect(state.phase).toBe("resolved");
      expect(state.verdict).toBe(lastSent.resolution);
      expect(state.missingInformation).toEqual(lastSent.missing_information);
      expect(state.tree).toEqual(lastSent.tree);
    }
  });
});
