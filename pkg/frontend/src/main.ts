import { GatewayClient } from "./api.js";
import { AnnotationFlow } from "./annotationFlow.js";
import { InterviewFlow } from "./interviewFlow.js";
import { BrowserSessionIdStore } from "./storage.js";
import { renderTree } from "./treeView.js";
import type { Answer, PolicyPayload } from "./types.js";

const ANSWERS: Answer[] = ["yes", "no", "nei"];
const ANSWER_TITLES: Record<Answer, string> = {
  yes: "Yes",
  no: "No",
  nei: "Not enough information",
};

const client = new GatewayClient("");
const interview = new InterviewFlow(client, new BrowserSessionIdStore());

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderPolicyList(root: HTMLElement, policies: PolicyPayload[]) {
  root.innerHTML = "";
  root.appendChild(el("h2", undefined, "Policies"));
  const list = el("ul", "policy-list");
  for (const policy of policies) {
    const item = el("li", "policy-item");
    item.appendChild(el("p", "policy-text", policy.text));
    item.appendChild(
      el("p", "policy-meta", `${policy.question_count} question(s) — ${policy.id}`),
    );
    const interviewButton = el("button", undefined, "Interview");
    interviewButton.addEventListener("click", () => {
      void interview.start(policy.id, "order");
    });
    item.appendChild(interviewButton);
    const annotateButton = el("button", undefined, "Annotate a scenario");
    annotateButton.addEventListener("click", () => startAnnotation(policy));
    item.appendChild(annotateButton);
    list.appendChild(item);
  }
  root.appendChild(list);
}

function renderInterview(root: HTMLElement) {
  const state = interview.getState();
  root.innerHTML = "";
  if (state.phase === "idle") {
    root.appendChild(el("p", "hint", "Pick a policy to start an interview."));
    return;
  }
  if (state.policy) {
    root.appendChild(el("h2", undefined, "Interview"));
    root.appendChild(el("p", "policy-text", state.policy.text));
  }
  if (state.phase === "error") {
    root.appendChild(el("p", "error", state.error ?? "something went wrong"));
    const retry = el("button", undefined, "Retry");
    retry.addEventListener("click", () => void interview.resume());
    root.appendChild(retry);
    return;
  }
  if (state.phase === "asking" && state.question) {
    root.appendChild(el("p", "question", state.question.text));
    const buttons = el("div", "answers");
    for (const answer of ANSWERS) {
      const button = el("button", `answer-${answer}`, ANSWER_TITLES[answer]);
      button.disabled = state.busy;
      button.addEventListener("click", () => void interview.answer(answer));
      buttons.appendChild(button);
    }
    root.appendChild(buttons);
  }
  if (state.phase === "resolved") {
    const verdict = el("p", `verdict verdict-${state.verdict}`);
    verdict.textContent = `Verdict: ${state.verdict}`;
    root.appendChild(verdict);
    if (state.verdict === "nei" && state.missingInformation.length > 0) {
      root.appendChild(
        el(
          "p",
          "missing",
          "Missing information: " + state.missingInformation.join(", "),
        ),
      );
    }
  }
  if (state.tree) {
    root.appendChild(el("h3", undefined, "Tree state"));
    root.appendChild(renderTree(document, state.tree, state.missingInformation));
  }
}

function startAnnotation(policy: PolicyPayload) {
  const root = document.getElementById("annotation");
  if (!root) return;
  const scenario = window.prompt("Paste the scenario text to annotate:") ?? "";
  if (!scenario.trim()) return;
  const flow = new AnnotationFlow(client, policy, scenario);
  renderAnnotation(root, flow);
}

function renderAnnotation(root: HTMLElement, flow: AnnotationFlow) {
  root.innerHTML = "";
  root.appendChild(el("h2", undefined, "Annotation"));
  root.appendChild(el("p", "policy-text", flow.policy.text));
  root.appendChild(el("p", "scenario-text", flow.scenarioText));

  const grid = el("div", "annotation-grid");
  for (const question of flow.policy.questions) {
    const row = el("div", "annotation-row");
    row.appendChild(el("span", "annotation-question", `${question.id}: ${question.text}`));
    for (const answer of ANSWERS) {
      const button = el("button", `answer-${answer}`, ANSWER_TITLES[answer]);
      button.addEventListener("click", () => {
        flow.setAnswer(question.id, answer);
        void refresh();
      });
      row.appendChild(button);
    }
    grid.appendChild(row);
  }
  root.appendChild(grid);

  root.appendChild(el("p", undefined, "Overall compliance label:"));
  const labels = el("div", "answers");
  for (const answer of ANSWERS) {
    const button = el("button", `answer-${answer}`, ANSWER_TITLES[answer]);
    button.addEventListener("click", () => {
      flow.setChosenLabel(answer);
      void refresh();
    });
    labels.appendChild(button);
  }
  root.appendChild(labels);

  const status = el("p", "annotation-status");
  root.appendChild(status);
  const submit = el("button", "submit", "Submit annotation");
  root.appendChild(submit);
  const output = el("pre", "annotation-output");
  root.appendChild(output);

  async function refresh() {
    const state = flow.getState();
    const parts: string[] = [];
    if (!flow.complete) {
      parts.push(`${flow.unanswered.length} question(s) unanswered`);
    } else {
      if (state.inferredLabel === null && !state.busy) {
        await flow.inferLabel();
      }
      const inferred = flow.getState().inferredLabel;
      if (inferred !== null) {
        parts.push(`tree-inferred label: ${inferred}`);
        if (flow.getState().mismatch) {
          parts.push("⚠ disagrees with your chosen label");
        }
      }
    }
    status.textContent = parts.join(" — ");
    status.classList.toggle("mismatch", flow.getState().mismatch);
  }

  submit.addEventListener("click", () => {
    void flow.submit().then((result) => {
      if (!result.ok) {
        status.textContent = result.missingLabel
          ? "choose an overall label before submitting"
          : `${result.unanswered.length} question(s) unanswered: ${result.unanswered.join(", ")}`;
        return;
      }
      output.textContent = JSON.stringify(result, null, 2);
    });
  });
}

async function boot() {
  const policiesRoot = document.getElementById("policies");
  const interviewRoot = document.getElementById("interview");
  if (!policiesRoot || !interviewRoot) return;
  interview.subscribe(() => renderInterview(interviewRoot));
  renderInterview(interviewRoot);
  const resumed = await interview.resume();
  if (resumed) {
    renderInterview(interviewRoot);
  }
  const payload = await client.listPolicies();
  renderPolicyList(policiesRoot, payload.policies);
}

void boot();
