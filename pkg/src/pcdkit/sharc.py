"""Convert conversational policy-dialog records into compliance corpora.

Input records describe one dialog turn each: a policy snippet, an optional
scenario, the conversation history so far, and the system's answer (yes, no,
or a follow-up clarification question). Two heuristics turn these into
training data: a scenario-level compliance label, and one QA instance per
policy question with NEI padding for questions the conversation never
answered. The labels are heuristic and can be noisy; conversion therefore
reports skips, conflicts, and recovery decisions rather than failing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import Policy, QAInstance, Question, Scenario
from .errors import CorpusFormatError
from .logic import NEI, NO, YES, TriValue


def normalize_text(text: str) -> str:
    """Collapse all whitespace runs; question identity uses this form."""
    return " ".join(text.split())


@dataclass
class FollowUp:
    question: str
    answer: str


@dataclass
class SharcUtterance:
    utterance_id: str
    tree_id: str
    snippet: str
    question: str
    scenario: str
    history: list[FollowUp]
    answer: str
    source_url: str | None = None


def answer_kind(answer: str) -> str:
    """Classify a turn's answer: "yes" | "no" | "irrelevant" | "follow_up"."""
    lowered = answer.strip().lower()
    if lowered in ("yes", "no"):
        return lowered
    if lowered == "irrelevant":
        return "irrelevant"
    return "follow_up"


def load_sharc_file(path) -> list[SharcUtterance]:
    """Read utterances from a JSON array file or a JSONL file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            raw_records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{path.name}: invalid JSON ({exc.msg})") from None
        if not isinstance(raw_records, list):
            raise CorpusFormatError(f"{path.name}: expected an array of records")
        entries = list(enumerate(raw_records, start=1))
    else:
        entries = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                entries.append((line_no, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(
                    f"{path.name}:{line_no}: invalid JSON ({exc.msg})"
                ) from None

    utterances = []
    for index, record in entries:
        utterances.append(_utterance_from_record(record, path.name, index))
    return utterances


def _utterance_from_record(record, source: str, index: int) -> SharcUtterance:
    if not isinstance(record, dict):
        raise CorpusFormatError(f"{source}:{index}: record must be an object")
    for key in ("utterance_id", "tree_id", "answer"):
        if not isinstance(record.get(key), str) or not record[key].strip():
            raise CorpusFormatError(f"{source}:{index}: record needs a nonempty '{key}'")
    history = []
    for entry in record.get("history") or []:
        if not isinstance(entry, dict) or not entry.get("follow_up_question"):
            raise CorpusFormatError(
                f"{source}:{index}: history entries need a 'follow_up_question'"
            )
        history.append(
            FollowUp(
                question=str(entry["follow_up_question"]),
                answer=str(entry.get("follow_up_answer", "")),
            )
        )
    return SharcUtterance(
        utterance_id=record["utterance_id"],
        tree_id=record["tree_id"],
        snippet=str(record.get("snippet", "")),
        question=str(record.get("question", "")),
        scenario=str(record.get("scenario", "")),
        history=history,
        answer=record["answer"],
        source_url=record.get("source_url"),
    )


def collect_policy_questions(utterances: Sequence[SharcUtterance]) -> list[Question]:
    """Unique follow-up questions of one dialog group, ids Q0.. in first-seen order.

    For each utterance the history questions are scanned before the answer (the
    history happened earlier in the conversation); duplicates are detected by
    whitespace-normalized exact match.
    """
    tree_ids = {u.tree_id for u in utterances}
    if len(tree_ids) > 1:
        raise ValueError(f"utterances span multiple dialog groups: {sorted(tree_ids)}")
    seen: dict[str, None] = {}
    for utterance in utterances:
        for follow_up in utterance.history:
            text = normalize_text(follow_up.question)
            if text:
                seen.setdefault(text)
        if answer_kind(utterance.answer) == "follow_up":
            text = normalize_text(utterance.answer)
            if text:
                seen.setdefault(text)
    return [Question(id=f"Q{i}", text=text) for i, text in enumerate(seen)]


def to_entailment_instance(utterance: SharcUtterance) -> tuple[str, TriValue] | None:
    """Scenario text plus compliance label, or None when the turn is skipped.

    Skipped: empty scenario, or a terminal answer that is neither yes/no nor a
    follow-up question (e.g. an irrelevance marker). The label is the turn's
    yes/no answer only when the history is empty; any exchanged history or a
    follow-up answer means the scenario alone does not carry the full picture,
    so the label is NEI.
    """
    if not utterance.scenario.strip():
        return None
    kind = answer_kind(utterance.answer)
    if kind == "irrelevant":
        return None
    if kind in ("yes", "no") and not utterance.history:
        return utterance.scenario, (YES if kind == "yes" else NO)
    return utterance.scenario, NEI


def find_continuation(
    utterance: SharcUtterance, group: Sequence[SharcUtterance]
) -> FollowUp | None:
    """Recover the answer to a turn's follow-up question from the same dialog.

    The continuation turn shares scenario and top-level question and extends
    the history by exactly the follow-up that was asked; its last history
    entry then carries the user's reply.
    """
    target = normalize_text(utterance.answer)
    scenario_key = normalize_text(utterance.scenario)
    question_key = normalize_text(utterance.question)
    for other in group:
        if other is utterance:
            continue
        if normalize_text(other.scenario) != scenario_key:
            continue
        if normalize_text(other.question) != question_key:
            continue
        if len(other.history) != len(utterance.history) + 1:
            continue
        prefix_matches = all(
            normalize_text(a.question) == normalize_text(b.question)
            and normalize_text(a.answer) == normalize_text(b.answer)
            for a, b in zip(other.history, utterance.history)
        )
        if not prefix_matches:
            continue
        last = other.history[-1]
        if normalize_text(last.question) == target:
            return last
    return None


def to_qa_instances(
    utterance: SharcUtterance,
    policy_questions: Sequence[Question],
    conversation: Sequence[FollowUp] | None = None,
) -> tuple[list[tuple[str, TriValue]], list[dict]]:
    """One (question id, answer) pair per policy question.

    A question answered in the conversation keeps its recorded answer; every
    other question gets NEI. Conflicting repeats keep the first answer and are
    reported. Returns (pairs, conflicts).
    """
    if conversation is None:
        conversation = list(utterance.history)
    answered: dict[str, TriValue] = {}
    conflicts: list[dict] = []
    for follow_up in conversation:
        key = normalize_text(follow_up.question)
        if not key:
            continue
        kind = answer_kind(follow_up.answer)
        value = YES if kind == "yes" else NO if kind == "no" else NEI
        if key in answered:
            if answered[key] is not value:
                conflicts.append(
                    {
                        "scenario_id": utterance.utterance_id,
                        "question": key,
                        "kept": str(answered[key]),
                        "dropped": str(value),
                    }
                )
            continue
        answered[key] = value
    pairs = [(q.id, answered.get(q.text, NEI)) for q in policy_questions]
    return pairs, conflicts


@dataclass
class ConversionReport:
    utterances_total: int = 0
    policy_count: int = 0
    policies_with_scenarios: int = 0
    policies_without_questions: list[str] = field(default_factory=list)
    scenario_count: int = 0
    qa_instance_count: int = 0
    qa_instance_count_non_nei: int = 0
    skipped_empty_scenario: int = 0
    skipped_irrelevant_answer: int = 0
    recovered_continuations: int = 0
    unrecovered_continuations: int = 0
    answer_conflicts: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "utterances_total": self.utterances_total,
            "policy_count": self.policy_count,
            "policies_with_scenarios": self.policies_with_scenarios,
            "policies_without_questions": self.policies_without_questions,
            "scenario_count": self.scenario_count,
            "qa_instance_count": self.qa_instance_count,
            "qa_instance_count_non_nei": self.qa_instance_count_non_nei,
            "skipped_empty_scenario": self.skipped_empty_scenario,
            "skipped_irrelevant_answer": self.skipped_irrelevant_answer,
            "recovered_continuations": self.recovered_continuations,
            "unrecovered_continuations": self.unrecovered_continuations,
            "answer_conflicts": self.answer_conflicts,
        }

    def render_text(self) -> str:
        lines = [
            f"utterances:                {self.utterances_total}",
            f"policies:                  {self.policy_count}"
            f" ({self.policies_with_scenarios} with scenarios)",
            f"policies without questions: {len(self.policies_without_questions)}",
            f"scenario instances:        {self.scenario_count}",
            f"qa instances:              {self.qa_instance_count}"
            f" ({self.qa_instance_count_non_nei} non-NEI, "
            f"{self.qa_instance_count - self.qa_instance_count_non_nei} NEI-padded)",
            f"skipped (empty scenario):  {self.skipped_empty_scenario}",
            f"skipped (irrelevant):      {self.skipped_irrelevant_answer}",
            f"follow-up answers recovered: {self.recovered_continuations}"
            f" (unrecovered: {self.unrecovered_continuations})",
            f"answer conflicts:          {len(self.answer_conflicts)}",
        ]
        return "\n".join(lines)


@dataclass
class ConversionResult:
    policies: list[Policy]
    scenarios: list[Scenario]
    qa_instances: list[QAInstance]
    report: ConversionReport


def convert_utterances(utterances: Sequence[SharcUtterance]) -> ConversionResult:
    """Apply both conversion heuristics to a full utterance list.

    Output order is fixed by input order (groups in first-seen order,
    scenarios in turn order), so identical inputs produce identical files.
    """
    groups: dict[str, list[SharcUtterance]] = {}
    for utterance in utterances:
        groups.setdefault(utterance.tree_id, []).append(utterance)

    report = ConversionReport(utterances_total=len(utterances), policy_count=len(groups))
    policies: list[Policy] = []
    scenarios: list[Scenario] = []
    qa_instances: list[QAInstance] = []
    seen_scenario_ids: set[str] = set()

    for tree_id, group in groups.items():
        questions = collect_policy_questions(group)
        if not questions:
            report.policies_without_questions.append(tree_id)
        first = group[0]
        policies.append(
            Policy(
                id=tree_id,
                text=first.snippet,
                questions=questions,
                source_url=first.source_url,
            )
        )
        group_had_scenario = False
        for utterance in group:
            if utterance.utterance_id in seen_scenario_ids:
                raise CorpusFormatError(
                    f"duplicate utterance id: {utterance.utterance_id}"
                )
            seen_scenario_ids.add(utterance.utterance_id)
            instance = to_entailment_instance(utterance)
            if instance is None:
                if not utterance.scenario.strip():
                    report.skipped_empty_scenario += 1
                else:
                    report.skipped_irrelevant_answer += 1
                continue
            group_had_scenario = True
            scenario_text, label = instance

            conversation = list(utterance.history)
            if answer_kind(utterance.answer) == "follow_up":
                recovered = find_continuation(utterance, group)
                if recovered is not None:
                    conversation.append(recovered)
                    report.recovered_continuations += 1
                else:
                    report.unrecovered_continuations += 1

            pairs, conflicts = to_qa_instances(utterance, questions, conversation)
            report.answer_conflicts.extend(conflicts)
            gold_answers = {qid: value for qid, value in pairs}
            scenarios.append(
                Scenario(
                    id=utterance.utterance_id,
                    policy_id=tree_id,
                    text=scenario_text,
                    gold_label=label,
                    gold_answers=gold_answers if pairs else None,
                )
            )
            for qid, value in pairs:
                qa_instances.append(QAInstance(utterance.utterance_id, qid, value))
                report.qa_instance_count += 1
                if value is not NEI:
                    report.qa_instance_count_non_nei += 1
        if group_had_scenario:
            report.policies_with_scenarios += 1

    report.scenario_count = len(scenarios)
    return ConversionResult(policies, scenarios, qa_instances, report)


def convert_corpus(input_path, out_dir=None) -> ConversionResult:
    """Convert a dialog file; optionally write corpus files plus the report."""
    result = convert_utterances(load_sharc_file(input_path))
    if out_dir is not None:
        write_conversion(result, out_dir)
    return result


def write_conversion(result: ConversionResult, out_dir) -> list[Path]:
    from .corpus import (
        POLICIES_FILENAME,
        QA_INSTANCES_FILENAME,
        SCENARIOS_FILENAME,
        Corpus,
        save_corpus,
        save_qa_instances,
    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = Corpus(policies={p.id: p for p in result.policies}, scenarios=result.scenarios)
    policies_path = out / POLICIES_FILENAME
    scenarios_path = out / SCENARIOS_FILENAME
    qa_path = out / QA_INSTANCES_FILENAME
    save_corpus(corpus, policies_path, scenarios_path)
    save_qa_instances(result.qa_instances, qa_path)
    report_json = out / "conversion_report.json"
    report_json.write_text(
        json.dumps(result.report.as_dict(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    report_txt = out / "conversion_report.txt"
    report_txt.write_text(result.report.render_text() + "\n", encoding="utf-8")
    return [policies_path, scenarios_path, qa_path, report_json, report_txt]
