"""Corpus model and persistence: policies, scenarios, QA instances, statistics.

Files are UTF-8 JSON Lines, one record per line. Unknown fields on a record
are kept in `extra` and written back on save, so foreign tooling's fields
survive a round-trip. Gold labels and gold answers are optional: heuristic
training data carries noisy or missing golds, evaluation data carries both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import (
    CorpusFormatError,
    CorpusValidationError,
    EmptyCorpusError,
    ExpressionSyntaxError,
    UnknownPolicyError,
    UnknownScenarioError,
)
from .logic import Node, TriValue, evaluate, parse_tree, tree_questions

POLICIES_FILENAME = "policies.jsonl"
SCENARIOS_FILENAME = "scenarios.jsonl"
QA_INSTANCES_FILENAME = "qa_instances.jsonl"

_POLICY_FIELDS = ("id", "text", "source_url", "questions", "tree")
_SCENARIO_FIELDS = ("id", "policy_id", "text", "gold_label", "gold_answers")

_UNSET = object()


@dataclass
class Question:
    id: str
    text: str


@dataclass
class Policy:
    id: str
    text: str
    questions: list[Question] = field(default_factory=list)
    tree_text: str | None = None
    source_url: str | None = None
    extra: dict = field(default_factory=dict)
    _tree_cache: object = field(default=_UNSET, repr=False, compare=False)

    @property
    def tree(self) -> Node | None:
        """Parsed expression tree, or None when absent or unparseable."""
        if self.tree_text is None:
            return None
        if self._tree_cache is _UNSET:
            try:
                self._tree_cache = parse_tree(self.tree_text)
            except ExpressionSyntaxError:
                self._tree_cache = None
        return self._tree_cache  # type: ignore[return-value]

    @property
    def question_ids(self) -> list[str]:
        return [q.id for q in self.questions]

    def question_text(self, question_id: str) -> str:
        for question in self.questions:
            if question.id == question_id:
                return question.text
        raise KeyError(question_id)


@dataclass
class Scenario:
    id: str
    policy_id: str
    text: str
    gold_label: TriValue | None = None
    gold_answers: dict[str, TriValue] | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class QAInstance:
    scenario_id: str
    question_id: str
    answer: TriValue

    def as_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "question_id": self.question_id,
            "answer": str(self.answer),
        }


@dataclass
class Violation:
    code: str
    message: str
    policy_id: str | None = None
    scenario_id: str | None = None
    line: int | None = None

    def as_dict(self) -> dict:
        body: dict = {"code": self.code, "message": self.message}
        for key in ("policy_id", "scenario_id", "line"):
            value = getattr(self, key)
            if value is not None:
                body[key] = value
        return body


@dataclass
class Corpus:
    policies: dict[str, Policy]
    scenarios: list[Scenario]
    violations: list[Violation] = field(default_factory=list)
    _scenario_index: dict[str, Scenario] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._scenario_index:
            self._scenario_index = {s.id: s for s in self.scenarios}

    def policy(self, policy_id: str) -> Policy:
        try:
            return self.policies[policy_id]
        except KeyError:
            raise UnknownPolicyError(policy_id) from None

    def scenario(self, scenario_id: str) -> Scenario:
        try:
            return self._scenario_index[scenario_id]
        except KeyError:
            raise UnknownScenarioError(scenario_id) from None

    def scenarios_for(self, policy_id: str) -> list[Scenario]:
        return [s for s in self.scenarios if s.policy_id == policy_id]


@dataclass
class CorpusStats:
    policy_count: int
    scenario_count: int
    qa_count: int
    qa_count_non_nei: int
    avg_qa_per_policy: float
    label_histogram: dict[str, int]
    answer_histogram: dict[str, int]

    def as_dict(self) -> dict:
        return {
            "policy_count": self.policy_count,
            "scenario_count": self.scenario_count,
            "qa_count": self.qa_count,
            "qa_count_non_nei": self.qa_count_non_nei,
            "avg_qa_per_policy": round(self.avg_qa_per_policy, 2),
            "label_histogram": self.label_histogram,
            "answer_histogram": self.answer_histogram,
        }


def _iter_records(path: Path) -> Iterator[tuple[int, dict]]:
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(
                    f"{path.name}:{line_no}: invalid JSON ({exc.msg})",
                    detail={"file": str(path), "line": line_no},
                ) from None
            if not isinstance(record, dict):
                raise CorpusFormatError(
                    f"{path.name}:{line_no}: record must be an object",
                    detail={"file": str(path), "line": line_no},
                )
            yield line_no, record


def _record_error(path: Path, line_no: int, message: str) -> CorpusFormatError:
    return CorpusFormatError(
        f"{path.name}:{line_no}: {message}",
        detail={"file": str(path), "line": line_no},
    )


def _policy_from_record(record: dict, path: Path, line_no: int) -> Policy:
    for key in ("id", "text"):
        if not isinstance(record.get(key), str) or not record[key]:
            raise _record_error(path, line_no, f"policy record needs a nonempty '{key}'")
    questions = []
    for entry in record.get("questions", []):
        if not isinstance(entry, dict) or "id" not in entry or "text" not in entry:
            raise _record_error(path, line_no, "question entries need 'id' and 'text'")
        questions.append(Question(id=str(entry["id"]), text=str(entry["text"])))
    tree_text = record.get("tree")
    if tree_text is not None and not isinstance(tree_text, str):
        raise _record_error(path, line_no, "'tree' must be an expression string")
    source_url = record.get("source_url")
    extra = {k: v for k, v in record.items() if k not in _POLICY_FIELDS}
    return Policy(
        id=record["id"],
        text=record["text"],
        questions=questions,
        tree_text=tree_text,
        source_url=source_url,
        extra=extra,
    )


def _scenario_from_record(record: dict, path: Path, line_no: int) -> Scenario:
    for key in ("id", "policy_id", "text"):
        if not isinstance(record.get(key), str) or not record[key]:
            raise _record_error(path, line_no, f"scenario record needs a nonempty '{key}'")
    gold_label = None
    if record.get("gold_label") is not None:
        try:
            gold_label = TriValue.parse(record["gold_label"])
        except ValueError as exc:
            raise _record_error(path, line_no, str(exc))
    gold_answers = None
    if record.get("gold_answers") is not None:
        raw = record["gold_answers"]
        if not isinstance(raw, dict):
            raise _record_error(path, line_no, "'gold_answers' must be an object")
        gold_answers = {}
        for question_id, value in raw.items():
            try:
                gold_answers[question_id] = TriValue.parse(value)
            except ValueError as exc:
                raise _record_error(path, line_no, str(exc))
    extra = {k: v for k, v in record.items() if k not in _SCENARIO_FIELDS}
    return Scenario(
        id=record["id"],
        policy_id=record["policy_id"],
        text=record["text"],
        gold_label=gold_label,
        gold_answers=gold_answers,
        extra=extra,
    )


def load_corpus(policies_file, scenarios_file, strict: bool = False) -> Corpus:
    """Load and link a corpus from two JSONL files.

    In audit mode (default) structural problems become `Violation` entries on
    the returned corpus; in strict mode the first malformed record raises and
    any semantic violation raises `CorpusValidationError` after the scan.
    """
    policies_path = Path(policies_file)
    scenarios_path = Path(scenarios_file)
    violations: list[Violation] = []
    policies: dict[str, Policy] = {}
    for line_no, record in _iter_records(policies_path):
        try:
            policy = _policy_from_record(record, policies_path, line_no)
        except CorpusFormatError as exc:
            if strict:
                raise
            violations.append(Violation("malformed_record", exc.message, line=line_no))
            continue
        if policy.id in policies:
            violation = Violation(
                "duplicate_policy_id",
                f"policy id {policy.id} appears more than once",
                policy_id=policy.id,
                line=line_no,
            )
            if strict:
                raise CorpusValidationError([violation])
            violations.append(violation)
            continue
        policies[policy.id] = policy

    scenarios: list[Scenario] = []
    seen_scenarios: set[str] = set()
    for line_no, record in _iter_records(scenarios_path):
        try:
            scenario = _scenario_from_record(record, scenarios_path, line_no)
        except CorpusFormatError as exc:
            if strict:
                raise
            violations.append(Violation("malformed_record", exc.message, line=line_no))
            continue
        if scenario.id in seen_scenarios:
            violation = Violation(
                "duplicate_scenario_id",
                f"scenario id {scenario.id} appears more than once",
                scenario_id=scenario.id,
                line=line_no,
            )
            if strict:
                raise CorpusValidationError([violation])
            violations.append(violation)
            continue
        seen_scenarios.add(scenario.id)
        scenarios.append(scenario)

    corpus = Corpus(policies=policies, scenarios=scenarios, violations=violations)
    semantic = validate_corpus(corpus)
    if strict and (violations or semantic):
        raise CorpusValidationError(violations + semantic)
    corpus.violations = violations + semantic
    return corpus


def load_corpus_dir(directory, strict: bool = False) -> Corpus:
    directory = Path(directory)
    return load_corpus(
        directory / POLICIES_FILENAME, directory / SCENARIOS_FILENAME, strict=strict
    )


def validate_corpus(corpus: Corpus) -> list[Violation]:
    """Check linking and consistency invariants; violations are data, not errors."""
    violations: list[Violation] = []
    for policy in corpus.policies.values():
        ids = policy.question_ids
        if len(set(ids)) != len(ids):
            violations.append(
                Violation(
                    "duplicate_question_id",
                    f"policy {policy.id} repeats a question id",
                    policy_id=policy.id,
                )
            )
        for question in policy.questions:
            if not question.text.strip():
                violations.append(
                    Violation(
                        "empty_question_text",
                        f"policy {policy.id} question {question.id} has empty text",
                        policy_id=policy.id,
                    )
                )
        if policy.tree_text is None:
            continue
        tree = policy.tree
        if tree is None:
            violations.append(
                Violation(
                    "invalid_tree",
                    f"policy {policy.id} has an unparseable tree expression",
                    policy_id=policy.id,
                )
            )
            continue
        tree_vars = set(tree_questions(tree))
        declared = set(ids)
        if tree_vars != declared:
            missing = sorted(tree_vars - declared)
            unused = sorted(declared - tree_vars)
            violations.append(
                Violation(
                    "tree_variable_mismatch",
                    f"policy {policy.id}: tree/question mismatch"
                    + (f"; undeclared {missing}" if missing else "")
                    + (f"; unused {unused}" if unused else ""),
                    policy_id=policy.id,
                )
            )
        if not 1 <= len(policy.questions) <= 9:
            violations.append(
                Violation(
                    "question_count_out_of_range",
                    f"policy {policy.id} has {len(policy.questions)} questions; "
                    "evaluation policies carry 1 to 9",
                    policy_id=policy.id,
                )
            )

    for scenario in corpus.scenarios:
        policy = corpus.policies.get(scenario.policy_id)
        if policy is None:
            violations.append(
                Violation(
                    "dangling_policy_id",
                    f"scenario {scenario.id} references unknown policy {scenario.policy_id}",
                    scenario_id=scenario.id,
                )
            )
            continue
        if scenario.gold_answers is not None:
            declared = set(policy.question_ids)
            given = set(scenario.gold_answers)
            unknown = sorted(given - declared)
            if unknown:
                violations.append(
                    Violation(
                        "unknown_question_in_gold_answers",
                        f"scenario {scenario.id} answers unknown questions {unknown}",
                        scenario_id=scenario.id,
                        policy_id=policy.id,
                    )
                )
            missing = sorted(declared - given)
            if missing:
                violations.append(
                    Violation(
                        "incomplete_gold_answers",
                        f"scenario {scenario.id} is missing answers for {missing}",
                        scenario_id=scenario.id,
                        policy_id=policy.id,
                    )
                )
            tree = policy.tree
            if (
                tree is not None
                and scenario.gold_label is not None
                and not missing
                and not unknown
            ):
                inferred = evaluate(tree, scenario.gold_answers)
                if inferred is not scenario.gold_label:
                    violations.append(
                        Violation(
                            "label_mismatch",
                            f"scenario {scenario.id}: answers imply {inferred} "
                            f"but gold label is {scenario.gold_label}",
                            scenario_id=scenario.id,
                            policy_id=policy.id,
                        )
                    )
    return violations


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Aggregate counts; the per-policy average is over policies with scenarios."""
    if not corpus.policies and not corpus.scenarios:
        raise EmptyCorpusError("corpus has no policies or scenarios")
    scenario_counts: dict[str, int] = {}
    for scenario in corpus.scenarios:
        scenario_counts[scenario.policy_id] = scenario_counts.get(scenario.policy_id, 0) + 1

    with_scenarios = [p for p in corpus.policies.values() if scenario_counts.get(p.id)]
    if with_scenarios:
        avg = sum(len(p.questions) for p in with_scenarios) / len(with_scenarios)
    else:
        avg = 0.0

    label_histogram = {str(v): 0 for v in TriValue}
    answer_histogram = {str(v): 0 for v in TriValue}
    qa_count = 0
    qa_count_non_nei = 0
    for scenario in corpus.scenarios:
        if scenario.gold_label is not None:
            label_histogram[str(scenario.gold_label)] += 1
        for value in (scenario.gold_answers or {}).values():
            answer_histogram[str(value)] += 1
            qa_count += 1
            if value is not TriValue.NEI:
                qa_count_non_nei += 1

    return CorpusStats(
        policy_count=len(corpus.policies),
        scenario_count=len(corpus.scenarios),
        qa_count=qa_count,
        qa_count_non_nei=qa_count_non_nei,
        avg_qa_per_policy=avg,
        label_histogram=label_histogram,
        answer_histogram=answer_histogram,
    )


def policy_record(policy: Policy) -> dict:
    record: dict = {"id": policy.id, "text": policy.text}
    if policy.source_url is not None:
        record["source_url"] = policy.source_url
    record["questions"] = [{"id": q.id, "text": q.text} for q in policy.questions]
    if policy.tree_text is not None:
        record["tree"] = policy.tree_text
    record.update(policy.extra)
    return record


def scenario_record(scenario: Scenario) -> dict:
    record: dict = {
        "id": scenario.id,
        "policy_id": scenario.policy_id,
        "text": scenario.text,
    }
    if scenario.gold_label is not None:
        record["gold_label"] = str(scenario.gold_label)
    if scenario.gold_answers is not None:
        record["gold_answers"] = {q: str(v) for q, v in scenario.gold_answers.items()}
    record.update(scenario.extra)
    return record


def _write_jsonl(path: Path, records: Iterable[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")


def save_corpus(corpus: Corpus, policies_file, scenarios_file) -> None:
    _write_jsonl(Path(policies_file), (policy_record(p) for p in corpus.policies.values()))
    _write_jsonl(Path(scenarios_file), (scenario_record(s) for s in corpus.scenarios))


def save_corpus_dir(corpus: Corpus, directory) -> None:
    directory = Path(directory)
    save_corpus(corpus, directory / POLICIES_FILENAME, directory / SCENARIOS_FILENAME)


def save_qa_instances(instances: Iterable[QAInstance], path) -> None:
    _write_jsonl(Path(path), (i.as_dict() for i in instances))
