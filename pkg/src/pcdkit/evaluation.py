"""End-to-end compliance evaluation and the metric suite.

`run_pcd` pipes an answer provider through the policy trees, either asking
every question or short-circuiting as soon as the verdict is fixed. Metrics:
macro-accuracy (mean per-class recall) pooled over scenarios and averaged per
policy, Kendall tau-b between policy size and per-policy accuracy, and Cohen's
kappa for rater agreement. Tau is computed by exact integer pair counting so
tests can match it against a brute-force count bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .corpus import Corpus
from .errors import CoverageMismatchError, PolicyWithoutTreeError
from .interview import PRIOR_UNIFORM, select_next_question
from .logic import Node, TriValue, evaluate, resolve_partial, tree_questions
from .oracles import AnswerProvider

MODES = ("all-questions", "short-circuit")


@dataclass
class PredictionRecord:
    scenario_id: str
    policy_id: str
    predicted_label: TriValue
    gold_label: TriValue | None
    predicted_answers: dict[str, TriValue]
    gold_answers: dict[str, TriValue] | None
    resolved_by: tuple[str, ...]  # questions actually asked, in ask order

    def as_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "policy_id": self.policy_id,
            "predicted_label": str(self.predicted_label),
            "gold_label": str(self.gold_label) if self.gold_label else None,
            "predicted_answers": {q: str(v) for q, v in self.predicted_answers.items()},
            "gold_answers": (
                {q: str(v) for q, v in self.gold_answers.items()}
                if self.gold_answers is not None
                else None
            ),
            "resolved_by": list(self.resolved_by),
        }


def short_circuit_evaluate(
    tree: Node,
    ask: Callable[[str], TriValue],
    strategy: str = "order",
    prior: tuple[float, float, float] = PRIOR_UNIFORM,
) -> tuple[TriValue, list[str], dict[str, TriValue]]:
    """Ask only still-relevant questions until the verdict is fixed.

    Returns (label, asked-in-order, answers). By information monotonicity the
    label always equals full evaluation of the provider's answers.
    """
    answers: dict[str, TriValue] = {}
    asked: list[str] = []
    while True:
        question = select_next_question(tree, answers, strategy, prior)
        if question is None:
            return resolve_partial(tree, answers).label, asked, answers
        answers[question] = ask(question)
        asked.append(question)


def run_pcd(
    corpus: Corpus,
    provider: AnswerProvider,
    mode: str = "all-questions",
    strategy: str = "order",
    max_workers: int = 1,
) -> list[PredictionRecord]:
    """Predict a compliance label for every scenario in the corpus.

    In "all-questions" mode every tree question is asked and the tree is
    evaluated on the full answer set; in "short-circuit" mode questions are
    asked one at a time (per `strategy`) and the run stops as soon as the
    partial resolution is fixed. Both modes produce the same labels for a
    deterministic provider.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode: {mode!r}; expected one of {MODES}")
    untreed = sorted(
        {s.policy_id for s in corpus.scenarios if corpus.policy(s.policy_id).tree is None}
    )
    if untreed:
        raise PolicyWithoutTreeError(untreed[0])

    def predict(scenario) -> PredictionRecord:
        policy = corpus.policy(scenario.policy_id)
        tree = policy.tree
        texts = {q.id: q.text for q in policy.questions}

        def ask(question_id: str) -> TriValue:
            return provider.answer(
                scenario.text,
                texts.get(question_id, question_id),
                scenario.id,
                question_id,
            ).value

        if mode == "all-questions":
            order = list(tree_questions(tree))
            answers = {q: ask(q) for q in order}
            label = evaluate(tree, answers)
            asked = order
        else:
            label, asked, answers = short_circuit_evaluate(tree, ask, strategy)
        return PredictionRecord(
            scenario_id=scenario.id,
            policy_id=scenario.policy_id,
            predicted_label=label,
            gold_label=scenario.gold_label,
            predicted_answers=answers,
            gold_answers=scenario.gold_answers,
            resolved_by=tuple(asked),
        )

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(predict, corpus.scenarios))
    return [predict(s) for s in corpus.scenarios]


def per_class_recall(
    preds: Sequence[TriValue], golds: Sequence[TriValue]
) -> dict[TriValue, float]:
    """Recall for each class present in the golds."""
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(golds)} golds")
    if not golds:
        raise ValueError("cannot compute recall on empty inputs")
    totals: dict[TriValue, int] = {}
    hits: dict[TriValue, int] = {}
    for pred, gold in zip(preds, golds):
        totals[gold] = totals.get(gold, 0) + 1
        if pred is gold:
            hits[gold] = hits.get(gold, 0) + 1
    return {label: hits.get(label, 0) / total for label, total in totals.items()}


def macro_accuracy(preds: Sequence[TriValue], golds: Sequence[TriValue]) -> float:
    """Unweighted mean of per-class recall over the classes present in golds."""
    recalls = per_class_recall(preds, golds)
    return sum(recalls.values()) / len(recalls)


@dataclass
class PerPolicyRow:
    policy_id: str
    scenario_count: int
    question_count: int | None
    macro_accuracy: float

    def as_dict(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "scenario_count": self.scenario_count,
            "question_count": self.question_count,
            "macro_accuracy": self.macro_accuracy,
        }


@dataclass
class PolicyAverages:
    value: float
    rows: list[PerPolicyRow]
    excluded: list[str] = field(default_factory=list)  # policies with no usable records


def macro_accuracy_over_policies(
    records: Sequence[PredictionRecord],
    question_counts: Mapping[str, int] | None = None,
    all_policy_ids: Sequence[str] | None = None,
) -> PolicyAverages:
    """Per-policy macro-accuracy, then an unweighted mean across policies.

    Policies contributing no labeled records are excluded from the mean and
    listed in `excluded`.
    """
    grouped: dict[str, tuple[list[TriValue], list[TriValue]]] = {}
    for record in records:
        if record.gold_label is None:
            continue
        preds, golds = grouped.setdefault(record.policy_id, ([], []))
        preds.append(record.predicted_label)
        golds.append(record.gold_label)
    if not grouped:
        raise ValueError("no labeled records to average over policies")

    rows = [
        PerPolicyRow(
            policy_id=policy_id,
            scenario_count=len(golds),
            question_count=(question_counts or {}).get(policy_id),
            macro_accuracy=macro_accuracy(preds, golds),
        )
        for policy_id, (preds, golds) in grouped.items()
    ]
    excluded = [p for p in (all_policy_ids or []) if p not in grouped]
    value = sum(row.macro_accuracy for row in rows) / len(rows)
    return PolicyAverages(value=value, rows=rows, excluded=excluded)


@dataclass(frozen=True)
class TauResult:
    tau: float | None
    p_value: float | None
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {"tau": self.tau, "p_value": self.p_value, "degenerate": self.degenerate}


def kendall_tau(pairs: Sequence[tuple[float, float]]) -> TauResult:
    """Kendall tau-b with a two-sided normal-approximation p-value.

    Tie-corrected: policy question counts tie heavily. Pair counting is exact
    integer arithmetic. A constant x or y sequence leaves tau undefined and is
    reported as a degenerate result instead of a number.
    """
    points = list(pairs)
    n = len(points)
    if n < 2:
        raise ValueError("kendall_tau needs at least two pairs")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        return TauResult(None, None, degenerate=True)

    concordant = 0
    discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (xs[i] > xs[j]) - (xs[i] < xs[j])
            dy = (ys[i] > ys[j]) - (ys[i] < ys[j])
            product = dx * dy
            if product > 0:
                concordant += 1
            elif product < 0:
                discordant += 1

    def tie_counts(values) -> list[int]:
        counts: dict = {}
        for value in values:
            counts[value] = counts.get(value, 0) + 1
        return [c for c in counts.values() if c > 1]

    x_ties = tie_counts(xs)
    y_ties = tie_counts(ys)
    n0 = n * (n - 1) // 2
    n1 = sum(t * (t - 1) // 2 for t in x_ties)
    n2 = sum(t * (t - 1) // 2 for t in y_ties)
    tau = (concordant - discordant) / math.sqrt((n0 - n1) * (n0 - n2))

    # Normal approximation with tie correction for var(C - D).
    v0 = n * (n - 1) * (2 * n + 5)
    vt = sum(t * (t - 1) * (2 * t + 5) for t in x_ties)
    vu = sum(u * (u - 1) * (2 * u + 5) for u in y_ties)
    v1 = (
        sum(t * (t - 1) for t in x_ties)
        * sum(u * (u - 1) for u in y_ties)
        / (2.0 * n * (n - 1))
    )
    v2 = (
        sum(t * (t - 1) * (t - 2) for t in x_ties)
        * sum(u * (u - 1) * (u - 2) for u in y_ties)
        / (9.0 * n * (n - 1) * (n - 2))
    )
    variance = (v0 - vt - vu) / 18.0 + v1 + v2
    if variance <= 0:
        return TauResult(tau, None, degenerate=True)
    z = (concordant - discordant) / math.sqrt(variance)
    p_value = math.erfc(abs(z) / math.sqrt(2.0))
    return TauResult(tau, p_value)


@dataclass(frozen=True)
class KappaDetail:
    value: float
    observed: float
    expected: float
    degenerate: bool = False


def cohen_kappa_detail(
    ratings_a: Sequence[TriValue], ratings_b: Sequence[TriValue]
) -> KappaDetail:
    """(p_o - p_e) / (1 - p_e) with marginal-product chance agreement.

    When chance agreement is 1 (both raters constant and identical) the
    textbook formula is undefined; that case reports 1.0 for perfect observed
    agreement and 0.0 otherwise, flagged as degenerate.
    """
    a = list(ratings_a)
    b = list(ratings_b)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)} ratings")
    if not a:
        raise ValueError("cannot compute agreement on empty inputs")
    n = len(a)
    observed = sum(x is y for x, y in zip(a, b)) / n
    counts_a: dict[TriValue, int] = {}
    counts_b: dict[TriValue, int] = {}
    for x in a:
        counts_a[x] = counts_a.get(x, 0) + 1
    for y in b:
        counts_b[y] = counts_b.get(y, 0) + 1
    expected = sum(
        (counts_a.get(label, 0) / n) * (counts_b.get(label, 0) / n)
        for label in set(counts_a) | set(counts_b)
    )
    if expected >= 1.0 - 1e-12:
        return KappaDetail(
            1.0 if observed >= 1.0 - 1e-12 else 0.0, observed, expected, degenerate=True
        )
    return KappaDetail((observed - expected) / (1.0 - expected), observed, expected)


def cohen_kappa(ratings_a: Sequence[TriValue], ratings_b: Sequence[TriValue]) -> float:
    return cohen_kappa_detail(ratings_a, ratings_b).value


@dataclass
class RaterAnswers:
    """One rater's answers keyed by (scenario_id, question_id), plus optional
    scenario-level compliance judgments."""

    answers: dict[tuple[str, str], TriValue]
    labels: dict[str, TriValue] | None = None


@dataclass
class AgreementReport:
    kappa_questions: float
    kappa_inferred: float
    kappa_entailment: float | None
    inferred_at_least_questions: bool
    scenario_count: int
    answer_count: int

    def as_dict(self) -> dict:
        return {
            "kappa_questions": self.kappa_questions,
            "kappa_inferred": self.kappa_inferred,
            "kappa_entailment": self.kappa_entailment,
            "inferred_at_least_questions": self.inferred_at_least_questions,
            "scenario_count": self.scenario_count,
            "answer_count": self.answer_count,
        }


def agreement_study(
    corpus: Corpus, rater_a: RaterAnswers, rater_b: RaterAnswers
) -> AgreementReport:
    """Agreement on raw answers vs agreement on tree-inferred labels.

    Inferred-label agreement tends to exceed raw-question agreement because
    disagreements on questions the tree has already short-circuited cannot
    change the verdict; that relationship is reported, never assumed.
    """
    keys_a = set(rater_a.answers)
    keys_b = set(rater_b.answers)
    if keys_a != keys_b:
        raise CoverageMismatchError(
            "raters answered different question sets",
            detail={
                "only_a": sorted(map(list, keys_a - keys_b)),
                "only_b": sorted(map(list, keys_b - keys_a)),
            },
        )
    keys = sorted(keys_a)
    kappa_questions = cohen_kappa(
        [rater_a.answers[k] for k in keys], [rater_b.answers[k] for k in keys]
    )

    scenario_ids = sorted({scenario_id for scenario_id, _ in keys})
    inferred_a: list[TriValue] = []
    inferred_b: list[TriValue] = []
    for scenario_id in scenario_ids:
        scenario = corpus.scenario(scenario_id)
        policy = corpus.policy(scenario.policy_id)
        tree = policy.tree
        if tree is None:
            raise PolicyWithoutTreeError(policy.id)
        needed = tree_questions(tree)
        answers_a = {}
        answers_b = {}
        missing = []
        for question_id in needed:
            key = (scenario_id, question_id)
            if key not in rater_a.answers:
                missing.append(question_id)
                continue
            answers_a[question_id] = rater_a.answers[key]
            answers_b[question_id] = rater_b.answers[key]
        if missing:
            raise CoverageMismatchError(
                f"scenario {scenario_id} is missing rated answers for {missing}",
                detail={"scenario_id": scenario_id, "question_ids": missing},
            )
        inferred_a.append(evaluate(tree, answers_a))
        inferred_b.append(evaluate(tree, answers_b))
    kappa_inferred = cohen_kappa(inferred_a, inferred_b)

    kappa_entailment = None
    if rater_a.labels is not None and rater_b.labels is not None:
        if set(rater_a.labels) != set(rater_b.labels):
            raise CoverageMismatchError("raters labeled different scenario sets")
        label_ids = sorted(rater_a.labels)
        kappa_entailment = cohen_kappa(
            [rater_a.labels[s] for s in label_ids],
            [rater_b.labels[s] for s in label_ids],
        )

    return AgreementReport(
        kappa_questions=kappa_questions,
        kappa_inferred=kappa_inferred,
        kappa_entailment=kappa_entailment,
        inferred_at_least_questions=kappa_inferred >= kappa_questions,
        scenario_count=len(scenario_ids),
        answer_count=len(keys),
    )


@dataclass
class EvalReport:
    macro_accuracy_over_scenarios: float | None
    macro_accuracy_over_policies: float | None
    per_label_accuracy: dict[str, float]
    qa_macro_accuracy: float | None
    qa_per_label_accuracy: dict[str, float]
    per_policy: list[PerPolicyRow]
    excluded_policies: list[str]
    kendall_tau: TauResult
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "macro_accuracy_over_scenarios": self.macro_accuracy_over_scenarios,
            "macro_accuracy_over_policies": self.macro_accuracy_over_policies,
            "per_label_accuracy": self.per_label_accuracy,
            "qa_macro_accuracy": self.qa_macro_accuracy,
            "qa_per_label_accuracy": self.qa_per_label_accuracy,
            "per_policy": [row.as_dict() for row in self.per_policy],
            "excluded_policies": self.excluded_policies,
            "kendall_tau": self.kendall_tau.as_dict(),
            "metadata": self.metadata,
        }


def build_report(
    corpus: Corpus,
    records: Sequence[PredictionRecord],
    metadata: dict | None = None,
) -> EvalReport:
    """Assemble the full metric suite from prediction records.

    QA metrics pool every asked question that has a gold answer; in
    short-circuit runs the skipped questions simply do not contribute.
    """
    labeled = [r for r in records if r.gold_label is not None]
    preds = [r.predicted_label for r in labeled]
    golds = [r.gold_label for r in labeled]
    macro_scenarios = macro_accuracy(preds, golds) if labeled else None
    per_label = (
        {str(k): v for k, v in per_class_recall(preds, golds).items()} if labeled else {}
    )

    qa_preds: list[TriValue] = []
    qa_golds: list[TriValue] = []
    for record in records:
        if not record.gold_answers:
            continue
        for question_id, predicted in record.predicted_answers.items():
            gold = record.gold_answers.get(question_id)
            if gold is not None:
                qa_preds.append(predicted)
                qa_golds.append(gold)
    qa_macro = macro_accuracy(qa_preds, qa_golds) if qa_golds else None
    qa_per_label = (
        {str(k): v for k, v in per_class_recall(qa_preds, qa_golds).items()}
        if qa_golds
        else {}
    )

    question_counts = {p.id: len(p.questions) for p in corpus.policies.values()}
    averages = macro_accuracy_over_policies(
        labeled, question_counts, list(corpus.policies)
    )
    tau_pairs = [
        (row.question_count, row.macro_accuracy)
        for row in averages.rows
        if row.question_count is not None
    ]
    if len(tau_pairs) >= 2:
        tau = kendall_tau(tau_pairs)
    else:
        tau = TauResult(None, None, degenerate=True)

    return EvalReport(
        macro_accuracy_over_scenarios=macro_scenarios,
        macro_accuracy_over_policies=averages.value,
        per_label_accuracy=per_label,
        qa_macro_accuracy=qa_macro,
        qa_per_label_accuracy=qa_per_label,
        per_policy=averages.rows,
        excluded_policies=averages.excluded,
        kendall_tau=tau,
        metadata=metadata or {},
    )
