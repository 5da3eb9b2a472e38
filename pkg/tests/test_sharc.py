import json

import pytest

from pcdkit.corpus import load_corpus_dir
from pcdkit.logic import NEI, NO, YES
from pcdkit.sharc import (
    FollowUp,
    SharcUtterance,
    collect_policy_questions,
    convert_corpus,
    convert_utterances,
    find_continuation,
    load_sharc_file,
    normalize_text,
    to_entailment_instance,
    to_qa_instances,
)


def utterance(
    uid="u",
    tree="t",
    scenario="some scenario",
    history=(),
    answer="Yes",
    question="top question?",
):
    return SharcUtterance(
        utterance_id=uid,
        tree_id=tree,
        snippet="snippet",
        question=question,
        scenario=scenario,
        history=[FollowUp(q, a) for q, a in history],
        answer=answer,
    )


class TestCollectQuestions:
    def test_dedup_and_first_seen_order(self):
        group = [
            utterance(uid="a", answer="Do you rent?"),
            utterance(uid="b", answer="Do you rent?"),
            utterance(uid="c", answer="Are you a pensioner?"),
        ]
        questions = collect_policy_questions(group)
        assert [(q.id, q.text) for q in questions] == [
            ("Q0", "Do you rent?"),
            ("Q1", "Are you a pensioner?"),
        ]

    def test_terminal_only_group_has_no_questions(self):
        group = [utterance(uid="a", answer="Yes"), utterance(uid="b", answer="No")]
        assert collect_policy_questions(group) == []

    def test_history_only_question_is_included(self):
        group = [utterance(uid="a", history=[("Inside history only?", "Yes")], answer="No")]
        questions = collect_policy_questions(group)
        assert [q.text for q in questions] == ["Inside history only?"]

    def test_whitespace_variants_collapse(self):
        group = [
            utterance(uid="a", answer="Do  you   rent?"),
            utterance(uid="b", answer="Do you rent?"),
        ]
        assert len(collect_policy_questions(group)) == 1

    def test_mixed_groups_rejected(self):
        with pytest.raises(ValueError):
            collect_policy_questions([utterance(tree="a"), utterance(tree="b")])


class TestEntailmentHeuristic:
    def test_yes_with_empty_history(self):
        assert to_entailment_instance(utterance(answer="Yes")) == ("some scenario", YES)

    def test_no_with_empty_history(self):
        assert to_entailment_instance(utterance(answer="No")) == ("some scenario", NO)

    def test_history_forces_nei_even_for_terminal_answer(self):
        result = to_entailment_instance(
            utterance(history=[("Did you apply?", "Yes")], answer="No")
        )
        assert result == ("some scenario", NEI)

    def test_follow_up_answer_means_nei(self):
        assert to_entailment_instance(utterance(answer="Do you rent?")) == (
            "some scenario",
            NEI,
        )

    def test_empty_scenario_is_skipped(self):
        assert to_entailment_instance(utterance(scenario="   ")) is None

    def test_irrelevant_marker_is_skipped(self):
        assert to_entailment_instance(utterance(answer="Irrelevant")) is None


class TestQaHeuristic:
    def test_conversation_answer_carries_over_and_rest_pad_nei(self):
        group = [utterance(uid="a", answer="Q zero?"), utterance(uid="b", answer="Q one?")]
        questions = collect_policy_questions(group)
        target = utterance(uid="c", history=[("Q zero?", "Yes")], answer="No")
        pairs, conflicts = to_qa_instances(target, questions)
        assert pairs == [("Q0", YES), ("Q1", NEI)]
        assert conflicts == []

    def test_both_questions_answered(self):
        questions = collect_policy_questions(
            [utterance(uid="a", answer="Q zero?"), utterance(uid="b", answer="Q one?")]
        )
        target = utterance(
            uid="c", history=[("Q zero?", "No"), ("Q one?", "Yes")], answer="Yes"
        )
        pairs, _ = to_qa_instances(target, questions)
        assert pairs == [("Q0", NO), ("Q1", YES)]

    def test_empty_conversation_pads_everything(self):
        questions = collect_policy_questions([utterance(uid="a", answer="Q zero?")])
        pairs, _ = to_qa_instances(utterance(uid="b", answer="Yes"), questions)
        assert pairs == [("Q0", NEI)]

    def test_conflicting_answers_keep_first(self):
        questions = collect_policy_questions([utterance(uid="a", answer="Q zero?")])
        target = utterance(
            uid="c", history=[("Q zero?", "Yes"), ("Q zero?", "No")], answer="Yes"
        )
        pairs, conflicts = to_qa_instances(target, questions)
        assert pairs == [("Q0", YES)]
        assert conflicts == [
            {"scenario_id": "c", "question": "Q zero?", "kept": "yes", "dropped": "no"}
        ]


def test_find_continuation_recovers_the_follow_up_pair():
    asked = utterance(uid="a", answer="Do you rent?", scenario="same story")
    continuation = utterance(
        uid="b",
        scenario="same story",
        history=[("Do you rent?", "No")],
        answer="Yes",
    )
    unrelated = utterance(uid="c", scenario="different story", answer="Yes")
    found = find_continuation(asked, [asked, continuation, unrelated])
    assert found is not None
    assert normalize_text(found.answer) == "No"


def test_find_continuation_requires_matching_prefix():
    asked = utterance(
        uid="a", answer="Second question?", history=[("First question?", "Yes")]
    )
    wrong_prefix = utterance(
        uid="b",
        history=[("First question?", "No"), ("Second question?", "Yes")],
        answer="Yes",
    )
    assert find_continuation(asked, [asked, wrong_prefix]) is None


@pytest.fixture(scope="module")
def result(sharc_fixture_path):
    return convert_utterances(load_sharc_file(sharc_fixture_path))


class TestFixtureConversion:
    """Hand-derived expectations for the 12-utterance fixture."""

    def test_policies_and_their_questions(self, result):
        by_id = {p.id: p for p in result.policies}
        assert list(by_id) == ["tax_credit", "pension", "empty_q"]
        assert [(q.id, q.text) for q in by_id["tax_credit"].questions] == [
            ("Q0", "Do you rent your home?"),
            ("Q1", "Do you own your home?"),
        ]
        assert [(q.id, q.text) for q in by_id["pension"].questions] == [
            ("Q0", "Are you over state pension age?")
        ]
        assert by_id["empty_q"].questions == []
        assert by_id["tax_credit"].tree_text is None

    def test_entailment_labels(self, result):
        labels = {s.id: s.gold_label for s in result.scenarios}
        assert labels == {
            "u1": NEI,
            "u2": NEI,
            "u4": NO,
            "u5": NEI,
            "u7": YES,
            "u8": NEI,
            "u9": NEI,
            "u10": NEI,
            "u11": YES,
            "u12": NEI,
        }

    def test_qa_instances(self, result):
        table = {}
        for qa in result.qa_instances:
            table.setdefault(qa.scenario_id, {})[qa.question_id] = qa.answer
        assert table == {
            "u1": {"Q0": YES, "Q1": NEI},  # recovered from the continuation turn
            "u2": {"Q0": YES, "Q1": NEI},
            "u4": {"Q0": NEI, "Q1": NEI},
            "u5": {"Q0": NO, "Q1": YES},
            "u7": {"Q0": NEI},
            "u8": {"Q0": NO},
            "u9": {"Q0": NO},  # recovered from the continuation turn
            "u10": {"Q0": NO},
            "u12": {"Q0": YES, "Q1": NEI},
        }

    def test_report_accounting(self, result):
        report = result.report
        assert report.utterances_total == 12
        assert report.policy_count == 3
        assert report.policies_with_scenarios == 3
        assert report.policies_without_questions == ["empty_q"]
        assert report.scenario_count == 10
        assert report.qa_instance_count == 14
        assert report.qa_instance_count_non_nei == 8
        assert report.skipped_empty_scenario == 1
        assert report.skipped_irrelevant_answer == 1
        assert report.recovered_continuations == 2
        assert report.unrecovered_continuations == 0
        assert report.answer_conflicts == [
            {
                "scenario_id": "u12",
                "question": "Do you rent your home?",
                "kept": "yes",
                "dropped": "no",
            }
        ]

    def test_qa_count_matches_policy_question_sets(self, result):
        sizes = {p.id: len(p.questions) for p in result.policies}
        per_scenario = {}
        for qa in result.qa_instances:
            per_scenario[qa.scenario_id] = per_scenario.get(qa.scenario_id, 0) + 1
        for scenario in result.scenarios:
            assert per_scenario.get(scenario.id, 0) == sizes[scenario.policy_id]


def test_conversion_is_deterministic(sharc_fixture_path, tmp_path):
    first = tmp_path / "first"
    second = tmp_path / "second"
    convert_corpus(sharc_fixture_path, first)
    convert_corpus(sharc_fixture_path, second)
    for name in (
        "policies.jsonl",
        "scenarios.jsonl",
        "qa_instances.jsonl",
        "conversion_report.json",
    ):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_written_corpus_loads_cleanly(sharc_fixture_path, tmp_path):
    convert_corpus(sharc_fixture_path, tmp_path)
    corpus = load_corpus_dir(tmp_path)
    assert corpus.violations == []
    assert len(corpus.scenarios) == 10
    qa_lines = (tmp_path / "qa_instances.jsonl").read_text().splitlines()
    assert len(qa_lines) == 14
    assert json.loads(qa_lines[0]) == {
        "scenario_id": "u1",
        "question_id": "Q0",
        "answer": "yes",
    }


def test_jsonl_input_is_accepted(sharc_fixture_path, tmp_path):
    records = json.loads(sharc_fixture_path.read_text())
    jsonl = tmp_path / "records.jsonl"
    jsonl.write_text("\n".join(json.dumps(r) for r in records), encoding="utf-8")
    assert len(load_sharc_file(jsonl)) == 12
