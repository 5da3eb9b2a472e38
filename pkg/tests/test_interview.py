import itertools
import random

import pytest

from corpusgen import build_synthetic_corpus
from kleene_reference import TRI, brute_force_labels, brute_force_relevant
from pcdkit.corpus import Policy, Question
from pcdkit.errors import (
    DuplicateAnswerError,
    IrrelevantQuestionError,
    PolicyWithoutTreeError,
    SessionClosedError,
    SessionResolvedError,
    SessionStoreError,
    UnknownQuestionError,
)
from pcdkit.interview import (
    SessionStatus,
    SessionStore,
    abandon,
    missing_information,
    next_question,
    record_answer,
    select_next_question,
    start_session,
)
from pcdkit.logic import NEI, NO, YES, TriValue, parse_tree, tree_questions


def make_policy(tree_text, policy_id="p"):
    tree = parse_tree(tree_text)
    questions = [Question(q, f"Question {q}?") for q in tree_questions(tree)]
    return Policy(policy_id, f"Policy {policy_id}", questions, tree_text=tree_text)


FIG_TREE = "(Q0 OR Q1 OR Q2) AND Q3"


class TestStartSession:
    def test_fresh_session_is_open_and_empty(self):
        session = start_session(make_policy("Q0 AND Q1"))
        assert session.status is SessionStatus.IN_PROGRESS
        assert session.transcript == []
        assert session.resolution is None

    def test_single_question_policy_asks_that_question(self):
        session = start_session(make_policy("Q0"))
        assert next_question(session) == "Q0"

    def test_policy_without_tree_rejected(self):
        bare = Policy("p", "text", [Question("Q0", "?")])
        with pytest.raises(PolicyWithoutTreeError):
            start_session(bare)

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValueError):
            start_session(make_policy("Q0"), strategy="psychic")

    def test_session_ids_are_long_random_tokens(self):
        ids = {start_session(make_policy("Q0")).session_id for _ in range(20)}
        assert len(ids) == 20
        assert all(len(i) == 32 for i in ids)


def naive_expected_questions(tree, answers, memo=None):
    """Independent lookahead: optimal expected remaining count, uniform prior."""
    if memo is None:
        memo = {}
    key = tuple(sorted(answers.items(), key=lambda kv: kv[0]))
    if key in memo:
        return memo[key]
    if len(brute_force_labels(tree, answers)) == 1:
        memo[key] = (0.0, None)
        return memo[key]
    best = None
    best_question = None
    for question in tree_questions(tree):
        if question not in brute_force_relevant(tree, answers):
            continue
        cost = 1.0
        for value in TRI:
            cost += naive_expected_questions(tree, {**answers, question: value}, memo)[0] / 3.0
        if best is None or cost < best - 1e-9:
            best, best_question = cost, question
    memo[key] = (best, best_question)
    return memo[key]


class TestNextQuestion:
    def test_greedy_opens_with_the_dominant_gate(self):
        tree = parse_tree(FIG_TREE)
        expected = naive_expected_questions(tree, {})
        assert expected[1] == "Q3"
        session = start_session(make_policy(FIG_TREE), strategy="greedy")
        assert next_question(session) == "Q3"

    def test_greedy_matches_independent_lookahead_everywhere(self):
        for tree_text in ("Q0 AND Q1 OR Q2", "NOT Q0 OR (Q1 AND Q2)", FIG_TREE):
            tree = parse_tree(tree_text)
            for given in ({}, {"Q0": NEI}, {"Q1": YES}):
                expected = naive_expected_questions(tree, dict(given))
                got = select_next_question(tree, dict(given), "greedy")
                assert got == expected[1], (tree_text, given)

    def test_conjunction_resolves_after_a_no(self):
        session = start_session(make_policy("Q0 AND Q1"))
        record_answer(session, "Q0", NO)
        assert session.status is SessionStatus.RESOLVED
        assert session.resolution is NO
        assert [e.question_id for e in session.transcript] == ["Q0"]

    def test_order_strategy_moves_to_the_next_relevant_question(self):
        session = start_session(make_policy("Q0 OR Q1"))
        record_answer(session, "Q0", NEI)
        assert next_question(session) == "Q1"

    def test_next_question_on_resolved_session_errors(self):
        session = start_session(make_policy("Q0"))
        record_answer(session, "Q0", YES)
        with pytest.raises(SessionResolvedError):
            next_question(session)


class TestRecordAnswer:
    def test_last_relevant_answer_resolves_to_full_evaluation(self):
        session = start_session(make_policy("Q0 AND Q1"))
        record_answer(session, "Q0", YES)
        record_answer(session, "Q1", YES)
        assert session.status is SessionStatus.RESOLVED
        assert session.resolution is YES

    def test_all_nei_resolves_to_nei(self):
        session = start_session(make_policy("Q0 AND Q1"))
        record_answer(session, "Q0", NEI)
        record_answer(session, "Q1", NEI)
        assert session.resolution is NEI

    def test_duplicate_answer_rejected(self):
        session = start_session(make_policy("Q0 AND Q1"))
        record_answer(session, "Q0", YES)
        with pytest.raises(DuplicateAnswerError):
            record_answer(session, "Q0", NO)

    def test_unknown_question_rejected(self):
        session = start_session(make_policy("Q0 AND Q1"))
        with pytest.raises(UnknownQuestionError):
            record_answer(session, "Q9", YES)

    def test_irrelevant_question_rejected(self):
        session = start_session(make_policy(FIG_TREE))
        record_answer(session, "Q0", YES)  # disjunction satisfied; Q1/Q2 dead
        with pytest.raises(IrrelevantQuestionError):
            record_answer(session, "Q1", YES)

    def test_answer_after_resolution_rejected(self):
        session = start_session(make_policy("Q0"))
        record_answer(session, "Q0", NO)
        with pytest.raises(SessionResolvedError):
            record_answer(session, "Q0", YES)

    def test_abandoned_session_rejects_answers(self):
        session = start_session(make_policy("Q0 AND Q1"))
        abandon(session)
        with pytest.raises(SessionClosedError):
            record_answer(session, "Q0", YES)


class TestMissingInformation:
    def test_unresolved_nei_gate_is_the_missing_piece(self):
        session = start_session(make_policy(FIG_TREE))
        record_answer(session, "Q0", YES)
        record_answer(session, "Q3", NEI)
        assert session.status is SessionStatus.RESOLVED
        assert session.resolution is NEI
        assert missing_information(session) == frozenset({"Q3"})

    def test_resolved_yes_has_nothing_missing(self):
        session = start_session(make_policy("Q0"))
        record_answer(session, "Q0", YES)
        assert missing_information(session) == frozenset()

    def test_conjunction_with_nei_second_leg(self):
        session = start_session(make_policy("Q0 AND Q1"))
        record_answer(session, "Q0", YES)
        record_answer(session, "Q1", NEI)
        assert missing_information(session) == frozenset({"Q1"})

    def test_in_progress_reports_current_relevant_set(self):
        session = start_session(make_policy(FIG_TREE))
        record_answer(session, "Q0", YES)
        assert missing_information(session) == frozenset({"Q3"})

    def test_non_pivotal_nei_answers_are_not_reported(self):
        session = start_session(make_policy("Q0 AND Q1"))
        record_answer(session, "Q0", NEI)
        record_answer(session, "Q1", NO)
        assert session.resolution is NO
        assert missing_information(session) == frozenset()


class TestGoldReplay:
    @pytest.mark.parametrize("strategy", ["order", "greedy"])
    def test_every_fixture_scenario_resolves_to_its_gold_label(
        self, consistent_corpus, strategy
    ):
        for scenario in consistent_corpus.scenarios:
            policy = consistent_corpus.policy(scenario.policy_id)
            session = start_session(policy, strategy=strategy)
            while session.status is SessionStatus.IN_PROGRESS:
                question = next_question(session)
                if isinstance(question, TriValue):
                    break
                record_answer(session, question, scenario.gold_answers[question])
            assert session.resolution is scenario.gold_label

    @pytest.mark.parametrize("strategy", ["order", "greedy"])
    def test_synthetic_corpus_replay(self, strategy):
        corpus = build_synthetic_corpus(policy_count=8, scenarios_per_policy=3, seed=5)
        for scenario in corpus.scenarios:
            policy = corpus.policy(scenario.policy_id)
            session = start_session(policy, strategy=strategy)
            while session.status is SessionStatus.IN_PROGRESS:
                question = next_question(session)
                if isinstance(question, TriValue):
                    break
                record_answer(session, question, scenario.gold_answers[question])
            assert session.resolution is scenario.gold_label


def test_greedy_expected_count_never_beats_order_backwards():
    """Exhaustive simulation: mean questions over all completions, k <= 4."""
    trees = [
        "Q0 AND Q1 AND Q2",
        "Q0 OR (Q1 AND Q2)",
        "NOT Q0 OR Q1",
        "Q0 AND (Q1 OR Q2)",
        FIG_TREE,
        "Q0 AND (Q1 OR NOT Q2) AND Q3",
        "(Q0 OR Q1) AND (Q2 OR Q3)",
    ]
    for tree_text in trees:
        policy = make_policy(tree_text)
        qids = tree_questions(policy.tree)
        totals = {"order": 0, "greedy": 0}
        combos = list(itertools.product(TRI, repeat=len(qids)))
        for strategy in totals:
            for combo in combos:
                truth = dict(zip(qids, combo))
                session = start_session(policy, strategy=strategy)
                while session.status is SessionStatus.IN_PROGRESS:
                    question = next_question(session)
                    if isinstance(question, TriValue):
                        break
                    record_answer(session, question, truth[question])
                totals[strategy] += len(session.transcript)
        assert totals["greedy"] <= totals["order"], tree_text


def test_randomized_sessions_never_ask_irrelevant_questions():
    rng = random.Random(77)
    tree_pool = [
        "Q0 AND Q1",
        "Q0 OR Q1 OR Q2",
        FIG_TREE,
        "NOT Q0 OR (Q1 AND Q2)",
        "Q0 AND (Q1 OR NOT Q2) AND Q3",
    ]
    for i in range(150):
        policy = make_policy(rng.choice(tree_pool), policy_id=f"p{i}")
        strategy = rng.choice(("order", "greedy"))
        session = start_session(policy, strategy=strategy)
        while session.status is SessionStatus.IN_PROGRESS:
            question = next_question(session)
            if isinstance(question, TriValue):
                break
            relevant = brute_force_relevant(policy.tree, session.answers())
            assert question in relevant
            record_answer(session, question, rng.choice(TRI))


class TestSessionStore:
    def test_replay_reproduces_sessions(self, tmp_path):
        policy = make_policy(FIG_TREE, policy_id="fig")
        store = SessionStore(tmp_path / "events.jsonl")
        session = start_session(policy, strategy="greedy")
        store.record_created(session)
        record_answer(session, "Q3", NO)
        store.record_answer(session, session.transcript[-1])
        store.record_resolution(session)

        rebuilt = store.replay({"fig": policy})
        twin = rebuilt[session.session_id]
        assert twin.status is SessionStatus.RESOLVED
        assert twin.resolution is NO
        assert [e.question_id for e in twin.transcript] == ["Q3"]
        assert twin.strategy == "greedy"

    def test_replay_verifies_recorded_resolutions(self, tmp_path):
        path = tmp_path / "events.jsonl"
        policy = make_policy("Q0", policy_id="p0")
        store = SessionStore(path)
        session = start_session(policy, session_id="abc")
        store.record_created(session)
        record_answer(session, "Q0", YES)
        store.record_answer(session, session.transcript[-1])
        with path.open("a") as handle:
            handle.write(
                '{"event": "resolved", "session_id": "abc", "label": "no", "ts": 1}\n'
            )
        with pytest.raises(SessionStoreError):
            store.replay({"p0": policy})

    def test_replay_of_abandoned_session(self, tmp_path):
        policy = make_policy("Q0 AND Q1", policy_id="p0")
        store = SessionStore(tmp_path / "events.jsonl")
        session = start_session(policy)
        store.record_created(session)
        abandon(session)
        store.record_abandoned(session)
        rebuilt = store.replay({"p0": policy})
        assert rebuilt[session.session_id].status is SessionStatus.ABANDONED

    def test_missing_store_file_replays_empty(self, tmp_path):
        store = SessionStore(tmp_path / "never_written.jsonl")
        assert store.replay({}) == {}
