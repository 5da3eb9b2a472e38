"""Guided-interview sessions: ask only questions that can still change the verdict.

A session walks a policy's questions one at a time, recomputing the partial
resolution after each answer and stopping the moment the verdict is fixed.
Two selection strategies are available: `order` takes the first still-relevant
question in tree order; `greedy` minimizes the expected number of further
answers under a configurable prior over {yes, no, nei}, computed by exhaustive
lookahead (policies carry at most nine questions, so this stays tractable).
"""

from __future__ import annotations

import json
import secrets
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping

from .corpus import Policy
from .errors import (
    DuplicateAnswerError,
    IrrelevantQuestionError,
    PolicyWithoutTreeError,
    SessionClosedError,
    SessionResolvedError,
    SessionStoreError,
    UnknownQuestionError,
)
from .logic import (
    NEI,
    NO,
    YES,
    Node,
    Resolution,
    TriValue,
    resolve_partial,
    tree_questions,
)

STRATEGIES = ("order", "greedy")
PRIOR_UNIFORM = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)  # (yes, no, nei)

_PRIOR_ORDER = (YES, NO, NEI)


class SessionStatus(str, Enum):
    IN_PROGRESS = "in_progress"
    RESOLVED = "resolved"
    ABANDONED = "abandoned"


@dataclass
class TranscriptEntry:
    question_id: str
    answer: TriValue
    timestamp: float


@dataclass
class Session:
    session_id: str
    policy: Policy
    strategy: str
    prior: tuple[float, float, float]
    transcript: list[TranscriptEntry] = field(default_factory=list)
    status: SessionStatus = SessionStatus.IN_PROGRESS
    resolution: TriValue | None = None
    created_at: float = 0.0
    updated_at: float = 0.0

    @property
    def policy_id(self) -> str:
        return self.policy.id

    def answers(self) -> dict[str, TriValue]:
        return {entry.question_id: entry.answer for entry in self.transcript}

    def resolution_state(self) -> Resolution:
        return resolve_partial(self.policy.tree, self.answers())


def start_session(
    policy: Policy,
    strategy: str = "order",
    prior: tuple[float, float, float] = PRIOR_UNIFORM,
    session_id: str | None = None,
    clock: Callable[[], float] = time.time,
) -> Session:
    if policy.tree is None:
        raise PolicyWithoutTreeError(policy.id)
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy: {strategy!r}")
    now = clock()
    return Session(
        session_id=session_id or secrets.token_hex(16),
        policy=policy,
        strategy=strategy,
        prior=tuple(prior),
        created_at=now,
        updated_at=now,
    )


def select_next_question(
    tree: Node,
    answers: Mapping[str, TriValue],
    strategy: str = "order",
    prior: tuple[float, float, float] = PRIOR_UNIFORM,
) -> str | None:
    """Next question to ask under the strategy, or None when already resolved."""
    resolution = resolve_partial(tree, answers)
    if resolution.resolved:
        return None
    in_order = [q for q in tree_questions(tree) if q in resolution.relevant]
    if strategy == "order":
        return in_order[0]
    if strategy == "greedy":
        _, best = _expected_remaining(tree, _state_key(answers), tuple(prior))
        return best
    raise ValueError(f"unknown strategy: {strategy!r}")


def _state_key(answers: Mapping[str, TriValue]) -> tuple[tuple[str, TriValue], ...]:
    return tuple(sorted(answers.items(), key=lambda kv: kv[0]))


_greedy_cache: dict[tuple, tuple[float, str | None]] = {}


def _expected_remaining(
    tree: Node,
    state: tuple[tuple[str, TriValue], ...],
    prior: tuple[float, float, float],
) -> tuple[float, str | None]:
    """Minimum expected number of further answers, with the best first question.

    Answers to unanswered questions are modeled as independent draws from
    `prior`; the recursion assumes optimal play afterwards. Ties break toward
    tree order.
    """
    if len(_greedy_cache) > 400_000:
        _greedy_cache.clear()
    cache_key = (tree, state, prior)
    hit = _greedy_cache.get(cache_key)
    if hit is not None:
        return hit

    answers = dict(state)
    resolution = resolve_partial(tree, answers)
    if resolution.resolved:
        result = (0.0, None)
        _greedy_cache[cache_key] = result
        return result

    best_cost: float | None = None
    best_question: str | None = None
    for question in (q for q in tree_questions(tree) if q in resolution.relevant):
        cost = 1.0
        for value, probability in zip(_PRIOR_ORDER, prior):
            if probability == 0.0:
                continue
            child = _state_key({**answers, question: value})
            cost += probability * _expected_remaining(tree, child, prior)[0]
        if best_cost is None or cost < best_cost - 1e-9:
            best_cost, best_question = cost, question
    result = (best_cost if best_cost is not None else 0.0, best_question)
    _greedy_cache[cache_key] = result
    return result


def _require_open(session: Session) -> None:
    if session.status is SessionStatus.RESOLVED:
        raise SessionResolvedError(
            f"session {session.session_id} is already resolved ({session.resolution})"
        )
    if session.status is SessionStatus.ABANDONED:
        raise SessionClosedError(f"session {session.session_id} was abandoned")


def next_question(session: Session) -> str | TriValue:
    """The question to ask next, or the final label once the verdict is fixed."""
    _require_open(session)
    question = select_next_question(
        session.policy.tree, session.answers(), session.strategy, session.prior
    )
    if question is None:
        # Defensive: record_answer normally performs this transition.
        resolution = session.resolution_state()
        session.status = SessionStatus.RESOLVED
        session.resolution = resolution.label
        return resolution.label
    return question


def record_answer(
    session: Session,
    question_id: str,
    value: TriValue,
    clock: Callable[[], float] = time.time,
) -> Session:
    """Append one answer; resolves the session as soon as the verdict is fixed.

    Only questions in the current relevant set are accepted, so transcripts
    never contain questions that could not have changed the verdict.
    """
    _require_open(session)
    tree = session.policy.tree
    if question_id not in tree_questions(tree):
        raise UnknownQuestionError([question_id])
    answers = session.answers()
    if question_id in answers:
        raise DuplicateAnswerError(question_id)
    resolution = resolve_partial(tree, answers)
    if question_id not in resolution.relevant:
        raise IrrelevantQuestionError(question_id)

    session.transcript.append(TranscriptEntry(question_id, value, clock()))
    session.updated_at = clock()
    after = session.resolution_state()
    if after.resolved:
        session.status = SessionStatus.RESOLVED
        session.resolution = after.label
    return session


def abandon(session: Session, clock: Callable[[], float] = time.time) -> Session:
    _require_open(session)
    session.status = SessionStatus.ABANDONED
    session.updated_at = clock()
    return session


def missing_information(session: Session) -> frozenset[str]:
    """Questions standing between the session and a definite verdict.

    While in progress (or abandoned): the unanswered questions that can still
    change the verdict. Once resolved to NEI: the pivotal NEI answers, i.e.
    those whose flip to some yes/no (others held fixed) can move the verdict
    away from NEI, found by enumeration. Resolved yes/no: nothing is missing.
    """
    tree = session.policy.tree
    answers = session.answers()
    if session.status is not SessionStatus.RESOLVED:
        return resolve_partial(tree, answers).relevant
    if session.resolution is not NEI:
        return frozenset()
    pivotal = set()
    for question_id, value in answers.items():
        if value is not NEI:
            continue
        for replacement in (YES, NO):
            trial = dict(answers)
            trial[question_id] = replacement
            outcome = resolve_partial(tree, trial)
            if any(label is not NEI for label in outcome.possible_labels):
                pivotal.add(question_id)
                break
    return frozenset(pivotal)


class SessionStore:
    """Append-only JSONL event log; sessions are rebuilt by replaying it."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def _append(self, event: dict) -> None:
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(event, ensure_ascii=False))
            handle.write("\n")

    def record_created(self, session: Session) -> None:
        self._append(
            {
                "event": "created",
                "session_id": session.session_id,
                "policy_id": session.policy_id,
                "strategy": session.strategy,
                "ts": session.created_at,
            }
        )

    def record_answer(self, session: Session, entry: TranscriptEntry) -> None:
        self._append(
            {
                "event": "answer",
                "session_id": session.session_id,
                "question_id": entry.question_id,
                "answer": str(entry.answer),
                "ts": entry.timestamp,
            }
        )

    def record_resolution(self, session: Session) -> None:
        self._append(
            {
                "event": "resolved",
                "session_id": session.session_id,
                "label": str(session.resolution),
                "ts": session.updated_at,
            }
        )

    def record_abandoned(self, session: Session) -> None:
        self._append(
            {
                "event": "abandoned",
                "session_id": session.session_id,
                "ts": session.updated_at,
            }
        )

    def replay(self, policies: Mapping[str, Policy]) -> dict[str, Session]:
        """Rebuild all sessions; recorded resolutions are verified, not trusted."""
        sessions: dict[str, Session] = {}
        if not self.path.exists():
            return sessions
        with self.path.open(encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError:
                    raise SessionStoreError(
                        f"{self.path.name}:{line_no}: invalid JSON"
                    ) from None
                kind = event.get("event")
                ts = float(event.get("ts", 0.0))
                if kind == "created":
                    policy = policies.get(event["policy_id"])
                    if policy is None:
                        raise SessionStoreError(
                            f"{self.path.name}:{line_no}: unknown policy "
                            f"{event['policy_id']}"
                        )
                    sessions[event["session_id"]] = start_session(
                        policy,
                        strategy=event.get("strategy", "order"),
                        session_id=event["session_id"],
                        clock=lambda: ts,
                    )
                elif kind == "answer":
                    session = sessions.get(event["session_id"])
                    if session is None:
                        raise SessionStoreError(
                            f"{self.path.name}:{line_no}: answer for unknown session"
                        )
                    record_answer(
                        session,
                        event["question_id"],
                        TriValue.parse(event["answer"]),
                        clock=lambda: ts,
                    )
                elif kind == "resolved":
                    session = sessions.get(event["session_id"])
                    if (
                        session is None
                        or session.status is not SessionStatus.RESOLVED
                        or str(session.resolution) != event.get("label")
                    ):
                        raise SessionStoreError(
                            f"{self.path.name}:{line_no}: recorded resolution does "
                            "not match the replayed transcript"
                        )
                elif kind == "abandoned":
                    session = sessions.get(event["session_id"])
                    if session is None:
                        raise SessionStoreError(
                            f"{self.path.name}:{line_no}: abandon for unknown session"
                        )
                    abandon(session, clock=lambda: ts)
                else:
                    raise SessionStoreError(
                        f"{self.path.name}:{line_no}: unknown event {kind!r}"
                    )
        return sessions
