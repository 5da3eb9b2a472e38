"""Exception types with stable machine-readable codes.

The `code` attribute is part of the CLI and HTTP contract: command-line
failures emit it in a single JSON line and the HTTP service places it in
error bodies, so codes must never change meaning.
"""

from __future__ import annotations

from typing import Any


class PcdError(Exception):
    """Base error; carries a stable code plus optional structured detail."""

    code = "error"

    def __init__(self, message: str, detail: Any = None):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def as_dict(self) -> dict:
        body: dict = {"code": self.code, "message": self.message}
        if self.detail is not None:
            body["detail"] = self.detail
        return body


class ExpressionSyntaxError(PcdError):
    code = "syntax_error"

    def __init__(self, message: str, position: int):
        super().__init__(
            f"syntax error at position {position}: {message}",
            detail={"position": position},
        )
        self.position = position


class MissingAnswerError(PcdError):
    code = "missing_answer"

    def __init__(self, question_ids):
        ids = list(question_ids)
        super().__init__(
            "unanswered questions: " + ", ".join(ids),
            detail={"question_ids": ids},
        )
        self.question_ids = ids


class UnknownQuestionError(PcdError):
    code = "unknown_question"

    def __init__(self, question_ids):
        ids = [question_ids] if isinstance(question_ids, str) else sorted(question_ids)
        super().__init__(
            "unknown questions: " + ", ".join(ids),
            detail={"question_ids": ids},
        )
        self.question_ids = ids


class InvalidLabelError(PcdError):
    code = "invalid_label"


class CorpusFormatError(PcdError):
    code = "malformed_record"


class CorpusValidationError(PcdError):
    code = "corpus_invalid"

    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(v.message for v in self.violations[:3])
        super().__init__(
            f"corpus has {len(self.violations)} violation(s): {head}",
            detail=[v.as_dict() for v in self.violations],
        )


class EmptyCorpusError(PcdError):
    code = "empty_corpus"


class UnknownPolicyError(PcdError):
    code = "unknown_policy"

    def __init__(self, policy_id: str):
        super().__init__(f"unknown policy: {policy_id}", detail={"policy_id": policy_id})
        self.policy_id = policy_id


class UnknownScenarioError(PcdError):
    code = "unknown_scenario"

    def __init__(self, scenario_id: str):
        super().__init__(
            f"unknown scenario: {scenario_id}", detail={"scenario_id": scenario_id}
        )
        self.scenario_id = scenario_id


class PolicyWithoutTreeError(PcdError):
    code = "policy_without_tree"

    def __init__(self, policy_id: str):
        super().__init__(
            f"policy {policy_id} has no expression tree",
            detail={"policy_id": policy_id},
        )


class NoGoldAnswerError(PcdError):
    code = "no_gold_answer"

    def __init__(self, scenario_id: str, question_id: str):
        super().__init__(
            f"no gold answer for {question_id} in scenario {scenario_id}",
            detail={"scenario_id": scenario_id, "question_id": question_id},
        )


class DuplicateAnswerError(PcdError):
    code = "duplicate_answer"

    def __init__(self, question_id: str):
        super().__init__(
            f"question {question_id} was already answered",
            detail={"question_id": question_id},
        )


class IrrelevantQuestionError(PcdError):
    code = "irrelevant_question"

    def __init__(self, question_id: str):
        super().__init__(
            f"question {question_id} cannot change the verdict anymore",
            detail={"question_id": question_id},
        )


class SessionResolvedError(PcdError):
    code = "session_resolved"


class SessionClosedError(PcdError):
    code = "session_closed"


class UnknownSessionError(PcdError):
    code = "unknown_session"

    def __init__(self, session_id: str):
        super().__init__(
            f"unknown session: {session_id}", detail={"session_id": session_id}
        )


class UnknownJobError(PcdError):
    code = "unknown_job"

    def __init__(self, job_id: str):
        super().__init__(f"unknown evaluation job: {job_id}", detail={"job_id": job_id})


class CoverageMismatchError(PcdError):
    code = "coverage_mismatch"


class TransportError(PcdError):
    code = "transport_error"


class ProtocolError(PcdError):
    code = "protocol_error"


class SessionStoreError(PcdError):
    code = "invalid_session_store"
