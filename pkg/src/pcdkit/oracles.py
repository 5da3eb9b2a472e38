"""Answer providers: gold lookup, constants, simulated noise, remote QA models.

All providers share one contract: `answer(scenario_text, question_text,
scenario_id, question_id)` returns a three-valued answer with an optional
confidence. Evaluation consumes only the hard label; confidence is carried
for reporting. Providers must be safe to call from multiple worker threads.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .corpus import Corpus
from .errors import NoGoldAnswerError, ProtocolError, TransportError
from .logic import NEI, TriValue

_LABEL_ORDER = (TriValue.YES, TriValue.NO, TriValue.NEI)


@dataclass(frozen=True)
class OracleAnswer:
    value: TriValue
    confidence: float | None = None


class AnswerProvider(Protocol):
    name: str
    deterministic: bool
    requires_network: bool

    def answer(
        self,
        scenario_text: str,
        question_text: str,
        scenario_id: str | None = None,
        question_id: str | None = None,
    ) -> OracleAnswer: ...


class GoldOracle:
    """Answers straight from the corpus gold annotations."""

    name = "gold"
    deterministic = True
    requires_network = False

    def __init__(self, corpus: Corpus):
        self._corpus = corpus

    def answer(self, scenario_text, question_text, scenario_id=None, question_id=None):
        if scenario_id is None or question_id is None:
            raise NoGoldAnswerError(str(scenario_id), str(question_id))
        scenario = self._corpus.scenario(scenario_id)
        if not scenario.gold_answers or question_id not in scenario.gold_answers:
            raise NoGoldAnswerError(scenario_id, question_id)
        return OracleAnswer(scenario.gold_answers[question_id])


class ConstantOracle:
    """Always returns the same value; useful as a degenerate baseline."""

    deterministic = True
    requires_network = False

    def __init__(self, value: TriValue):
        self.value = value
        self.name = f"constant-{value}"

    def answer(self, scenario_text, question_text, scenario_id=None, question_id=None):
        return OracleAnswer(self.value)


@dataclass(frozen=True)
class ConfusionSpec:
    """Row-stochastic 3x3 confusion matrix plus a seed.

    `matrix[t][p]` is the probability of predicting label p when the truth is
    t, rows and columns in (yes, no, nei) order.
    """

    matrix: tuple[tuple[float, float, float], ...]
    seed: int = 0

    def __post_init__(self):
        rows = tuple(tuple(float(x) for x in row) for row in self.matrix)
        object.__setattr__(self, "matrix", rows)
        if len(rows) != 3 or any(len(row) != 3 for row in rows):
            raise ValueError("confusion matrix must be 3x3")
        for row in rows:
            if any(x < 0 for x in row):
                raise ValueError("confusion matrix entries must be nonnegative")
            if abs(sum(row) - 1.0) > 1e-9:
                raise ValueError(f"confusion matrix row must sum to 1, got {sum(row)}")

    @classmethod
    def identity(cls, seed: int = 0) -> "ConfusionSpec":
        return cls(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)), seed)

    @classmethod
    def uniform(cls, seed: int = 0) -> "ConfusionSpec":
        third = 1.0 / 3.0
        return cls(((third,) * 3,) * 3, seed)

    @classmethod
    def from_dict(cls, data: dict) -> "ConfusionSpec":
        matrix = data["matrix"]
        if isinstance(matrix, dict):
            matrix = [
                [float(matrix[str(t)][str(p)]) for p in _LABEL_ORDER]
                for t in _LABEL_ORDER
            ]
        return cls(tuple(tuple(row) for row in matrix), int(data.get("seed", 0)))

    @classmethod
    def from_file(cls, path) -> "ConfusionSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def row(self, truth: TriValue) -> tuple[float, float, float]:
        return self.matrix[_LABEL_ORDER.index(truth)]


def _unit_draw(seed: int, scenario_id: str, question_id: str) -> float:
    """Deterministic value in [0, 1) keyed by (seed, scenario, question).

    Counter-based rather than a shared generator stream: replayable across
    runs, processes, and parallel workers.
    """
    key = f"{seed}\x1f{scenario_id}\x1f{question_id}".encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2**64


class NoisyOracle:
    """Corrupts another provider's answers according to a confusion matrix."""

    requires_network = False
    deterministic = True  # keyed randomness: same ids and seed, same draw

    def __init__(self, base: AnswerProvider, spec: ConfusionSpec):
        self._base = base
        self.spec = spec
        self.name = f"noisy({base.name}, seed={spec.seed})"

    def answer(self, scenario_text, question_text, scenario_id=None, question_id=None):
        if scenario_id is None or question_id is None:
            raise ValueError("noisy oracle needs scenario_id and question_id for replay")
        truth = self._base.answer(
            scenario_text, question_text, scenario_id, question_id
        ).value
        draw = _unit_draw(self.spec.seed, scenario_id, question_id)
        cumulative = 0.0
        for probability, label in zip(self.spec.row(truth), _LABEL_ORDER):
            cumulative += probability
            if draw < cumulative:
                return OracleAnswer(label)
        return OracleAnswer(_LABEL_ORDER[-1])


class RemoteOracle:
    """Client for an HTTP question-answering service.

    Wire contract: POST {endpoint}/answer with {"scenario": str, "question":
    str} returning {"answer": "yes"|"no"|"nei", "confidence": number?}; batch
    variant POST {endpoint}/answers with {"scenarios": [...], "questions":
    [...]} returning {"answers": [...]} order-aligned. Responses are cached by
    (scenario_id, question_id) for the lifetime of the oracle.
    """

    name = "remote"
    deterministic = False
    requires_network = True

    def __init__(
        self,
        endpoint: str,
        timeout: float = 10.0,
        retries: int = 2,
        on_failure: str = "abort",
        max_in_flight: int = 8,
        session: requests.Session | None = None,
    ):
        if on_failure not in ("abort", "substitute_nei"):
            raise ValueError(f"unknown failure policy: {on_failure!r}")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.on_failure = on_failure
        self.incidents: list[dict] = []
        self._session = session or requests.Session()
        self._cache: dict[tuple[str, str], OracleAnswer] = {}
        self._lock = threading.Lock()
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def answer(self, scenario_text, question_text, scenario_id=None, question_id=None):
        key = (scenario_id, question_id) if scenario_id and question_id else None
        if key is not None:
            with self._lock:
                cached = self._cache.get(key)
            if cached is not None:
                return cached
        try:
            payload = self._post("/answer", {"scenario": scenario_text, "question": question_text})
            result = self._parse_answer(payload)
        except (TransportError, ProtocolError) as exc:
            if self.on_failure == "abort":
                raise
            with self._lock:
                self.incidents.append(
                    {
                        "scenario_id": scenario_id,
                        "question_id": question_id,
                        "error": exc.code,
                        "message": exc.message,
                    }
                )
            return OracleAnswer(NEI)
        if key is not None:
            with self._lock:
                self._cache[key] = result
        return result

    def answer_batch(
        self, pairs: Sequence[tuple[str, str]]
    ) -> list[OracleAnswer]:
        body = {
            "scenarios": [scenario for scenario, _ in pairs],
            "questions": [question for _, question in pairs],
        }
        payload = self._post("/answers", body)
        answers = payload.get("answers") if isinstance(payload, dict) else None
        if not isinstance(answers, list) or len(answers) != len(pairs):
            raise ProtocolError("batch response must align with the request arrays")
        return [self._parse_answer(entry) for entry in answers]

    def _post(self, path: str, body: dict) -> dict:
        last_error: str | None = None
        for _ in range(self.retries + 1):
            try:
                with self._gate:
                    response = self._session.post(
                        self.endpoint + path, json=body, timeout=self.timeout
                    )
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if response.status_code >= 500:
                last_error = f"server error {response.status_code}"
                continue
            if response.status_code != 200:
                raise ProtocolError(f"server rejected request: {response.status_code}")
            try:
                return response.json()
            except ValueError:
                raise ProtocolError("response body is not valid JSON") from None
        raise TransportError(
            f"request failed after {self.retries + 1} attempt(s): {last_error}"
        )

    @staticmethod
    def _parse_answer(payload) -> OracleAnswer:
        if not isinstance(payload, dict) or "answer" not in payload:
            raise ProtocolError("response must carry an 'answer' field")
        try:
            value = TriValue.parse(payload["answer"])
        except (ValueError, TypeError):
            raise ProtocolError(
                f"unknown answer label: {payload.get('answer')!r}"
            ) from None
        confidence = payload.get("confidence")
        if confidence is not None:
            if not isinstance(confidence, (int, float)) or not 0.0 <= confidence <= 1.0:
                raise ProtocolError(f"confidence must be in [0, 1], got {confidence!r}")
            confidence = float(confidence)
        return OracleAnswer(value, confidence)


def build_oracle(
    kind: str,
    corpus: Corpus | None = None,
    confusion: ConfusionSpec | None = None,
    seed: int | None = None,
    endpoint: str | None = None,
    on_failure: str = "abort",
    constant: TriValue | None = None,
) -> AnswerProvider:
    """Construct a provider from CLI/service style settings."""
    if kind == "gold":
        if corpus is None:
            raise ValueError("gold oracle needs a corpus")
        return GoldOracle(corpus)
    if kind == "noisy":
        if corpus is None:
            raise ValueError("noisy oracle needs a corpus")
        spec = confusion or ConfusionSpec.uniform()
        if seed is not None:
            spec = ConfusionSpec(spec.matrix, seed)
        return NoisyOracle(GoldOracle(corpus), spec)
    if kind == "remote":
        if not endpoint:
            raise ValueError("remote oracle needs an endpoint")
        return RemoteOracle(endpoint, on_failure=on_failure)
    if kind == "constant":
        return ConstantOracle(constant or NEI)
    raise ValueError(f"unknown oracle kind: {kind!r}")
