"""Expression trees over yes/no/NEI questions and their three-valued evaluation.

A policy is decomposed into boolean-style questions ``Q0``, ``Q1``, ... whose
answers come from a three-valued domain (yes / no / not enough information).
An expression tree combines the answers with NOT, AND, and OR under strong
Kleene semantics: NO dominates AND, YES dominates OR, and NEI propagates
otherwise. Because the logic is monotone in information, a verdict can often
be fixed before every question is answered; `resolve_partial` captures that.
"""

from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Union

from .errors import ExpressionSyntaxError, MissingAnswerError, UnknownQuestionError

__all__ = [
    "TriValue",
    "YES",
    "NO",
    "NEI",
    "Var",
    "Not",
    "And",
    "Or",
    "Node",
    "Resolution",
    "kleene_not",
    "kleene_and",
    "kleene_or",
    "parse_tree",
    "serialize_tree",
    "evaluate",
    "resolve_partial",
    "tree_questions",
    "tree_complexity",
    "tree_snapshot",
]


class TriValue(Enum):
    """Answer and verdict domain: yes, no, or not enough information."""

    YES = "yes"
    NO = "no"
    NEI = "nei"

    @classmethod
    def parse(cls, text: str) -> "TriValue":
        """Read a label case-insensitively ("yes" | "no" | "nei")."""
        try:
            return cls(text.strip().lower())
        except (ValueError, AttributeError):
            raise ValueError(f"not a valid answer label: {text!r}") from None

    def __str__(self) -> str:
        return self.value


YES = TriValue.YES
NO = TriValue.NO
NEI = TriValue.NEI

TRI_VALUES = (YES, NO, NEI)

_NOT_TABLE = {YES: NO, NO: YES, NEI: NEI}


def kleene_not(value: TriValue) -> TriValue:
    return _NOT_TABLE[value]


def kleene_and(values: Iterable[TriValue]) -> TriValue:
    saw_nei = False
    for value in values:
        if value is NO:
            return NO
        if value is NEI:
            saw_nei = True
    return NEI if saw_nei else YES


def kleene_or(values: Iterable[TriValue]) -> TriValue:
    saw_nei = False
    for value in values:
        if value is YES:
            return YES
        if value is NEI:
            saw_nei = True
    return NEI if saw_nei else NO


_QUESTION_ID = re.compile(r"Q\d+\Z")
_WORD = re.compile(r"[A-Za-z][A-Za-z0-9]*")


@dataclass(frozen=True)
class Var:
    """Leaf node referencing a question by id (``Q`` followed by digits)."""

    name: str

    def __post_init__(self):
        if not _QUESTION_ID.fullmatch(self.name):
            raise ValueError(f"question id must be 'Q<digits>', got {self.name!r}")


@dataclass(frozen=True)
class Not:
    child: "Node"


def _flattened(cls, children) -> tuple:
    flat = []
    for child in children:
        if isinstance(child, cls):
            flat.extend(child.children)
        else:
            flat.append(child)
    return tuple(flat)


@dataclass(frozen=True)
class And:
    """N-ary conjunction; direct AND children are flattened away on build."""

    children: tuple["Node", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", _flattened(And, self.children))
        if len(self.children) < 2:
            raise ValueError("AND requires at least two operands")


@dataclass(frozen=True)
class Or:
    """N-ary disjunction; direct OR children are flattened away on build."""

    children: tuple["Node", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", _flattened(Or, self.children))
        if len(self.children) < 2:
            raise ValueError("OR requires at least two operands")


Node = Union[Var, Not, And, Or]


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int  # 1-based character position


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "()":
            tokens.append(_Token("lparen" if ch == "(" else "rparen", ch, i + 1))
            i += 1
            continue
        match = _WORD.match(text, i)
        if match is None:
            raise ExpressionSyntaxError(f"unexpected character {ch!r}", position=i + 1)
        word = match.group()
        upper = word.upper()
        if upper in ("AND", "OR", "NOT"):
            tokens.append(_Token(upper, word, i + 1))
        elif _QUESTION_ID.fullmatch(upper):
            tokens.append(_Token("var", upper, i + 1))
        else:
            raise ExpressionSyntaxError(f"unexpected token {word!r}", position=i + 1)
        i = match.end()
    tokens.append(_Token("eof", "end of input", n + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.index = 0

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def parse_or(self) -> Node:
        children = [self.parse_and()]
        while self.peek().kind == "OR":
            self.advance()
            children.append(self.parse_and())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def parse_and(self) -> Node:
        children = [self.parse_not()]
        while self.peek().kind == "AND":
            self.advance()
            children.append(self.parse_not())
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_not(self) -> Node:
        if self.peek().kind == "NOT":
            self.advance()
            return Not(self.parse_not())
        return self.parse_primary()

    def parse_primary(self) -> Node:
        token = self.peek()
        if token.kind == "var":
            self.advance()
            return Var(token.text)
        if token.kind == "lparen":
            self.advance()
            node = self.parse_or()
            closing = self.peek()
            if closing.kind != "rparen":
                raise ExpressionSyntaxError("expected ')'", position=closing.pos)
            self.advance()
            return node
        raise ExpressionSyntaxError(
            "expected a question id, NOT, or '('", position=token.pos
        )


def parse_tree(text: str) -> Node:
    """Parse an expression string into a canonical tree.

    Grammar: identifiers ``Q<digits>``; keywords NOT > AND > OR in precedence,
    AND/OR left-associative, parentheses allowed, keywords case-insensitive.
    Same-operator nesting is flattened, so the result is always in canonical
    n-ary form and `parse_tree(serialize_tree(t)) == t`.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionSyntaxError("empty expression", position=1)
    parser = _Parser(_tokenize(text))
    node = parser.parse_or()
    trailing = parser.peek()
    if trailing.kind != "eof":
        raise ExpressionSyntaxError(
            f"unexpected token {trailing.text!r}", position=trailing.pos
        )
    return node


def serialize_tree(tree: Node) -> str:
    """Canonical expression string: uppercase keywords, minimal parentheses."""
    if isinstance(tree, Var):
        return tree.name
    if isinstance(tree, Not):
        inner = serialize_tree(tree.child)
        if isinstance(tree.child, (And, Or)):
            inner = f"({inner})"
        return f"NOT {inner}"
    if isinstance(tree, And):
        parts = [
            f"({serialize_tree(child)})" if isinstance(child, Or) else serialize_tree(child)
            for child in tree.children
        ]
        return " AND ".join(parts)
    if isinstance(tree, Or):
        return " OR ".join(serialize_tree(child) for child in tree.children)
    raise TypeError(f"not an expression node: {tree!r}")


@functools.lru_cache(maxsize=None)
def tree_questions(tree: Node) -> tuple[str, ...]:
    """Distinct question ids in first-occurrence (left-to-right) order."""
    seen: dict[str, None] = {}

    def walk(node: Node) -> None:
        if isinstance(node, Var):
            seen.setdefault(node.name)
        elif isinstance(node, Not):
            walk(node.child)
        else:
            for child in node.children:
                walk(child)

    walk(tree)
    return tuple(seen)


def tree_complexity(tree: Node) -> int:
    """Number of distinct questions in the tree."""
    return len(tree_questions(tree))


def _eval(node: Node, answers: Mapping[str, TriValue]) -> TriValue:
    if isinstance(node, Var):
        return answers[node.name]
    if isinstance(node, Not):
        return _NOT_TABLE[_eval(node.child, answers)]
    if isinstance(node, And):
        saw_nei = False
        for child in node.children:
            value = _eval(child, answers)
            if value is NO:
                return NO
            if value is NEI:
                saw_nei = True
        return NEI if saw_nei else YES
    saw_nei = False
    for child in node.children:
        value = _eval(child, answers)
        if value is YES:
            return YES
        if value is NEI:
            saw_nei = True
    return NEI if saw_nei else NO


def evaluate(tree: Node, answers: Mapping[str, TriValue]) -> TriValue:
    """Evaluate a tree under a total assignment.

    NEI is a committed answer here, not an omission; an unanswered question is
    a missing key and raises `MissingAnswerError`.
    """
    missing = [q for q in tree_questions(tree) if q not in answers]
    if missing:
        raise MissingAnswerError(missing)
    return _eval(tree, answers)


@dataclass(frozen=True)
class Resolution:
    """Outcome of evaluating a tree under a partial assignment.

    `label` is set exactly when every completion of the unanswered questions
    produces the same verdict. Otherwise `possible_labels` lists the verdicts
    still reachable and `relevant` the unanswered questions whose answer can
    still change the verdict.
    """

    label: TriValue | None
    possible_labels: frozenset[TriValue]
    relevant: frozenset[str]

    @property
    def resolved(self) -> bool:
        return self.label is not None


def resolve_partial(tree: Node, answers: Mapping[str, TriValue]) -> Resolution:
    """Analyze a partial assignment by exhaustive completion enumeration.

    Every unanswered question ranges over {yes, no, nei}; with at most nine
    questions per policy the 3^9 worst case stays cheap, and enumeration
    doubles as its own ground truth.
    """
    known = set(tree_questions(tree))
    unknown = [q for q in answers if q not in known]
    if unknown:
        raise UnknownQuestionError(unknown)
    return _resolve_cached(tree, tuple(sorted(answers.items(), key=lambda kv: kv[0])))


@functools.lru_cache(maxsize=200_000)
def _resolve_cached(tree: Node, answered: tuple[tuple[str, TriValue], ...]) -> Resolution:
    answers = dict(answered)
    unanswered = [q for q in tree_questions(tree) if q not in answers]
    if not unanswered:
        label = _eval(tree, answers)
        return Resolution(label, frozenset((label,)), frozenset())

    merged = dict(answers)
    results: dict[tuple[TriValue, ...], TriValue] = {}
    for combo in itertools.product(TRI_VALUES, repeat=len(unanswered)):
        for question, value in zip(unanswered, combo):
            merged[question] = value
        results[combo] = _eval(tree, merged)

    labels = frozenset(results.values())
    if len(labels) == 1:
        return Resolution(next(iter(labels)), labels, frozenset())

    relevant = set()
    for i, question in enumerate(unanswered):
        seen: dict[tuple, TriValue] = {}
        for combo, value in results.items():
            rest = combo[:i] + combo[i + 1 :]
            previous = seen.get(rest)
            if previous is None:
                seen[rest] = value
            elif previous is not value:
                relevant.add(question)
                break
    return Resolution(None, labels, frozenset(relevant))


def tree_snapshot(tree: Node, answers: Mapping[str, TriValue]) -> dict:
    """Per-node view of the tree under a partial assignment.

    Each node carries "yes"/"no"/"nei" when every completion of the unanswered
    questions agrees on its value, and "unanswered" otherwise. Used to render
    the live tree state in clients; clients display it verbatim.
    """

    def node_view(node: Node) -> dict:
        sub_answers = {q: answers[q] for q in tree_questions(node) if q in answers}
        resolution = resolve_partial(node, sub_answers)
        value = str(resolution.label) if resolution.resolved else "unanswered"
        if isinstance(node, Var):
            return {"kind": "question", "question_id": node.name, "value": value}
        if isinstance(node, Not):
            return {"kind": "not", "value": value, "children": [node_view(node.child)]}
        kind = "and" if isinstance(node, And) else "or"
        return {
            "kind": kind,
            "value": value,
            "children": [node_view(child) for child in node.children],
        }

    return node_view(tree)
