"""Shared domain model: questions, interaction events, sessions, implicit ratings.

Everything here is either an immutable value object or a pure derivation over
the append-only event log, so all of it is safe to share across threads.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum


class Difficulty(Enum):
    BASIC = "basic"
    DIFFICULT = "difficult"

    @classmethod
    def from_str(cls, s: str) -> "Difficulty":
        try:
            return cls(s.strip().lower())
        except ValueError:
            raise ValueError(f"unknown difficulty {s!r}") from None


class Outcome(Enum):
    CORRECT = "correct"
    WRONG = "wrong"
    DONT_KNOW = "dont_know"
    SKIPPED = "skipped"


class DomainError(Exception):
    """Base class for domain rule violations."""


class SkippedNotRatable(DomainError):
    """A skipped answer has no slot in the 1..5 rating scheme."""


class UnknownQuestion(DomainError):
    pass


class AllMissing(DomainError):
    """A questionnaire field is missing for every user, so no mode exists."""


@dataclass(frozen=True)
class Question:
    """One multiple-choice item from the assessment bank."""

    id: str
    text: str
    options: tuple[str, ...]
    correct_index: int
    difficulty: Difficulty
    teacher_level: int
    keywords: frozenset[str]
    topic: str

    def __post_init__(self) -> None:
        if len(self.options) < 2:
            raise ValueError(f"question {self.id}: needs >=2 options")
        if not 0 <= self.correct_index < len(self.options):
            raise ValueError(
                f"question {self.id}: correct_index {self.correct_index} "
                f"out of range for {len(self.options)} options"
            )
        if not self.keywords:
            raise ValueError(f"question {self.id}: keywords must be non-empty")
        if not 1 <= self.teacher_level <= 5:
            raise ValueError(f"question {self.id}: teacher_level must be in 1..5")


@dataclass(frozen=True)
class InteractionEvent:
    """One logged answer (or skip) inside a self-assessment test."""

    user_id: str
    session_id: str
    question_id: str
    outcome: Outcome
    elapsed_ms: int
    click_count: int
    timestamp: int  # UTC milliseconds

    def __post_init__(self) -> None:
        if self.elapsed_ms < 0:
            raise ValueError("elapsed_ms must be non-negative")
        if self.click_count < 0:
            raise ValueError("click_count must be non-negative")


@dataclass
class SessionState:
    """Mutable per-test state: which questions were served and what came back.

    ``asked`` never contains duplicates (a question is served at most once per
    session) and events only accumulate for already-served questions.
    """

    session_id: str
    user_id: str
    topic: str
    strategy_name: str
    length_target: int = 5
    asked: list[str] = field(default_factory=list)
    events: list[InteractionEvent] = field(default_factory=list)
    finished: bool = False

    def mark_asked(self, question_id: str) -> None:
        if question_id in self.asked:
            raise ValueError(f"question {question_id} already served this session")
        self.asked.append(question_id)

    def add_event(self, event: InteractionEvent) -> None:
        if event.question_id not in self.asked:
            raise ValueError(f"event for unserved question {event.question_id}")
        if len(self.events) >= len(self.asked):
            raise ValueError("more events than served questions")
        if self.events and event.timestamp < self.events[-1].timestamp:
            raise ValueError("event timestamps must be non-decreasing")
        self.events.append(event)
        if len(self.events) >= self.length_target:
            self.finished = True

    @property
    def answered(self) -> list[InteractionEvent]:
        """Events excluding skips."""
        return [e for e in self.events if e.outcome is not Outcome.SKIPPED]


@dataclass(frozen=True)
class Rating:
    user_id: str
    question_id: str
    value: int

    def __post_init__(self) -> None:
        if self.value not in (1, 2, 3, 4, 5):
            raise ValueError("rating value must be in 1..5")


@dataclass
class BackgroundProfile:
    """Questionnaire answers per user; grades are kept on a 0..100 scale."""

    user_id: str
    answers: dict[str, float | str | None] = field(default_factory=dict)


@dataclass(frozen=True)
class Recommendation:
    """A strategy's pick together with its per-candidate scores."""

    question_id: str
    strategy: str
    scores: Mapping[str, float] = field(default_factory=dict)


def derive_rating(event: InteractionEvent, q: Question) -> Rating:
    """Map one answer onto the implicit 1..5 rating.

    "I don't know" is 1 regardless of difficulty; wrong/right on a basic
    question give 2/3; wrong/right on a difficult question give 4/5. Skips
    carry no rating at all.
    """
    if event.question_id != q.id:
        raise ValueError("event/question mismatch")
    if event.outcome is Outcome.SKIPPED:
        raise SkippedNotRatable(f"skipped event for {q.id} produces no rating")
    if event.outcome is Outcome.DONT_KNOW:
        value = 1
    elif q.difficulty is Difficulty.BASIC:
        value = 3 if event.outcome is Outcome.CORRECT else 2
    else:
        value = 5 if event.outcome is Outcome.CORRECT else 4
    return Rating(user_id=event.user_id, question_id=event.question_id, value=value)


class RatingMatrix:
    """Sparse user x question matrix of implicit ratings.

    Index maps are dense and stable for a given build: users sorted, questions
    in bank order.
    """

    def __init__(self, users: Sequence[str], questions: Sequence[str],
                 entries: Mapping[tuple[str, str], int]):
        self.users = tuple(users)
        self.questions = tuple(questions)
        self.user_index = {u: i for i, u in enumerate(self.users)}
        self.question_index = {q: i for i, q in enumerate(self.questions)}
        for (u, q), v in entries.items():
            if v not in (1, 2, 3, 4, 5):
                raise ValueError(f"rating {v} for ({u}, {q}) outside 1..5")
        self.entries = dict(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def value(self, user_id: str, question_id: str) -> int | None:
        return self.entries.get((user_id, question_id))

    def ratings_of(self, user_id: str) -> dict[str, int]:
        return {q: v for (u, q), v in self.entries.items() if u == user_id}

    def raters_of(self, question_id: str) -> dict[str, int]:
        return {u: v for (u, q), v in self.entries.items() if q == question_id}

    def triplets(self):
        """(user_idx, question_idx, value) integer arrays, in stable order."""
        import numpy as np

        keys = sorted(self.entries)
        ui = np.array([self.user_index[u] for u, _ in keys], dtype=np.int64)
        qi = np.array([self.question_index[q] for _, q in keys], dtype=np.int64)
        vals = np.array([self.entries[k] for k in keys], dtype=np.float64)
        return ui, qi, vals


def build_rating_matrix(events: Iterable[InteractionEvent],
                        bank: Sequence[Question]) -> RatingMatrix:
    """Derive the user-question matrix from the event log.

    Skips are omitted; when a user answered the same question more than once
    the latest event wins (the log is append-only, so list order is time
    order). Replaying the same log always yields an identical matrix.
    """
    by_id = {q.id: q for q in bank}
    entries: dict[tuple[str, str], int] = {}
    users: set[str] = set()
    for event in events:
        q = by_id.get(event.question_id)
        if q is None:
            raise UnknownQuestion(event.question_id)
        if event.outcome is Outcome.SKIPPED:
            continue
        rating = derive_rating(event, q)
        entries[(event.user_id, event.question_id)] = rating.value
        users.add(event.user_id)
    return RatingMatrix(sorted(users), [q.id for q in bank], entries)


def question_success_rate(question_id: str,
                          events: Iterable[InteractionEvent],
                          prior: float = 0.5) -> float:
    """Fraction of non-skipped answers to the question that were correct.

    Returns ``prior`` (0.5 by default) for questions nobody has attempted.
    """
    attempted = 0
    correct = 0
    for e in events:
        if e.question_id != question_id or e.outcome is Outcome.SKIPPED:
            continue
        attempted += 1
        if e.outcome is Outcome.CORRECT:
            correct += 1
    if attempted == 0:
        return prior
    return correct / attempted


def _mode(values: list[float | str]):
    # Ties break toward the smallest numeric / lexicographically first value.
    counts: dict[float | str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    candidates = [v for v, c in counts.items() if c == best]
    try:
        return min(candidates)
    except TypeError:
        raise ValueError(f"field mixes numeric and categorical values: {candidates!r}") from None


def impute_background(profiles: Sequence[BackgroundProfile]) -> list[BackgroundProfile]:
    """Fill missing questionnaire fields with the mode over the other users.

    Present values are never changed. Raises :class:`AllMissing` when a field
    has no value for any user.
    """
    fields: list[str] = []
    for p in profiles:
        for name in p.answers:
            if name not in fields:
                fields.append(name)

    modes: dict[str, float | str] = {}
    for name in fields:
        present = [p.answers[name] for p in profiles
                   if p.answers.get(name) is not None]
        if not present:
            raise AllMissing(name)
        modes[name] = _mode(present)

    out = []
    for p in profiles:
        answers = dict(p.answers)
        for name in fields:
            if answers.get(name) is None:
                answers[name] = modes[name]
        out.append(BackgroundProfile(user_id=p.user_id, answers=answers))
    return out


def normalize_grade(value: float, scale_max: float) -> float:
    """Bring a grade from a 0..scale_max scheme onto 0..100."""
    if scale_max <= 0:
        raise ValueError("scale_max must be positive")
    v = 100.0 * value / scale_max
    return min(max(v, 0.0), 100.0)
