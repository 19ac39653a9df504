"""File ingestion: question-bank CSV, event-log JSONL, background CSV."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .core import (
    BackgroundProfile,
    Difficulty,
    InteractionEvent,
    Outcome,
    Question,
)

QUESTION_BANK_COLUMNS = [
    "id", "text", "opt1", "opt2", "opt3", "opt4",
    "correct_index", "difficulty", "teacher_level", "keywords", "topic",
]


class ParseError(ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class DuplicateId(ParseError):
    pass


class InvalidCorrectIndex(ParseError):
    pass


def load_question_bank(path: str | Path) -> list[Question]:
    """Read the assessment bank CSV into validated questions.

    Header is required; ``opt3``/``opt4`` cells may be empty; ``keywords`` is
    a ``;``-separated list; ``difficulty`` is ``basic`` or ``difficult``.
    """
    path = Path(path)
    questions: list[Question] = []
    seen: set[str] = set()
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ParseError(path, 1, "missing header")
        missing = [c for c in QUESTION_BANK_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ParseError(path, 1, f"missing columns {missing}")
        for row in reader:
            line = reader.line_num
            qid = (row["id"] or "").strip()
            if not qid:
                raise ParseError(path, line, "empty question id")
            if qid in seen:
                raise DuplicateId(path, line, f"duplicate question id {qid!r}")
            seen.add(qid)
            options = tuple(row[c].strip() for c in ("opt1", "opt2", "opt3", "opt4")
                            if (row[c] or "").strip())
            try:
                correct_index = int(row["correct_index"])
                teacher_level = int(row["teacher_level"])
            except (TypeError, ValueError):
                raise ParseError(path, line, "correct_index/teacher_level not integers") from None
            if not 0 <= correct_index < len(options):
                raise InvalidCorrectIndex(
                    path, line,
                    f"correct_index {correct_index} out of range for {len(options)} options")
            try:
                difficulty = Difficulty.from_str(row["difficulty"])
            except ValueError as exc:
                raise ParseError(path, line, str(exc)) from None
            keywords = frozenset(k.strip() for k in (row["keywords"] or "").split(";")
                                 if k.strip())
            try:
                questions.append(Question(
                    id=qid,
                    text=row["text"],
                    options=options,
                    correct_index=correct_index,
                    difficulty=difficulty,
                    teacher_level=teacher_level,
                    keywords=keywords,
                    topic=(row["topic"] or "").strip(),
                ))
            except ValueError as exc:
                raise ParseError(path, line, str(exc)) from None
    return questions


def event_to_dict(event: InteractionEvent) -> dict:
    d = {
        "user_id": event.user_id,
        "session_id": event.session_id,
        "question_id": event.question_id,
        "outcome": event.outcome.value,
        "elapsed_ms": event.elapsed_ms,
        "click_count": event.click_count,
        "timestamp": event.timestamp,
    }
    return d


def event_from_dict(d: dict) -> InteractionEvent:
    return InteractionEvent(
        user_id=d["user_id"],
        session_id=d["session_id"],
        question_id=d["question_id"],
        outcome=Outcome(d["outcome"]),
        elapsed_ms=int(d["elapsed_ms"]),
        click_count=int(d["click_count"]),
        timestamp=int(d["timestamp"]),
    )


def load_event_log(path: str | Path) -> list[InteractionEvent]:
    """Read the JSONL event log; non-event records (e.g. session summaries) are skipped."""
    path = Path(path)
    events = []
    with path.open(encoding="utf-8") as f:
        for i, raw in enumerate(f, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                d = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(path, i, f"bad JSON: {exc}") from None
            if "outcome" not in d:
                continue  # summary / metadata record
            try:
                events.append(event_from_dict(d))
            except (KeyError, ValueError) as exc:
                raise ParseError(path, i, f"bad event: {exc}") from None
    return events


def append_event(path: str | Path, event: InteractionEvent) -> None:
    with Path(path).open("a", encoding="utf-8") as f:
        f.write(json.dumps(event_to_dict(event), sort_keys=True) + "\n")
        f.flush()


def load_background(path: str | Path) -> list[BackgroundProfile]:
    """Read the questionnaire CSV: ``user_id`` plus arbitrary fields, empty cell = missing.

    Numeric-looking cells are parsed as floats; everything else stays a string.
    """
    path = Path(path)
    profiles = []
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or "user_id" not in reader.fieldnames:
            raise ParseError(path, 1, "missing user_id column")
        for row in reader:
            answers: dict[str, float | str | None] = {}
            for name, cell in row.items():
                if name == "user_id":
                    continue
                cell = (cell or "").strip()
                if not cell:
                    answers[name] = None
                    continue
                try:
                    answers[name] = float(cell)
                except ValueError:
                    answers[name] = cell
            profiles.append(BackgroundProfile(user_id=row["user_id"], answers=answers))
    return profiles
