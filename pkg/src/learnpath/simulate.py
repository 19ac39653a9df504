"""Synthetic students and the experiment runner that benchmarks strategies.

Students answer through a logistic response model: ability is the mean
latent skill over the question's keywords, difficulty shifts the curve by a
fixed offset, and practice nudges skills upward. The runner drives every
strategy through the shared interface, repeats five-question sessions until
mastery or a cap, and writes a deterministic results CSV.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .concept_map import ConceptMap, MasteryCriterion, concept_mastered, load_concept_map
from .core import (Difficulty, InteractionEvent, Outcome, Question,
                   SessionState)
from .io import load_question_bank
from .strategies import REGISTRY, Strategy, build_strategy, random_baseline

__all__ = ["SimulatedStudent", "simulate_answer", "random_baseline",
           "ExperimentConfig", "ExperimentResult", "ResultRow",
           "run_experiment", "ConfigError", "RESULT_COLUMNS"]

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["strategy", "student", "seed", "questions_to_mastery",
                  "correct_rate", "coverage"]

DIFFICULTY_OFFSET = {Difficulty.BASIC: 0.0, Difficulty.DIFFICULT: 1.0}


class ConfigError(ValueError):
    pass


@dataclass
class SimulatedStudent:
    """Latent-ability answerer with a simple response-time model."""

    user_id: str
    skill: dict[str, float] = field(default_factory=dict)
    discrimination: float = 1.0
    dont_know_rate: float = 0.2
    base_ms: float = 20000.0
    difficult_extra_ms: float = 15000.0
    noise_ms: float = 5000.0
    gain_attempt: float = 0.0
    gain_correct: float = 0.0

    def __post_init__(self) -> None:
        if self.discrimination <= 0:
            raise ValueError("discrimination must be positive")
        if not 0.0 <= self.dont_know_rate <= 1.0:
            raise ValueError("dont_know_rate must be in [0, 1]")

    def p_correct(self, question: Question) -> float:
        ability = float(np.mean([self.skill.get(kw, 0.0)
                                 for kw in sorted(question.keywords)]))
        offset = DIFFICULTY_OFFSET[question.difficulty]
        return 1.0 / (1.0 + math.exp(-self.discrimination * (ability - offset)))

    def practice(self, question: Question, correct: bool) -> None:
        """Apply learning gains to every keyword the question touches."""
        gain = self.gain_attempt + (self.gain_correct if correct else 0.0)
        if gain == 0.0:
            return
        for kw in question.keywords:
            self.skill[kw] = self.skill.get(kw, 0.0) + gain


def simulate_answer(student: SimulatedStudent, question: Question,
                    rng: np.random.Generator, session_id: str = "sim",
                    timestamp: int = 0) -> InteractionEvent:
    """Draw one answer event; deterministic given the rng state.

    Correct with probability from the logistic model; otherwise the student
    admits not knowing at the dont_know rate, else answers wrong. Elapsed
    time is the base plus a difficulty increment plus Gaussian noise.
    """
    p = student.p_correct(question)
    if rng.random() < p:
        outcome = Outcome.CORRECT
    elif rng.random() < student.dont_know_rate:
        outcome = Outcome.DONT_KNOW
    else:
        outcome = Outcome.WRONG
    extra = student.difficult_extra_ms \
        if question.difficulty is Difficulty.DIFFICULT else 0.0
    elapsed = max(500.0, student.base_ms + extra
                  + rng.normal(0.0, student.noise_ms))
    clicks = 1 + int(rng.integers(0, 4))
    student.practice(question, outcome is Outcome.CORRECT)
    return InteractionEvent(user_id=student.user_id, session_id=session_id,
                            question_id=question.id, outcome=outcome,
                            elapsed_ms=int(elapsed), click_count=clicks,
                            timestamp=timestamp)


@dataclass
class ExperimentConfig:
    """Everything a reproducible benchmark run needs."""

    strategies: list[str]
    seeds: list[int]
    population: int = 1
    session_length: int = 5
    max_questions: int = 40
    bank_path: Optional[str] = None
    nodes_path: Optional[str] = None
    arcs_path: Optional[str] = None
    warmup_students: int = 5
    warmup_sessions: int = 4
    warmup_seed: int = 9001
    discrimination: float = 1.0
    dont_know_rate: float = 0.2
    base_skills: dict[str, float] = field(default_factory=dict)
    default_skill: float = 0.0
    skill_noise: float = 0.3
    gain_attempt: float = 0.05
    gain_correct: float = 0.15

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dc_fields(cls)}
        problems = [f"unknown field: {k}" for k in sorted(set(raw) - known)]
        data = {k: v for k, v in raw.items() if k in known}
        config = None
        try:
            config = cls(**data)
        except TypeError as exc:
            problems.append(str(exc))
        if config is not None:
            problems.extend(config._validate())
        if problems:
            raise ConfigError("; ".join(problems))
        return config

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(raw)

    def _validate(self) -> list[str]:
        problems = []
        if not self.strategies:
            problems.append("strategies: must name at least one strategy")
        for name in self.strategies:
            if name not in REGISTRY:
                problems.append(f"strategies: unknown strategy {name!r}")
        if not self.seeds:
            problems.append("seeds: must list at least one seed")
        if self.population < 0:
            problems.append("population: must be >= 0")
        if self.session_length < 1:
            problems.append("session_length: must be >= 1")
        if self.max_questions < 1:
            problems.append("max_questions: must be >= 1")
        if not 0.0 <= self.dont_know_rate <= 1.0:
            problems.append("dont_know_rate: must be in [0, 1]")
        if self.discrimination <= 0:
            problems.append("discrimination: must be positive")
        if self.skill_noise < 0:
            problems.append("skill_noise: must be >= 0")
        return problems

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}


@dataclass(frozen=True)
class ResultRow:
    strategy: str
    student: int
    seed: int
    questions_to_mastery: int
    correct_rate: float
    coverage: float

    def csv_values(self) -> list[str]:
        return [self.strategy, str(self.student), str(self.seed),
                str(self.questions_to_mastery), repr(self.correct_rate),
                repr(self.coverage)]


@dataclass
class Transcript:
    """Per-run record of what was asked and what came back, by session."""

    strategy: str
    student: int
    seed: int
    sessions: list[list[tuple[str, str]]]  # (question_id, outcome value)


@dataclass
class ExperimentResult:
    """Rows plus aggregates; replayable bit-exact from config and seeds."""

    config: dict
    rows: list[ResultRow]
    transcripts: list[Transcript]

    def mean_questions_to_mastery(self, strategy: str) -> float:
        values = [r.questions_to_mastery for r in self.rows
                  if r.strategy == strategy]
        return float(np.mean(values)) if values else float("nan")

    def correct_rate_trajectory(self, strategy: str) -> list[float]:
        """Mean cumulative correct rate by question position."""
        runs = []
        for t in self.transcripts:
            if t.strategy != strategy:
                continue
            flat = [o for s in t.sessions for _, o in s]
            correct = 0
            answered = 0
            series = []
            for o in flat:
                if o != Outcome.SKIPPED.value:
                    answered += 1
                    correct += o == Outcome.CORRECT.value
                series.append(correct / answered if answered else 0.0)
            runs.append(series)
        if not runs:
            return []
        longest = max(len(r) for r in runs)
        return [float(np.mean([r[i] for r in runs if i < len(r)]))
                for i in range(longest)]

    def to_csv_text(self) -> str:
        lines = [",".join(RESULT_COLUMNS)]
        lines += [",".join(r.csv_values()) for r in self.rows]
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text(), encoding="utf-8")


def _make_student(user_id: str, keywords: Sequence[str],
                  config: ExperimentConfig,
                  rng: np.random.Generator) -> SimulatedStudent:
    skill = {}
    for kw in sorted(keywords):
        base = config.base_skills.get(kw, config.default_skill)
        noise = float(rng.normal(0.0, config.skill_noise)) \
            if config.skill_noise > 0 else 0.0
        skill[kw] = base + noise
    return SimulatedStudent(user_id=user_id, skill=skill,
                            discrimination=config.discrimination,
                            dont_know_rate=config.dont_know_rate,
                            gain_attempt=config.gain_attempt,
                            gain_correct=config.gain_correct)


def _warmup_log(bank: dict[str, Question],
                config: ExperimentConfig) -> list[InteractionEvent]:
    """Population log from random-order answering, shared by all strategies."""
    rng = np.random.default_rng(config.warmup_seed)
    keywords = sorted({kw for q in bank.values() for kw in q.keywords})
    events: list[InteractionEvent] = []
    timestamp = 0
    for i in range(config.warmup_students):
        student = _make_student(f"warmup{i}", keywords, config, rng)
        for s in range(config.warmup_sessions):
            session_id = f"warmup{i}-{s}"
            order = sorted(bank)
            picks = rng.permutation(len(order))[:config.session_length]
            for j in picks:
                q = bank[order[int(j)]]
                events.append(simulate_answer(student, q, rng,
                                              session_id=session_id,
                                              timestamp=timestamp))
                timestamp += 1
    return events


def _all_mastered(cmap: ConceptMap, events: Sequence[InteractionEvent],
                  criterion: MasteryCriterion) -> bool:
    return all(concept_mastered(qids, events, criterion)
               for qids in cmap.nodes.values())


def _run_one(strategy: Strategy, student: SimulatedStudent,
             bank: dict[str, Question], cmap: ConceptMap,
             config: ExperimentConfig, criterion: MasteryCriterion,
             rng: np.random.Generator, run_tag: str
             ) -> tuple[int, float, float, list[list[tuple[str, str]]]]:
    """Sessions until cumulative mastery or the question cap."""
    all_events: list[InteractionEvent] = []
    sessions: list[list[tuple[str, str]]] = []
    asked_total = 0
    correct_total = 0
    covered: set[str] = set()
    mastered_at: Optional[int] = None
    timestamp = 0
    session_no = 0
    while asked_total < config.max_questions and mastered_at is None:
        session = SessionState(session_id=f"{run_tag}-{session_no}",
                               user_id=student.user_id, topic="sim",
                               strategy_name=strategy.name,
                               length_target=config.session_length)
        strategy.begin_session(session)
        transcript: list[tuple[str, str]] = []
        while not session.finished and asked_total < config.max_questions:
            pool = [bank[qid] for qid in sorted(bank)
                    if qid not in session.asked]
            if not pool:
                break
            rec = strategy.next_question(session, pool)
            question = bank[rec.question_id]
            session.mark_asked(question.id)
            event = simulate_answer(student, question, rng,
                                    session_id=session.session_id,
                                    timestamp=timestamp)
            timestamp += 1
            session.add_event(event)
            strategy.observe_event(session, event)
            all_events.append(event)
            transcript.append((question.id, event.outcome.value))
            asked_total += 1
            correct_total += event.outcome is Outcome.CORRECT
            covered |= question.keywords
            if _all_mastered(cmap, all_events, criterion):
                mastered_at = asked_total
                break
        strategy.end_session(session)
        sessions.append(transcript)
        session_no += 1
        if not transcript:
            break
    questions_to_mastery = mastered_at if mastered_at is not None \
        else config.max_questions
    correct_rate = correct_total / asked_total if asked_total else 0.0
    all_keywords = {kw for q in bank.values() for kw in q.keywords}
    coverage = len(covered) / len(all_keywords) if all_keywords else 0.0
    return questions_to_mastery, correct_rate, coverage, sessions


def run_experiment(config: ExperimentConfig,
                   bank: Optional[dict[str, Question]] = None,
                   cmap: Optional[ConceptMap] = None,
                   criterion: MasteryCriterion = MasteryCriterion()
                   ) -> ExperimentResult:
    """Benchmark every configured strategy over the paired (student, seed) grid.

    The bank and concept map load from the configured paths unless passed
    in directly. Reruns with identical config and seeds produce identical
    results down to the byte.
    """
    if bank is None:
        if config.bank_path is None:
            raise ConfigError("bank_path: required when no bank is passed in")
        bank = {q.id: q for q in load_question_bank(config.bank_path)}
    if cmap is None:
        if config.nodes_path is None or config.arcs_path is None:
            raise ConfigError("nodes_path/arcs_path: required when no "
                              "concept map is passed in")
        cmap = load_concept_map(config.nodes_path, config.arcs_path)

    warmup = _warmup_log(bank, config)
    keywords = sorted({kw for q in bank.values() for kw in q.keywords})
    rows: list[ResultRow] = []
    transcripts: list[Transcript] = []
    for name in config.strategies:
        for student_idx in range(config.population):
            for seed in config.seeds:
                student_rng = np.random.default_rng([seed, student_idx, 1])
                run_rng = np.random.default_rng([seed, student_idx, 2])
                student = _make_student(f"student{student_idx}", keywords,
                                        config, student_rng)
                strategy = build_strategy(name, bank=bank, cmap=cmap,
                                          events=warmup, seed=seed)
                qtm, rate, coverage, sessions = _run_one(
                    strategy, student, bank, cmap, config, criterion,
                    run_rng, run_tag=f"{name}-{student_idx}-{seed}")
                rows.append(ResultRow(strategy=name, student=student_idx,
                                      seed=seed, questions_to_mastery=qtm,
                                      correct_rate=rate, coverage=coverage))
                transcripts.append(Transcript(strategy=name,
                                              student=student_idx, seed=seed,
                                              sessions=sessions))
    return ExperimentResult(config=config.to_dict(), rows=rows,
                            transcripts=transcripts)
