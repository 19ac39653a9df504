"""Per-student outcome prediction with random forests.

Two models share one feature schema: a classifier for the probability of a
correct answer and a regressor for expected answering time. Features join
the student's background profile, aggregates of the session so far, and
descriptors of the candidate question. A time-penalized utility heuristic
then picks the next question.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import (BackgroundProfile, InteractionEvent, Outcome, Question,
                   Recommendation, SessionState, impute_background,
                   question_success_rate)
from .forest import ForestConfig, ForestModel, TooFewRows, train_forest

SESSION_FEATURES = ("n_answered", "frac_correct", "n_skipped",
                    "mean_elapsed_ms", "mean_clicks", "mean_difficulty",
                    "mean_pop_rate")
CANDIDATE_FEATURES = ("cand_difficulty", "cand_teacher_level",
                      "cand_pop_rate", "cand_kw_overlap", "cand_n_keywords")


class SchemaMismatch(ValueError):
    pass


class EmptyEstimates(ValueError):
    pass


class EmptyPool(ValueError):
    pass


@dataclass(frozen=True)
class CandidateEstimate:
    question_id: str
    p_correct: float       # in [0, 1]
    expected_time_ms: float  # >= 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_correct <= 1.0:
            raise ValueError(f"p_correct out of range: {self.p_correct}")
        if self.expected_time_ms < 0.0:
            raise ValueError("expected_time_ms must be >= 0")


class FeatureBuilder:
    """Maps (profile, session history, candidate) onto a fixed feature vector.

    Background fields come first in sorted name order, categoricals encoded
    as their index among the sorted training values (unseen values map to
    -1). Session aggregates and candidate descriptors follow in a fixed
    order, so the schema is fully determined by the training profiles.
    """

    def __init__(self, profiles: Sequence[BackgroundProfile],
                 bank: dict[str, Question],
                 events: Iterable[InteractionEvent]) -> None:
        if not profiles:
            raise ValueError("at least one background profile is required")
        self._bank = bank
        self._pop_rate = {qid: question_success_rate(qid, list(events))
                          for qid in bank}
        filled = impute_background(list(profiles))
        self._by_user = {p.user_id: p for p in filled}
        self.background_fields = tuple(sorted(filled[0].answers))
        self._encoders: dict[str, dict[str, float]] = {}
        for name in self.background_fields:
            values = [p.answers[name] for p in filled]
            if any(isinstance(v, str) for v in values):
                categories = sorted({str(v) for v in values})
                self._encoders[name] = {c: float(i)
                                        for i, c in enumerate(categories)}
        self.feature_names = tuple(f"bg_{name}" for name in self.background_fields) \
            + SESSION_FEATURES + CANDIDATE_FEATURES

    def pop_rate(self, question_id: str) -> float:
        return self._pop_rate.get(question_id, 0.5)

    def profile_for(self, user_id: str) -> BackgroundProfile:
        """Imputed profile of a known user, or an all-mode stand-in."""
        if user_id in self._by_user:
            return self._by_user[user_id]
        modes = {name: self._mode_value(name) for name in self.background_fields}
        return BackgroundProfile(user_id=user_id, answers=modes)

    def _mode_value(self, name: str):
        values = [p.answers[name] for p in self._by_user.values()]
        counts: dict = {}
        for v in values:
            counts[v] = counts.get(v, 0) + 1
        top = max(counts.values())
        return min(v for v, c in counts.items() if c == top)

    def _encode_background(self, profile: BackgroundProfile) -> list[float]:
        if tuple(sorted(profile.answers)) != self.background_fields:
            raise SchemaMismatch(
                f"profile fields {sorted(profile.answers)} do not match "
                f"schema {list(self.background_fields)}")
        out = []
        for name in self.background_fields:
            value = profile.answers[name]
            if name in self._encoders:
                out.append(self._encoders[name].get(str(value), -1.0))
            else:
                out.append(float(value))
        return out

    def _session_aggregates(self, history: Sequence[InteractionEvent]) -> list[float]:
        answered = [e for e in history if e.outcome is not Outcome.SKIPPED]
        skipped = len(history) - len(answered)
        if not answered:
            frac_correct, mean_pop = 0.5, 0.5
            mean_elapsed = mean_clicks = 0.0
            mean_difficulty = 0.5
        else:
            frac_correct = sum(e.outcome is Outcome.CORRECT
                               for e in answered) / len(answered)
            mean_elapsed = float(np.mean([e.elapsed_ms for e in answered]))
            mean_clicks = float(np.mean([e.click_count for e in answered]))
            mean_difficulty = float(np.mean(
                [self._bank[e.question_id].difficulty.value == "difficult"
                 for e in answered if e.question_id in self._bank] or [0.5]))
            mean_pop = float(np.mean([self.pop_rate(e.question_id)
                                      for e in answered]))
        return [float(len(answered)), float(frac_correct), float(skipped),
                mean_elapsed, mean_clicks, mean_difficulty, float(mean_pop)]

    def _candidate_features(self, candidate: Question,
                            history: Sequence[InteractionEvent]) -> list[float]:
        covered: set[str] = set()
        for e in history:
            if e.question_id in self._bank:
                covered |= self._bank[e.question_id].keywords
        overlap = len(candidate.keywords & covered) / len(candidate.keywords)
        return [float(candidate.difficulty.value == "difficult"),
                (candidate.teacher_level - 1) / 4.0,
                self.pop_rate(candidate.id),
                float(overlap),
                float(len(candidate.keywords))]

    def vector(self, profile: BackgroundProfile,
               history: Sequence[InteractionEvent],
               candidate: Question) -> np.ndarray:
        parts = (self._encode_background(profile)
                 + self._session_aggregates(history)
                 + self._candidate_features(candidate, history))
        return np.array(parts, dtype=float)


@dataclass
class SupervisedModels:
    """Trained classifier/regressor pair plus the builder that feeds them."""

    builder: FeatureBuilder
    p_model: ForestModel
    t_model: ForestModel
    time_clip_ms: float

    def __post_init__(self) -> None:
        n = len(self.builder.feature_names)
        if self.p_model.n_features != n or self.t_model.n_features != n:
            raise SchemaMismatch("forest width does not match feature schema")


def training_rows(events: Sequence[InteractionEvent], bank: dict[str, Question],
                  builder: FeatureBuilder) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Replay logged sessions into (X, y_correct, y_time_ms) training arrays.

    Each answered (non-skipped) event contributes one row built from the
    state of its session just before the answer. Skips still count toward
    that state but produce no row of their own.
    """
    sessions: dict[str, list[InteractionEvent]] = {}
    order: list[str] = []
    for e in events:
        if e.session_id not in sessions:
            order.append(e.session_id)
        sessions.setdefault(e.session_id, []).append(e)

    X: list[np.ndarray] = []
    y_correct: list[float] = []
    y_time: list[float] = []
    for sid in order:
        history: list[InteractionEvent] = []
        for e in sessions[sid]:
            if e.question_id in bank and e.outcome is not Outcome.SKIPPED:
                profile = builder.profile_for(e.user_id)
                X.append(builder.vector(profile, history, bank[e.question_id]))
                y_correct.append(float(e.outcome is Outcome.CORRECT))
                y_time.append(float(e.elapsed_ms))
            history.append(e)
    if not X:
        return (np.empty((0, len(builder.feature_names))), np.empty(0), np.empty(0))
    return np.array(X), np.array(y_correct), np.array(y_time)


def train_from_log(events: Sequence[InteractionEvent], bank: dict[str, Question],
                   profiles: Sequence[BackgroundProfile],
                   n_trees: int = 100, max_depth: int = 10,
                   seed: int = 0) -> SupervisedModels:
    """Build features from the log and fit both forests.

    Time targets are clipped at their 99th percentile before fitting so a
    single walked-away-from-the-keyboard answer cannot dominate the
    regressor.
    """
    builder = FeatureBuilder(profiles, bank, events)
    X, y_correct, y_time = training_rows(events, bank, builder)
    if len(y_correct) < 2:
        raise TooFewRows(f"need at least 2 answered events, got {len(y_correct)}")
    clip = float(np.percentile(y_time, 99))
    y_time = np.minimum(y_time, clip)
    p_model = train_forest(X, y_correct, ForestConfig(
        task="classify", n_trees=n_trees, max_depth=max_depth, seed=seed))
    t_model = train_forest(X, y_time, ForestConfig(
        task="regress", n_trees=n_trees, max_depth=max_depth, seed=seed + 1))
    return SupervisedModels(builder=builder, p_model=p_model,
                            t_model=t_model, time_clip_ms=clip)


def estimate_candidates(models: SupervisedModels, session: SessionState,
                        profile: BackgroundProfile,
                        pool: Sequence[Question]) -> list[CandidateEstimate]:
    """Predict p(correct) and expected time for every pool question."""
    estimates = []
    for q in sorted(pool, key=lambda q: q.id):
        x = models.builder.vector(profile, session.events, q)
        p = min(max(models.p_model.predict_p(x), 0.0), 1.0)
        t = max(models.t_model.predict_value(x), 0.0)
        estimates.append(CandidateEstimate(question_id=q.id, p_correct=p,
                                           expected_time_ms=t))
    return estimates


def select_by_heuristic(estimates: Sequence[CandidateEstimate],
                        lam: float = 0.3, t_ref_ms: float = 120000.0,
                        served_correct: frozenset[str] | set[str] = frozenset()
                        ) -> Recommendation:
    """Maximize p_correct minus a capped time penalty.

    utility = p_correct - lam * min(expected_time / t_ref, 1). Questions the
    student has already answered correctly in past sessions are filtered
    out, unless that would empty the pool.
    """
    if not estimates:
        raise EmptyEstimates
    kept = [e for e in estimates if e.question_id not in served_correct]
    if not kept:
        kept = list(estimates)
    scores = {e.question_id:
              e.p_correct - lam * min(e.expected_time_ms / t_ref_ms, 1.0)
              for e in kept}
    best = min(scores, key=lambda qid: (-scores[qid], qid))
    return Recommendation(question_id=best, strategy="supervised",
                          scores=dict(sorted(scores.items(),
                                             key=lambda kv: (-kv[1], kv[0]))))


def recommend(models: Optional[SupervisedModels], session: SessionState,
              pool: list[Question], lam: float = 0.3,
              t_ref_ms: float = 120000.0,
              served_correct: frozenset[str] | set[str] = frozenset()
              ) -> Recommendation:
    """Heuristic pick from model estimates; easiest-first when untrained."""
    if not pool:
        raise EmptyPool
    if models is None:
        ordered = sorted(pool, key=lambda q: (q.teacher_level, q.id))
        return Recommendation(question_id=ordered[0].id, strategy="supervised",
                              scores={q.id: float(q.teacher_level)
                                      for q in ordered})
    profile = models.builder.profile_for(session.user_id)
    estimates = estimate_candidates(models, session, profile, pool)
    return select_by_heuristic(estimates, lam=lam, t_ref_ms=t_ref_ms,
                               served_correct=served_correct)


def save_models(models: SupervisedModels, prefix: str | Path) -> None:
    """Persist both forests next to a small schema sidecar file."""
    from .forest import save_forest

    prefix = Path(prefix)
    save_forest(models.p_model, prefix.with_suffix(".p.json"))
    save_forest(models.t_model, prefix.with_suffix(".t.json"))
    sidecar = {"feature_names": list(models.builder.feature_names),
               "time_clip_ms": models.time_clip_ms}
    prefix.with_suffix(".schema.json").write_text(json.dumps(sidecar),
                                                 encoding="utf-8")
