"""Difficulty clustering and keyword-graph question stepping.

Four phases: score each question on a blended difficulty scale, cluster the
scores with 1-D k-means, rank candidates by keyword-graph relevance, then
step one cluster up after a correct answer and one down after a miss.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import (InteractionEvent, Outcome, Question, Recommendation,
                   SessionState, question_success_rate)

logger = logging.getLogger(__name__)


class TooFewPoints(ValueError):
    pass


class EmptyPool(ValueError):
    pass


@dataclass(frozen=True)
class QuestionScore:
    question_id: str
    score: float  # in [0, 1]

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score out of range: {self.score}")


@dataclass
class DifficultyClustering:
    """Cluster assignment per question with centroids sorted ascending."""

    k: int
    assignments: dict[str, int]
    centroids: list[float]
    sse_history: list[float] = field(default_factory=list)

    def cluster_of(self, question_id: str) -> int:
        return self.assignments[question_id]

    def members(self, cluster: int) -> list[str]:
        return sorted(q for q, c in self.assignments.items() if c == cluster)


def phase1_score(question: Question, events: Iterable[InteractionEvent],
                 w_teacher: float = 0.5, w_student: float = 0.5,
                 prior: float = 0.5) -> QuestionScore:
    """Blend normalized teacher level with observed failure rate."""
    teacher = (question.teacher_level - 1) / 4.0
    student = 1.0 - question_success_rate(question.id, events, prior=prior)
    return QuestionScore(question_id=question.id,
                         score=w_teacher * teacher + w_student * student)


def _kmeans_pp_init(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++ seeding with squared-distance weighting."""
    centroids = [values[rng.integers(len(values))]]
    while len(centroids) < k:
        d2 = np.min([(values - c) ** 2 for c in centroids], axis=0)
        total = d2.sum()
        if total <= 0.0:
            # All points coincide with a centroid; fall back to uniform picks.
            centroids.append(values[rng.integers(len(values))])
            continue
        centroids.append(values[rng.choice(len(values), p=d2 / total)])
    return np.array(centroids, dtype=float)


def _lloyd(values: np.ndarray, centroids: np.ndarray,
           max_iters: int) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd iterations; returns labels, centroids, and per-iteration SSE."""
    history: list[float] = []
    labels = np.zeros(len(values), dtype=int)
    for _ in range(max_iters):
        dist = np.abs(values[:, None] - centroids[None, :])
        labels = np.argmin(dist, axis=1)
        for c in range(len(centroids)):
            mask = labels == c
            if not mask.any():
                # Reseed an emptied cluster at the point farthest from its centroid.
                farthest = int(np.argmax(np.min(dist, axis=1)))
                centroids[c] = values[farthest]
                labels[farthest] = c
                mask = labels == c
            centroids[c] = values[mask].mean()
        sse = float(np.sum((values - centroids[labels]) ** 2))
        if history and abs(history[-1] - sse) < 1e-12:
            history.append(sse)
            break
        history.append(sse)
    return labels, centroids, history


def _small_case_inits(values: np.ndarray, k: int,
                      cap: int = 128) -> list[np.ndarray]:
    """Every k-subset of the distinct values, when there are few enough.

    Random restarts alone can miss the optimal partition on tiny inputs.
    For k=2 this sweep closes that gap outright: the optimal 1-D
    2-partition is a contiguous cut and a Lloyd fixed point, and starting
    from the two data points adjacent across the cut induces exactly that
    partition, so one of these starts always converges to the optimum.
    """
    distinct = np.unique(values)
    if len(distinct) < k or math.comb(len(distinct), k) > cap:
        return []
    return [np.array(combo, dtype=float)
            for combo in itertools.combinations(distinct, k)]


def kmeans_1d(values: np.ndarray, k: int, seed: int = 0, max_iters: int = 100,
              n_init: int = 10) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Best of n_init seeded k-means++ runs on a 1-D array.

    Small inputs additionally try every distinct-value subset as an
    initialization, which keeps tiny cases at the true optimum. Returns
    (labels, centroids, sse_history) of the winning run, with clusters
    relabeled so centroids ascend. Deterministic given the seed.
    """
    values = np.asarray(values, dtype=float).ravel()
    if len(values) < k:
        raise TooFewPoints(f"need at least {k} points, got {len(values)}")
    best: tuple[np.ndarray, np.ndarray, list[float]] | None = None
    inits = [_kmeans_pp_init(values, k, np.random.default_rng(seq))
             for seq in np.random.SeedSequence(seed).spawn(n_init)]
    inits.extend(_small_case_inits(values, k))
    for init in inits:
        labels, centroids, history = _lloyd(values, init.copy(), max_iters)
        if best is None or history[-1] < best[2][-1] - 1e-12:
            best = (labels, centroids, history)
    labels, centroids, history = best
    order = np.argsort(centroids, kind="stable")
    remap = {int(old): new for new, old in enumerate(order)}
    labels = np.array([remap[int(c)] for c in labels], dtype=int)
    centroids = centroids[order]
    return labels, centroids, history


def phase2_cluster(scores: Sequence[QuestionScore], k: int = 3, seed: int = 0,
                   max_iters: int = 100, n_init: int = 10) -> DifficultyClustering:
    """Cluster phase-1 scores; raises TooFewPoints when len(scores) < k."""
    ordered = sorted(scores, key=lambda s: s.question_id)
    values = np.array([s.score for s in ordered], dtype=float)
    labels, centroids, history = kmeans_1d(values, k, seed=seed,
                                           max_iters=max_iters, n_init=n_init)
    assignments = {s.question_id: int(c) for s, c in zip(ordered, labels)}
    return DifficultyClustering(k=k, assignments=assignments,
                                centroids=[float(c) for c in centroids],
                                sse_history=history)


class KeywordGraph:
    """Bipartite question-keyword graph with cached keyword degrees."""

    def __init__(self, bank: Iterable[Question]) -> None:
        self._keywords: dict[str, frozenset[str]] = {}
        self._degree: dict[str, int] = {}
        for q in bank:
            self._keywords[q.id] = q.keywords
            for kw in q.keywords:
                self._degree[kw] = self._degree.get(kw, 0) + 1

    def degree(self, keyword: str) -> int:
        """Number of questions sharing this keyword."""
        return self._degree.get(keyword, 0)

    def keywords_of(self, question_id: str) -> frozenset[str]:
        return self._keywords[question_id]

    def total_degree(self, question_id: str) -> int:
        return sum(self.degree(kw) for kw in self._keywords[question_id])


def phase3_relevance(candidate: Question, reference: Question,
                     graph: KeywordGraph) -> float:
    """Sum of keyword degrees over the keywords the two questions share."""
    shared = candidate.keywords & reference.keywords
    return float(sum(graph.degree(kw) for kw in shared))


def _latest_answered(session: SessionState) -> InteractionEvent | None:
    for event in reversed(session.events):
        if event.outcome is not Outcome.SKIPPED:
            return event
    return None


def _nearest_nonempty(target: int, clustering: DifficultyClustering,
                      available: dict[int, list[Question]]) -> int:
    """Closest cluster by centroid distance that has candidates; ties go low."""
    ref = clustering.centroids[target]
    return min(available, key=lambda c: (abs(clustering.centroids[c] - ref), c))


def phase4_next(session: SessionState, clustering: DifficultyClustering,
                graph: KeywordGraph, bank: dict[str, Question],
                pool: list[Question]) -> Recommendation:
    """Step difficulty by the last answered outcome and rank by relevance.

    First question of a session comes from the easiest cluster and maximizes
    total keyword degree. Afterwards the target is the last answered
    question's cluster plus one after a correct answer, minus one otherwise,
    clamped to the valid range. An empty target cluster falls through to the
    nearest non-empty one by centroid distance.
    """
    if not pool:
        raise EmptyPool
    by_cluster: dict[int, list[Question]] = {}
    for q in pool:
        by_cluster.setdefault(clustering.cluster_of(q.id), []).append(q)

    last = _latest_answered(session)
    if last is None:
        target = 0
        if target not in by_cluster:
            target = _nearest_nonempty(target, clustering, by_cluster)
        candidates = by_cluster[target]
        scores = {q.id: float(graph.total_degree(q.id)) for q in candidates}
    else:
        base = clustering.cluster_of(last.question_id)
        step = 1 if last.outcome is Outcome.CORRECT else -1
        target = min(max(base + step, 0), clustering.k - 1)
        if target not in by_cluster:
            target = _nearest_nonempty(target, clustering, by_cluster)
        candidates = by_cluster[target]
        reference = bank[last.question_id]
        scores = {q.id: phase3_relevance(q, reference, graph) for q in candidates}

    best = min(candidates, key=lambda q: (-scores[q.id], q.id))
    return Recommendation(question_id=best.id, strategy="clustering",
                          scores=dict(sorted(scores.items(),
                                             key=lambda kv: (-kv[1], kv[0]))))


def cluster_bank(bank: dict[str, Question], events: Iterable[InteractionEvent],
                 k: int = 3, seed: int = 0) -> DifficultyClustering:
    """Score and cluster a whole bank in one call."""
    events = list(events)
    scores = [phase1_score(q, events) for q in bank.values()]
    return phase2_cluster(scores, k=k, seed=seed)


def dump_clustering(clustering: DifficultyClustering,
                    scores: Sequence[QuestionScore], path) -> None:
    """Write `question_id,score,cluster` rows sorted by question id."""
    import csv
    from pathlib import Path

    by_id = {s.question_id: s.score for s in scores}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["question_id", "score", "cluster"])
        for qid in sorted(clustering.assignments):
            writer.writerow([qid, repr(by_id[qid]), clustering.assignments[qid]])
