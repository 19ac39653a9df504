"""Hybrid collaborative filtering over the implicit rating matrix.

Model side: biased matrix factorization fit by per-entry stochastic gradient
descent on the observed ratings (the sparse-data reading of SVD). Memory
side: user-based KNN with cosine similarity over co-rated questions. The two
are blended with a configurable alpha.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Question, RatingMatrix, Recommendation, SessionState


class EmptyMatrix(ValueError):
    pass


class UnknownUser(KeyError):
    pass


class UnknownQuestion(KeyError):
    pass


class EmptyPool(ValueError):
    pass


@dataclass(frozen=True)
class Prediction:
    question_id: str
    estimated_rating: float  # clamped to [1, 5]


@dataclass
class FactorModel:
    """Learned factor/bias parameters plus the index maps they were fit on."""

    users: tuple[str, ...]
    questions: tuple[str, ...]
    k: int
    global_mean: float
    user_factors: np.ndarray      # |U| x k
    question_factors: np.ndarray  # |Q| x k
    user_bias: np.ndarray
    question_bias: np.ndarray
    train_rmse: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        for arr in (self.user_factors, self.question_factors,
                    self.user_bias, self.question_bias):
            if not np.all(np.isfinite(arr)):
                raise ValueError("model parameters must be finite")

    def predict(self, user_id: str, question_id: str) -> float:
        """Raw (unclamped) factor prediction."""
        try:
            u = self._uidx[user_id]
        except KeyError:
            raise UnknownUser(user_id) from None
        try:
            q = self._qidx[question_id]
        except KeyError:
            raise UnknownQuestion(question_id) from None
        return float(self.global_mean + self.user_bias[u] + self.question_bias[q]
                     + self.user_factors[u] @ self.question_factors[q])

    @property
    def _uidx(self) -> dict[str, int]:
        idx = self.__dict__.get("_uidx_cache")
        if idx is None:
            idx = {u: i for i, u in enumerate(self.users)}
            self.__dict__["_uidx_cache"] = idx
        return idx

    @property
    def _qidx(self) -> dict[str, int]:
        idx = self.__dict__.get("_qidx_cache")
        if idx is None:
            idx = {q: i for i, q in enumerate(self.questions)}
            self.__dict__["_qidx_cache"] = idx
        return idx


def _rmse(model_args, ui, qi, vals) -> float:
    mu, bu, bq, P, Q = model_args
    pred = mu + bu[ui] + bq[qi] + np.sum(P[ui] * Q[qi], axis=1)
    return float(np.sqrt(np.mean((vals - pred) ** 2)))


def train_factor_model(matrix: RatingMatrix, k: int = 8, epochs: int = 50,
                       learning_rate: float = 0.005, regularization: float = 0.02,
                       seed: int = 0) -> FactorModel:
    """Fit the biased factorization by SGD over the observed entries.

    Minimizes squared error with L2 regularization. Training RMSE is kept
    non-increasing across epochs (to 1e-6): an epoch that would worsen it is
    reverted and the learning rate halved. Deterministic given the seed.
    """
    if len(matrix) == 0:
        raise EmptyMatrix("rating matrix has no entries")
    rng = np.random.default_rng(seed)
    ui, qi, vals = matrix.triplets()
    n_users, n_questions = len(matrix.users), len(matrix.questions)
    mu = float(np.mean(vals))
    P = rng.normal(0.0, 0.1, size=(n_users, k))
    Q = rng.normal(0.0, 0.1, size=(n_questions, k))
    bu = np.zeros(n_users)
    bq = np.zeros(n_questions)

    lr = learning_rate
    history: list[float] = []
    best = _rmse((mu, bu, bq, P, Q), ui, qi, vals)
    for _ in range(epochs):
        snapshot = (bu.copy(), bq.copy(), P.copy(), Q.copy())
        order = rng.permutation(len(vals))
        for j in order:
            u, q, r = ui[j], qi[j], vals[j]
            err = r - (mu + bu[u] + bq[q] + P[u] @ Q[q])
            bu[u] += lr * (err - regularization * bu[u])
            bq[q] += lr * (err - regularization * bq[q])
            pu = P[u].copy()
            P[u] += lr * (err * Q[q] - regularization * P[u])
            Q[q] += lr * (err * pu - regularization * Q[q])
        rmse = _rmse((mu, bu, bq, P, Q), ui, qi, vals)
        if rmse > best + 1e-6:
            bu, bq, P, Q = snapshot
            lr *= 0.5
            rmse = best
        else:
            best = min(best, rmse)
        history.append(rmse)

    return FactorModel(users=matrix.users, questions=matrix.questions, k=k,
                       global_mean=mu, user_factors=P, question_factors=Q,
                       user_bias=bu, question_bias=bq, train_rmse=history)


def cosine_similarity(a: dict[str, int], b: dict[str, int]) -> float:
    """Cosine over the co-rated questions of two users; 0 when none co-rated."""
    shared = a.keys() & b.keys()
    if not shared:
        return 0.0
    va = np.array([a[q] for q in sorted(shared)], dtype=float)
    vb = np.array([b[q] for q in sorted(shared)], dtype=float)
    denom = float(np.linalg.norm(va) * np.linalg.norm(vb))
    if denom == 0.0:
        return 0.0
    return float(va @ vb / denom)


def knn_predict(matrix: RatingMatrix, user_id: str, question_id: str,
                n_neighbors: int = 20) -> float | None:
    """Similarity-weighted mean of the top-n similar raters of the question.

    Returns None when no other user rated it. With all-equal similarities the
    prediction reduces to the plain mean of the raters' values.
    """
    if user_id not in matrix.user_index:
        raise UnknownUser(user_id)
    own = matrix.ratings_of(user_id)
    raters = matrix.raters_of(question_id)
    raters.pop(user_id, None)
    if not raters:
        return None
    sims = {v: cosine_similarity(own, matrix.ratings_of(v)) for v in raters}
    neighbors = sorted(raters, key=lambda v: (-sims[v], v))[:n_neighbors]
    total = sum(sims[v] for v in neighbors)
    if total <= 0.0:
        return float(np.mean([raters[v] for v in neighbors]))
    return float(sum(sims[v] * raters[v] for v in neighbors) / total)


def hybrid_predict(model: FactorModel, matrix: RatingMatrix, user_id: str,
                   question_id: str, alpha: float = 0.5,
                   n_neighbors: int = 20) -> Prediction:
    """Blend factor and KNN predictions; factor-only when KNN has no neighbor."""
    factor = model.predict(user_id, question_id)
    knn = knn_predict(matrix, user_id, question_id, n_neighbors=n_neighbors) \
        if user_id in matrix.user_index else None
    if knn is None:
        estimate = factor
    else:
        estimate = alpha * factor + (1.0 - alpha) * knn
    return Prediction(question_id=question_id,
                      estimated_rating=float(min(max(estimate, 1.0), 5.0)))


def fallback_order(pool: list[Question]) -> list[Question]:
    """Cold-start ordering: easiest first by teacher level, then id."""
    return sorted(pool, key=lambda q: (q.teacher_level, q.id))


def recommend(session: SessionState, matrix: RatingMatrix, model: FactorModel,
              pool: list[Question], alpha: float = 0.5,
              n_neighbors: int = 20) -> Recommendation:
    """Highest estimated rating over the unasked pool, ties to smallest id.

    Users unknown to the model get the cold-start fallback ordering. A pool
    question the model has never seen is scored at the global mean.
    """
    if not pool:
        raise EmptyPool
    if session.user_id not in model._uidx:
        ordered = fallback_order(pool)
        scores = {q.id: float(q.teacher_level) for q in ordered}
        return Recommendation(question_id=ordered[0].id,
                              strategy="collaborative_filtering", scores=scores)
    predictions: dict[str, float] = {}
    for q in pool:
        try:
            predictions[q.id] = hybrid_predict(
                model, matrix, session.user_id, q.id,
                alpha=alpha, n_neighbors=n_neighbors).estimated_rating
        except UnknownQuestion:
            predictions[q.id] = float(min(max(model.global_mean, 1.0), 5.0))
    ranked = sorted(predictions, key=lambda qid: (-predictions[qid], qid))
    return Recommendation(question_id=ranked[0],
                          strategy="collaborative_filtering",
                          scores={qid: predictions[qid] for qid in ranked})


def save_model(model: FactorModel, path: str | Path) -> None:
    """Write the model as self-describing JSON; floats round-trip bitwise."""
    payload = {
        "users": list(model.users),
        "questions": list(model.questions),
        "k": model.k,
        "global_mean": model.global_mean,
        "user_factors": model.user_factors.tolist(),
        "question_factors": model.question_factors.tolist(),
        "user_bias": model.user_bias.tolist(),
        "question_bias": model.question_bias.tolist(),
        "train_rmse": model.train_rmse,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path) -> FactorModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return FactorModel(
        users=tuple(payload["users"]),
        questions=tuple(payload["questions"]),
        k=int(payload["k"]),
        global_mean=float(payload["global_mean"]),
        user_factors=np.array(payload["user_factors"], dtype=np.float64).reshape(
            len(payload["users"]), payload["k"]),
        question_factors=np.array(payload["question_factors"], dtype=np.float64).reshape(
            len(payload["questions"]), payload["k"]),
        user_bias=np.array(payload["user_bias"], dtype=np.float64),
        question_bias=np.array(payload["question_bias"], dtype=np.float64),
        train_rmse=[float(v) for v in payload["train_rmse"]],
    )
