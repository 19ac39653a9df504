"""Hybrid collaborative filtering: factor model, KNN, blending, ranking."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from learnpath.collab import (
    EmptyMatrix,
    EmptyPool,
    FactorModel,
    UnknownQuestion,
    UnknownUser,
    cosine_similarity,
    fallback_order,
    hybrid_predict,
    knn_predict,
    load_model,
    recommend,
    save_model,
    train_factor_model,
)
from learnpath.core import RatingMatrix, SessionState
from tests.conftest import make_question


def mk_matrix(rows: dict[str, dict[str, int]],
              questions: list[str] | None = None) -> RatingMatrix:
    if questions is None:
        qs: set[str] = set()
        for r in rows.values():
            qs |= r.keys()
        questions = sorted(qs)
    entries = {(u, q): v for u, r in rows.items() for q, v in r.items()}
    return RatingMatrix(sorted(rows), questions, entries)


def flat_model(users, questions, mean=3.0, question_bias=None) -> FactorModel:
    """All-zero factors so predictions are mean + per-question bias exactly."""
    k = 1
    bq = np.zeros(len(questions)) if question_bias is None \
        else np.array(question_bias, dtype=float)
    return FactorModel(users=tuple(users), questions=tuple(questions), k=k,
                       global_mean=mean,
                       user_factors=np.zeros((len(users), k)),
                       question_factors=np.zeros((len(questions), k)),
                       user_bias=np.zeros(len(users)),
                       question_bias=bq)


def synthetic_rank2_case(seed: int = 7, n_users: int = 50, n_questions: int = 40,
                         observed_fraction: float = 0.3):
    """Ratings from a known rank-2 factor model, split into train/held-out.

    Returns (train_matrix, held_out) where held_out is a list of
    (user_id, question_id, true_rating) triples.
    """
    rng = np.random.default_rng(seed)
    mu = 3.0
    bu = rng.normal(0.0, 0.6, n_users)
    bq = rng.normal(0.0, 0.6, n_questions)
    P = rng.normal(0.0, 1.1, (n_users, 2))
    Q = rng.normal(0.0, 1.1, (n_questions, 2))
    true = mu + bu[:, None] + bq[None, :] + P @ Q.T
    ratings = np.clip(np.rint(true), 1, 5).astype(int)
    mask = rng.random((n_users, n_questions)) < observed_fraction
    users = [f"u{i:02d}" for i in range(n_users)]
    questions = [f"q{j:02d}" for j in range(n_questions)]
    train = {(users[i], questions[j]): int(ratings[i, j])
             for i in range(n_users) for j in range(n_questions) if mask[i, j]}
    held_out = [(users[i], questions[j], int(ratings[i, j]))
                for i in range(n_users) for j in range(n_questions)
                if not mask[i, j]]
    return RatingMatrix(users, questions, train), held_out


def session_for(user_id: str) -> SessionState:
    return SessionState(session_id="s1", user_id=user_id, topic="algebra",
                        strategy_name="collaborative_filtering")


class TestFactorModel:
    def test_rank_one_matrix_fits_to_near_zero(self):
        vals = np.outer([1, 2, 1], [2, 2, 1])
        m = mk_matrix({f"u{i}": {f"q{j}": int(vals[i, j]) for j in range(3)}
                       for i in range(3)})
        model = train_factor_model(m, k=1, epochs=500, learning_rate=0.05,
                                   regularization=0.001, seed=0)
        assert model.train_rmse[-1] < 0.05

    def test_single_entry_memorized(self):
        m = mk_matrix({"u1": {"q1": 4}})
        model = train_factor_model(m, k=1, epochs=50)
        assert model.predict("u1", "q1") == pytest.approx(4.0, abs=0.1)

    def test_empty_matrix_rejected(self):
        m = RatingMatrix(["u1"], ["q1"], {})
        with pytest.raises(EmptyMatrix):
            train_factor_model(m)

    def test_rmse_history_non_increasing(self):
        m, _ = synthetic_rank2_case(seed=5, n_users=12, n_questions=10,
                                    observed_fraction=0.6)
        model = train_factor_model(m, k=3, epochs=40, learning_rate=0.05)
        h = model.train_rmse
        assert len(h) == 40
        assert all(h[i + 1] <= h[i] + 1e-6 for i in range(len(h) - 1))

    def test_same_seed_is_bitwise_identical(self):
        m, _ = synthetic_rank2_case(seed=5, n_users=10, n_questions=8,
                                    observed_fraction=0.5)
        a = train_factor_model(m, k=2, epochs=20, seed=3)
        b = train_factor_model(m, k=2, epochs=20, seed=3)
        assert np.array_equal(a.user_factors, b.user_factors)
        assert np.array_equal(a.question_factors, b.question_factors)
        assert np.array_equal(a.user_bias, b.user_bias)
        assert np.array_equal(a.question_bias, b.question_bias)
        assert a.train_rmse == b.train_rmse

    def test_unknown_ids_raise(self):
        model = flat_model(["u1"], ["q1"])
        with pytest.raises(UnknownUser):
            model.predict("ghost", "q1")
        with pytest.raises(UnknownQuestion):
            model.predict("u1", "ghost")

    def test_held_out_rmse_beats_global_mean(self):
        m, held_out = synthetic_rank2_case()
        model = train_factor_model(m, k=2, epochs=300, learning_rate=0.02,
                                   regularization=0.02, seed=0)
        gm = float(np.mean(list(m.entries.values())))
        gm_rmse = math.sqrt(sum((v - gm) ** 2 for _, _, v in held_out)
                            / len(held_out))
        preds = [min(max(model.predict(u, q), 1.0), 5.0)
                 for u, q, _ in held_out]
        rmse = math.sqrt(sum((p - v) ** 2
                             for p, (_, _, v) in zip(preds, held_out))
                         / len(held_out))
        assert gm_rmse >= 1.1
        assert rmse < 0.75

    def test_save_load_round_trip_is_bitwise(self, tmp_path):
        m, _ = synthetic_rank2_case(seed=5, n_users=10, n_questions=8,
                                    observed_fraction=0.5)
        model = train_factor_model(m, k=2, epochs=15)
        p = tmp_path / "model.json"
        save_model(model, p)
        loaded = load_model(p)
        assert loaded.users == model.users
        assert loaded.questions == model.questions
        assert loaded.k == model.k
        assert loaded.global_mean == model.global_mean
        assert np.array_equal(loaded.user_factors, model.user_factors)
        assert np.array_equal(loaded.question_factors, model.question_factors)
        assert np.array_equal(loaded.user_bias, model.user_bias)
        assert np.array_equal(loaded.question_bias, model.question_bias)
        assert loaded.train_rmse == model.train_rmse


class TestKnn:
    HAND = {"u1": {"q1": 5, "q2": 3},
            "u2": {"q1": 5, "q2": 3, "q3": 4},
            "u3": {"q1": 1, "q2": 1, "q3": 2}}

    def test_hand_matrix_nearest_neighbor(self):
        m = mk_matrix(self.HAND)
        assert knn_predict(m, "u1", "q3", n_neighbors=1) == pytest.approx(
            4.0, abs=1e-9)

    def test_hand_matrix_two_neighbors(self):
        m = mk_matrix(self.HAND)
        # sim(u1,u3) over (5,3) vs (1,1) is 8 / sqrt(34 * 2).
        s3 = 8.0 / math.sqrt(68.0)
        expected = (1.0 * 4 + s3 * 2) / (1.0 + s3)
        assert knn_predict(m, "u1", "q3", n_neighbors=2) == pytest.approx(
            expected, abs=1e-9)

    def test_identical_twin_copies_rating(self):
        m = mk_matrix({"u1": {"q1": 4, "q2": 2},
                       "u2": {"q1": 4, "q2": 2, "q3": 5}})
        assert knn_predict(m, "u1", "q3") == pytest.approx(5.0)

    def test_no_rater_is_none(self):
        m = mk_matrix({"u1": {"q1": 4}, "u2": {"q1": 3}}, ["q1", "q3"])
        assert knn_predict(m, "u1", "q3") is None

    def test_own_rating_not_a_neighbor(self):
        m = mk_matrix({"u1": {"q3": 1}}, ["q3"])
        assert knn_predict(m, "u1", "q3") is None

    def test_uniform_similarity_is_plain_mean(self):
        m = mk_matrix({"u1": {"q1": 3, "q2": 3},
                       "u2": {"q1": 3, "q2": 3, "q3": 5},
                       "u3": {"q1": 3, "q2": 3, "q3": 2}})
        assert knn_predict(m, "u1", "q3", n_neighbors=3) == pytest.approx(3.5)

    def test_zero_similarity_falls_back_to_plain_mean(self):
        # No co-rated questions at all: similarities are 0, not undefined.
        m = mk_matrix({"u1": {"q1": 4},
                       "u2": {"q2": 5, "q3": 5},
                       "u3": {"q2": 1, "q3": 1}})
        assert knn_predict(m, "u1", "q3") == pytest.approx(3.0)

    def test_unknown_user_rejected(self):
        m = mk_matrix(self.HAND)
        with pytest.raises(UnknownUser):
            knn_predict(m, "ghost", "q3")

    def test_cosine_of_disjoint_is_zero(self):
        assert cosine_similarity({"a": 5}, {"b": 5}) == 0.0


class TestHybrid:
    def _fixture(self):
        # Factor side predicts exactly 4.0, KNN side exactly 3.0.
        model = flat_model(["u1", "u2"], ["q1", "q3"], mean=4.0)
        matrix = mk_matrix({"u1": {"q1": 5}, "u2": {"q1": 5, "q3": 3}})
        return model, matrix

    def test_blend_arithmetic(self):
        model, matrix = self._fixture()
        p = hybrid_predict(model, matrix, "u1", "q3", alpha=0.5)
        assert p.estimated_rating == pytest.approx(3.5)

    def test_alpha_one_is_factor_only(self):
        model, matrix = self._fixture()
        assert hybrid_predict(model, matrix, "u1", "q3",
                              alpha=1.0).estimated_rating == pytest.approx(4.0)

    def test_alpha_zero_is_knn_only(self):
        model, matrix = self._fixture()
        assert hybrid_predict(model, matrix, "u1", "q3",
                              alpha=0.0).estimated_rating == pytest.approx(3.0)

    def test_no_neighbor_falls_back_to_factor(self):
        model = flat_model(["u1"], ["q3"], mean=4.4)
        matrix = mk_matrix({"u1": {"q1": 3}}, ["q1", "q3"])
        assert hybrid_predict(model, matrix, "u1", "q3",
                              alpha=0.0).estimated_rating == pytest.approx(4.4)

    def test_clamped_to_scale(self):
        high = flat_model(["u1"], ["q3"], mean=6.2)
        low = flat_model(["u1"], ["q3"], mean=0.1)
        matrix = mk_matrix({"u1": {"q1": 3}}, ["q1", "q3"])
        assert hybrid_predict(high, matrix, "u1", "q3").estimated_rating == 5.0
        assert hybrid_predict(low, matrix, "u1", "q3").estimated_rating == 1.0

    @given(alpha=st.floats(min_value=0, max_value=1),
           mean=st.floats(min_value=-2, max_value=8))
    @settings(max_examples=50, deadline=None)
    def test_prediction_always_in_scale(self, alpha, mean):
        model = flat_model(["u1", "u2"], ["q1", "q3"], mean=mean)
        matrix = mk_matrix({"u1": {"q1": 5}, "u2": {"q1": 5, "q3": 2}})
        p = hybrid_predict(model, matrix, "u1", "q3", alpha=alpha)
        assert 1.0 <= p.estimated_rating <= 5.0


class TestRecommend:
    def _pool(self, ids, levels=None):
        levels = levels or {}
        return [make_question(q, level=levels.get(q, 2)) for q in ids]

    def test_pool_of_one(self):
        model = flat_model(["u1"], ["Q1"])
        matrix = mk_matrix({"u1": {"Q1": 3}})
        rec = recommend(session_for("u1"), matrix, model, self._pool(["Q1"]))
        assert rec.question_id == "Q1"

    def test_tie_breaks_to_smallest_id(self):
        model = flat_model(["u1"], ["Q1", "Q2", "Q3"], mean=3.1,
                           question_bias=[1.1, 0.0, 1.1])
        matrix = RatingMatrix(["u1"], ["Q1", "Q2", "Q3"], {})
        rec = recommend(session_for("u1"), matrix, model,
                        self._pool(["Q1", "Q2", "Q3"]))
        assert rec.question_id == "Q1"
        assert list(rec.scores) == ["Q1", "Q3", "Q2"]

    def test_scores_are_descending_sort(self):
        m, _ = synthetic_rank2_case(seed=5, n_users=10, n_questions=8,
                                    observed_fraction=0.5)
        model = train_factor_model(m, k=2, epochs=30)
        pool = self._pool(list(m.questions))
        rec = recommend(session_for(m.users[0]), m, model, pool)
        values = list(rec.scores.values())
        assert values == sorted(values, reverse=True)
        assert rec.question_id == next(iter(rec.scores))
        assert all(1.0 <= v <= 5.0 for v in values)

    def test_new_user_gets_cold_start_ordering(self):
        model = flat_model(["u1"], ["Q1", "Q2", "Q3"])
        matrix = mk_matrix({"u1": {"Q1": 3}}, ["Q1", "Q2", "Q3"])
        pool = self._pool(["Q1", "Q2", "Q3"],
                          levels={"Q1": 3, "Q2": 1, "Q3": 1})
        rec = recommend(session_for("newbie"), matrix, model, pool)
        assert rec.question_id == "Q2"

    def test_question_unknown_to_model_scored_at_global_mean(self):
        model = flat_model(["u1"], ["Q1"], mean=3.3)
        matrix = mk_matrix({"u1": {"Q1": 3}}, ["Q1"])
        rec = recommend(session_for("u1"), matrix, model,
                        self._pool(["Qnew"]))
        assert rec.scores["Qnew"] == pytest.approx(3.3)

    def test_empty_pool_rejected(self):
        model = flat_model(["u1"], ["Q1"])
        matrix = mk_matrix({"u1": {"Q1": 3}})
        with pytest.raises(EmptyPool):
            recommend(session_for("u1"), matrix, model, [])

    def test_fallback_order_sorts_by_level_then_id(self):
        pool = self._pool(["b", "a", "c"], levels={"b": 1, "a": 2, "c": 1})
        assert [q.id for q in fallback_order(pool)] == ["b", "c", "a"]
