"""Predict implicit difficulty ratings from other students' attempts.

Every logged answer becomes a 1..5 rating: "don't know" rates 1, a wrong
answer on a basic question 2, and so on up to 5 for solving a difficult
question. A cohort of simulated students with mixed abilities fills the
matrix, then a factor model and a cosine KNN each predict the held-back
cells of one target student. The script prints both predictions side by
side with the blended value the recommender actually uses.
"""
from __future__ import annotations

import numpy as np

from learnpath.collab import (hybrid_predict, knn_predict,
                              train_factor_model)
from learnpath.core import (Difficulty, Question, build_rating_matrix)
from learnpath.simulate import SimulatedStudent, simulate_answer


def build_bank() -> dict[str, Question]:
    bank = {}
    for i in range(12):
        difficulty = Difficulty.DIFFICULT if i % 3 == 2 else Difficulty.BASIC
        keyword = ("algebra", "geometry", "logic")[i % 3]
        bank[f"q{i:02d}"] = Question(
            id=f"q{i:02d}", text=f"Item {i}",
            options=("a", "b", "c", "d"), correct_index=0,
            difficulty=difficulty, teacher_level=1 + i % 5,
            keywords=frozenset({keyword}), topic="mixed")
    return bank


def simulate_cohort(bank, rng, n_students: int = 25):
    """Each student answers most of the bank; ability varies by keyword."""
    events = []
    for s in range(n_students):
        skills = {kw: float(rng.normal(0.0, 1.2))
                  for kw in ("algebra", "geometry", "logic")}
        student = SimulatedStudent(user_id=f"s{s:02d}", skill=skills,
                                   discrimination=1.2, dont_know_rate=0.15)
        for qid in sorted(bank):
            if rng.random() < 0.25:
                continue  # leave a quarter of the matrix unobserved
            events.append(simulate_answer(student, bank[qid], rng,
                                          session_id=f"cohort-{s}",
                                          timestamp=len(events)))
    return events


def main() -> None:
    rng = np.random.default_rng(42)
    bank = build_bank()
    events = simulate_cohort(bank, rng)
    matrix = build_rating_matrix(events, list(bank.values()))
    observed = len(matrix.entries)
    print(f"Rating matrix: {len(matrix.users)} students x "
          f"{len(matrix.questions)} questions, {observed} observed cells")

    model = train_factor_model(matrix, k=4, epochs=120, learning_rate=0.01,
                               regularization=0.02, seed=0)
    print(f"Factor model train RMSE after {len(model.train_rmse)} epochs: "
          f"{model.train_rmse[-1]:.3f}")
    print()

    target = "s00"
    rated = {qid for (u, qid) in matrix.entries if u == target}
    unseen = [qid for qid in matrix.questions if qid not in rated]
    print(f"Predictions for {target} on questions they never answered:")
    print(f"{'question':<10}{'knn':>8}{'factors':>10}{'blended':>10}")
    for qid in unseen:
        knn = knn_predict(matrix, target, qid)
        mf = model.predict(target, qid)
        blend = hybrid_predict(model, matrix, target, qid)
        knn_text = f"{knn:.2f}" if knn is not None else "n/a"
        print(f"{qid:<10}{knn_text:>8}{mf:>10.2f}"
              f"{blend.estimated_rating:>10.2f}")
    print()
    print("A high predicted rating means the question should feel "
          "rewarding rather than discouraging, so the recommender serves "
          "the highest-rated unseen question next.")


if __name__ == "__main__":
    main()
