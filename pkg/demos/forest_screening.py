"""Pick the next question from per-student success and time forecasts.

Two random forests are fit on a training log joined with background
questionnaires: one classifies whether a student will answer a candidate
correctly, the other regresses how long they will take. The selection
heuristic then trades predicted success against predicted time, so a
question the student would probably get right but only after ten minutes
loses to a slightly harder one they can finish quickly.
"""
from __future__ import annotations

import numpy as np

from learnpath.core import (BackgroundProfile, Difficulty, Question,
                            SessionState)
from learnpath.simulate import SimulatedStudent, simulate_answer
from learnpath.supervised import (estimate_candidates, select_by_heuristic,
                                  train_from_log)


def build_bank() -> dict[str, Question]:
    bank = {}
    for i in range(10):
        difficulty = Difficulty.DIFFICULT if i >= 6 else Difficulty.BASIC
        bank[f"q{i:02d}"] = Question(
            id=f"q{i:02d}", text=f"Item {i}",
            options=("a", "b", "c", "d"), correct_index=0,
            difficulty=difficulty, teacher_level=1 + i // 2,
            keywords=frozenset({"sets" if i % 2 else "maps"}),
            topic="discrete")
    return bank


def training_cohort(bank, rng, n_students: int = 30):
    """Stronger prior grades go with stronger simulated skills."""
    profiles, events = [], []
    for s in range(n_students):
        grade = float(rng.integers(40, 100))
        ability = (grade - 70.0) / 15.0
        profiles.append(BackgroundProfile(
            user_id=f"s{s:02d}",
            answers={"math_grade": grade,
                     "track": str(rng.choice(["science", "arts"]))}))
        student = SimulatedStudent(
            user_id=f"s{s:02d}",
            skill={"sets": ability, "maps": ability + 0.3},
            discrimination=1.3, dont_know_rate=0.1)
        for qid in sorted(bank):
            events.append(simulate_answer(student, bank[qid], rng,
                                          session_id=f"train-{s}",
                                          timestamp=len(events)))
    return profiles, events


def main() -> None:
    rng = np.random.default_rng(3)
    bank = build_bank()
    profiles, events = training_cohort(bank, rng)
    models = train_from_log(events, bank, profiles, n_trees=40, seed=0)
    print(f"Trained on {len(events)} answers from {len(profiles)} students; "
          f"feature vector: {len(models.builder.feature_names)} columns")
    print()

    for grade, label in [(92.0, "strong newcomer"), (48.0, "weak newcomer")]:
        profile = BackgroundProfile(
            user_id="new", answers={"math_grade": grade, "track": "science"})
        session = SessionState(session_id="screen", user_id="new",
                               topic="discrete", strategy_name="supervised")
        estimates = estimate_candidates(models, session, profile,
                                        list(bank.values()))
        pick = select_by_heuristic(estimates)
        print(f"{label} (math grade {grade:.0f}):")
        for est in sorted(estimates,
                          key=lambda e: -pick.scores[e.question_id])[:4]:
            print(f"  {est.question_id}: p_correct="
                  f"{est.p_correct:.2f}, expected "
                  f"{est.expected_time_ms / 1000:.0f}s, utility "
                  f"{pick.scores[est.question_id]:.2f}")
        print(f"  -> serve {pick.question_id}")
        print()


if __name__ == "__main__":
    main()
