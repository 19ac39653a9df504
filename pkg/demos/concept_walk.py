"""Guide a simulated student through a prerequisite map.

A four-concept arithmetic course: fractions unlock ratios, ratios unlock
percentages, and a geometry refresher sits off to the side. The student
starts strong on fractions and weak everywhere else, but improves with
practice. Watch the walk hold the line on prerequisites, revisit weak
concepts until they are mastered, and stop once everything is.
"""
from __future__ import annotations

import numpy as np

from learnpath.concept_map import (ConceptMap, MasteryCriterion,
                                   PoolExhausted, concept_mastered, recommend)
from learnpath.core import Difficulty, Question, SessionState
from learnpath.simulate import SimulatedStudent, simulate_answer


def q(qid: str, keyword: str, level: int,
      difficulty: Difficulty = Difficulty.BASIC) -> Question:
    return Question(id=qid, text=f"Exercise {qid}",
                    options=("a", "b", "c", "d"), correct_index=0,
                    difficulty=difficulty, teacher_level=level,
                    keywords=frozenset({keyword}), topic="arithmetic")


def build_course() -> tuple[ConceptMap, dict[str, Question]]:
    bank = {question.id: question for question in [
        q("frac-1", "fractions", 1), q("frac-2", "fractions", 1),
        q("ratio-1", "ratios", 2), q("ratio-2", "ratios", 2),
        q("pct-1", "percentages", 3), q("pct-2", "percentages", 3),
        q("pct-3", "percentages", 3),
        q("pct-4", "percentages", 3, Difficulty.DIFFICULT),
        q("geo-1", "shapes", 2), q("geo-2", "shapes", 2),
    ]}
    cmap = ConceptMap(
        nodes={
            "fractions": frozenset({"frac-1", "frac-2"}),
            "ratios": frozenset({"ratio-1", "ratio-2"}),
            "percentages": frozenset({"pct-1", "pct-2", "pct-3", "pct-4"}),
            "geometry": frozenset({"geo-1", "geo-2"}),
        },
        arcs=[("fractions", "ratios", 1.0),
              ("ratios", "percentages", 1.0)],
    )
    return cmap, bank


def main() -> None:
    cmap, bank = build_course()
    criterion = MasteryCriterion()
    student = SimulatedStudent(
        user_id="ada",
        skill={"fractions": 2.5, "ratios": -0.5, "percentages": -1.0,
               "shapes": 0.5},
        discrimination=1.5, dont_know_rate=0.05,
        gain_attempt=0.3, gain_correct=0.5,
    )
    rng = np.random.default_rng(7)
    session = SessionState(session_id="walk", user_id="ada",
                           topic="arithmetic", strategy_name="concept_map",
                           length_target=len(bank))

    print("Prerequisites:", [f"{u} -> {v}" for u, v, _ in cmap.arcs])
    print()
    step = 0
    while True:
        try:
            rec = recommend(session, cmap, bank, criterion)
        except PoolExhausted:
            print("Every remaining question has been used up.")
            break
        if rec is None:
            break
        step += 1
        concept = cmap.concepts_of(rec.question_id)[0]
        session.mark_asked(rec.question_id)
        event = simulate_answer(student, bank[rec.question_id], rng,
                                session_id="walk", timestamp=step)
        session.add_event(event)
        mastered = sorted(c for c, qids in cmap.nodes.items()
                          if concept_mastered(qids, session.events, criterion))
        print(f"{step:>2}. {rec.question_id:<8} ({concept:<12}) "
              f"-> {event.outcome.value:<9} mastered: {mastered}")

    mastered = sorted(c for c, qids in cmap.nodes.items()
                      if concept_mastered(qids, session.events, criterion))
    retired = sorted(c for c in cmap.nodes if c not in mastered)
    print()
    print(f"Done after {step} questions. Mastered: {mastered}.")
    if retired:
        print(f"Ran out of material without mastery on: {retired}.")


if __name__ == "__main__":
    main()
