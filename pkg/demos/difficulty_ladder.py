"""Cluster a bank into difficulty rungs and climb them one answer at a time.

Each question gets a single difficulty score blending what the teacher
claimed with how often the population actually failed it. One-dimensional
k-means turns the scores into easy, medium, and hard rungs. From there the
selection rule is a ladder: answer correctly and the next question comes
from one rung up, miss and it comes from one rung down, with keyword
overlap breaking ties inside a rung. When the target rung has no unserved
questions left, the nearest rung by centroid distance stands in.
"""
from __future__ import annotations

from learnpath.clustering import (KeywordGraph, cluster_bank, phase4_next)
from learnpath.core import (Difficulty, InteractionEvent, Outcome, Question,
                            SessionState)


def q(qid: str, level: int, *keywords: str) -> Question:
    return Question(id=qid, text=f"Item {qid}",
                    options=("a", "b", "c", "d"), correct_index=0,
                    difficulty=Difficulty.DIFFICULT if level >= 4
                    else Difficulty.BASIC,
                    teacher_level=level, keywords=frozenset(keywords),
                    topic="physics")


def history_event(user: str, qid: str, outcome: Outcome, stamp: int,
                  session: str = "past") -> InteractionEvent:
    return InteractionEvent(user_id=user, session_id=session,
                            question_id=qid, outcome=outcome,
                            elapsed_ms=20000, click_count=2, timestamp=stamp)


def main() -> None:
    bank = {question.id: question for question in [
        q("units", 1, "measurement"), q("speed", 1, "motion"),
        q("accel", 2, "motion", "calculus"),
        q("momentum", 3, "motion", "mass"),
        q("energy", 3, "mass", "work"),
        q("orbit", 4, "motion", "gravity"),
        q("tides", 5, "gravity"),
    ]}
    # Past attempts shift scores away from the teacher's guess: "speed"
    # turned out harder than level 1 suggests, "orbit" easier than level 4.
    past = [
        history_event("u1", "speed", Outcome.WRONG, 1),
        history_event("u2", "speed", Outcome.WRONG, 2),
        history_event("u3", "speed", Outcome.CORRECT, 3),
        history_event("u1", "orbit", Outcome.CORRECT, 4),
        history_event("u2", "orbit", Outcome.CORRECT, 5),
        history_event("u1", "units", Outcome.CORRECT, 6),
    ]

    clustering = cluster_bank(bank, past, k=3, seed=0)
    graph = KeywordGraph(bank.values())
    names = {0: "easy", 1: "medium", 2: "hard"}
    print("Difficulty rungs (centroid in brackets):")
    for rung in range(clustering.k):
        members = clustering.members(rung)
        print(f"  {names[rung]:<7}[{clustering.centroids[rung]:.2f}] "
              f"{members}")
    print()

    session = SessionState(session_id="ladder", user_id="lea",
                           topic="physics", strategy_name="clustering",
                           length_target=5)
    script = [Outcome.CORRECT, Outcome.CORRECT, Outcome.WRONG,
              Outcome.CORRECT, Outcome.CORRECT]
    pool = dict(bank)
    for stamp, outcome in enumerate(script, start=10):
        rec = phase4_next(session, clustering, graph, bank,
                          list(pool.values()))
        rung = names[clustering.cluster_of(rec.question_id)]
        print(f"serve {rec.question_id:<9} ({rung:<6}) "
              f"-> student answers {outcome.value}")
        session.mark_asked(rec.question_id)
        session.add_event(history_event("lea", rec.question_id, outcome,
                                        stamp, session="ladder"))
        del pool[rec.question_id]


if __name__ == "__main__":
    main()
