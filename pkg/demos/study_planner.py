"""Plan a study route from failure statistics, then refine picks by reward.

The planner reads historical failure rates per concept, takes them as
traversal costs, and finds the cheapest prerequisite-respecting route that
covers the concepts a student still needs. Inside each concept a tabular
Q-learner then scores individual questions: dense rewards flow from every
answer (failing often-missed questions pays the most when finally solved)
and a sparse completion bonus spreads back over the episode when the route
is finished.
"""
from __future__ import annotations

import numpy as np

from learnpath.concept_map import ConceptMap, MasteryCriterion
from learnpath.core import (Difficulty, Question, SessionState)
from learnpath.rl import (QTable, RewardSpec, apply_sparse,
                          concept_failure_costs,
                          current_concept_and_actions, dense_reward,
                          plan_path_dijkstra, q_update, recommend,
                          sparse_reward, state_of)
from learnpath.simulate import SimulatedStudent, simulate_answer


def build_course():
    def q(qid, keyword, level):
        return Question(id=qid, text=f"Exercise {qid}",
                        options=("a", "b", "c"), correct_index=0,
                        difficulty=Difficulty.BASIC, teacher_level=level,
                        keywords=frozenset({keyword}), topic="statistics")

    bank = {question.id: question for question in [
        q("mean-1", "averages", 1), q("mean-2", "averages", 1),
        q("var-1", "spread", 2), q("var-2", "spread", 2),
        q("dist-1", "distributions", 3), q("dist-2", "distributions", 3),
        q("test-1", "testing", 4), q("test-2", "testing", 4),
    ]}
    cmap = ConceptMap(
        nodes={"averages": frozenset({"mean-1", "mean-2"}),
               "spread": frozenset({"var-1", "var-2"}),
               "distributions": frozenset({"dist-1", "dist-2"}),
               "testing": frozenset({"test-1", "test-2"})},
        arcs=[("averages", "spread", 1.0),
              ("averages", "distributions", 1.0),
              ("spread", "testing", 1.0),
              ("distributions", "testing", 1.0)],
    )
    return cmap, bank


def historic_log(bank, rng):
    """Population history: spread questions get missed far more often."""
    events = []
    for s in range(20):
        student = SimulatedStudent(
            user_id=f"h{s}", skill={"averages": 1.5, "spread": -1.5,
                                    "distributions": 0.5, "testing": -0.5},
            discrimination=1.2)
        for qid in sorted(bank):
            events.append(simulate_answer(student, bank[qid], rng,
                                          session_id=f"hist-{s}",
                                          timestamp=len(events)))
    return events


def main() -> None:
    rng = np.random.default_rng(11)
    cmap, bank = build_course()
    history = historic_log(bank, rng)

    costs = concept_failure_costs(cmap, history)
    print("Concept costs (historical failure rates):")
    for concept in sorted(costs):
        print(f"  {concept:<14}{costs[concept]:.2f}")
    route = plan_path_dijkstra(cmap, {"testing"}, costs)
    print(f"Route to 'testing': {route} "
          f"(total cost {sum(costs[c] for c in route):.2f})")
    print()

    spec = RewardSpec(epsilon=0.3, epsilon_decay=0.95)
    table = QTable()
    learner = SimulatedStudent(user_id="kim",
                               skill={"averages": 1.0, "spread": -0.5,
                                      "distributions": 0.0, "testing": -1.0},
                               discrimination=1.3,
                               gain_attempt=0.2, gain_correct=0.4)

    criterion = MasteryCriterion()
    epsilon = spec.epsilon
    for episode in range(30):
        session = SessionState(session_id=f"ep{episode}", user_id="kim",
                               topic="statistics", strategy_name="rl",
                               length_target=len(bank))
        steps = []
        pool = dict(bank)
        while pool:
            concept, _ = current_concept_and_actions(
                session, route, cmap, criterion, set(pool))
            state = state_of(session, cmap, criterion, concept)
            rec = recommend(session, table, route, cmap,
                            list(pool.values()), spec, rng, epsilon=epsilon)
            session.mark_asked(rec.question_id)
            event = simulate_answer(learner, bank[rec.question_id], rng,
                                    session_id=session.session_id,
                                    timestamp=len(steps))
            session.add_event(event)
            reward = dense_reward(bank[rec.question_id], event.outcome,
                                  history)
            del pool[rec.question_id]
            next_concept, remaining = current_concept_and_actions(
                session, route, cmap, criterion, set(pool))
            next_state = state_of(session, cmap, criterion, next_concept)
            q_update(table, state, rec.question_id, reward,
                     next_state, remaining, spec)
            steps.append((state, rec.question_id))
        bonus = sparse_reward(route, {"testing"}, spec.r_complete)
        apply_sparse(table, steps, bonus, spec)
        epsilon = max(epsilon * spec.epsilon_decay, 0.02)

    print(f"After 30 practice episodes ({len(table)} state-action pairs):")
    fresh = SessionState(session_id="final", user_id="kim",
                         topic="statistics", strategy_name="rl",
                         length_target=len(bank))
    rec = recommend(fresh, table, route, cmap, list(bank.values()),
                    spec, rng, epsilon=0.0)
    print(f"Greedy first pick: {rec.question_id}")
    for qid, value in list(rec.scores.items())[:4]:
        print(f"  Q({qid}) = {value:.2f}")


if __name__ == "__main__":
    main()
