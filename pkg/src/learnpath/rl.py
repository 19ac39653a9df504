"""Tabular Q-learning over question choices plus a concept-path planner.

The learner's situation is collapsed into a small discrete state (mastery
bitset, session-accuracy bucket, current concept) so Q-values stay tabular.
A shortest-path sweep adapted to AND-style prerequisites fixes the concept
order up front; Q-learning then optimizes question choice inside each
concept. Dense rewards fire per answer, a sparse completion reward is
spread back over the episode at session end.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .concept_map import ConceptMap, MasteryCriterion, concept_mastered
from .core import (InteractionEvent, Outcome, Question, Recommendation,
                   SessionState, question_success_rate)

logger = logging.getLogger(__name__)

OUTCOME_FACTOR = {Outcome.CORRECT: 1.0, Outcome.WRONG: 0.25,
                  Outcome.DONT_KNOW: 0.0, Outcome.SKIPPED: 0.0}


class Infeasible(ValueError):
    pass


class EmptyPool(ValueError):
    pass


@dataclass(frozen=True)
class LearningState:
    """Discrete MDP state: who knows what, how the session is going, where."""

    mastery_bits: int
    n_concepts: int
    progress_bucket: int
    current_concept: Optional[str]

    def __post_init__(self) -> None:
        if not 0 <= self.progress_bucket <= 4:
            raise ValueError(f"bucket out of range: {self.progress_bucket}")
        if self.n_concepts < 0 or self.mastery_bits >= (1 << max(self.n_concepts, 1)):
            raise ValueError("mastery bits wider than the concept count")

    def encode(self) -> str:
        bits = format(self.mastery_bits, f"0{max(self.n_concepts, 1)}b")
        return f"m{bits}|b{self.progress_bucket}|c{self.current_concept or '-'}"


def state_of(session: SessionState, cmap: ConceptMap,
             criterion: MasteryCriterion, current_concept: Optional[str],
             mastery_events: Optional[Sequence[InteractionEvent]] = None
             ) -> LearningState:
    """Project a live session onto the tabular state space.

    The mastery bitset reads from mastery_events when given (the student's
    cross-session history); the accuracy bucket always reflects the current
    session only.
    """
    concepts = sorted(cmap.nodes)
    source = session.events if mastery_events is None else mastery_events
    bits = 0
    for i, concept in enumerate(concepts):
        if concept_mastered(cmap.nodes[concept], source, criterion):
            bits |= 1 << i
    answered = [e for e in session.events if e.outcome is not Outcome.SKIPPED]
    frac = (sum(e.outcome is Outcome.CORRECT for e in answered) / len(answered)
            if answered else 0.0)
    bucket = min(int(frac / 0.25), 4)
    return LearningState(mastery_bits=bits, n_concepts=len(concepts),
                         progress_bucket=bucket, current_concept=current_concept)


class QTable:
    """State-action values; unseen pairs read as exactly 0."""

    def __init__(self) -> None:
        self._table: dict[str, dict[str, float]] = {}

    def get(self, state: LearningState, action: str) -> float:
        return self._table.get(state.encode(), {}).get(action, 0.0)

    def set(self, state: LearningState, action: str, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError(f"Q-value must be finite, got {value}")
        self._table.setdefault(state.encode(), {})[action] = value

    def max_over(self, state: LearningState, actions: Iterable[str]) -> float:
        """Max Q over the given actions; 0 when the action set is empty."""
        values = [self.get(state, a) for a in actions]
        return max(values) if values else 0.0

    def __len__(self) -> int:
        return sum(len(v) for v in self._table.values())

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self._table, sort_keys=True),
                              encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path) -> "QTable":
        table = cls()
        table._table = {s: {a: float(v) for a, v in acts.items()}
                        for s, acts in json.loads(
                            Path(path).read_text(encoding="utf-8")).items()}
        return table


def dense_reward(question: Question, outcome: Outcome,
                 events: Sequence[InteractionEvent], prior: float = 0.5) -> float:
    """Population failure rate of the question scaled by the outcome.

    Harder questions (higher failure rate) carry more learning value; the
    factor rewards a correct answer fully, a wrong attempt a quarter, and an
    admitted don't-know not at all.
    """
    base = 1.0 - question_success_rate(question.id, events, prior=prior)
    return base * OUTCOME_FACTOR[outcome]


def sparse_reward(path: Sequence[str], required: set[str],
                  r_complete: float = 10.0) -> float:
    """Completion reward, proportional when only part of required is covered."""
    if not required:
        return r_complete
    covered = len(required & set(path))
    return r_complete * covered / len(required)


@dataclass
class RewardSpec:
    """Reward functions and learning hyperparameters in one bundle."""

    dense: Callable[..., float] = dense_reward
    sparse: Callable[..., float] = sparse_reward
    gamma: float = 0.9
    alpha_lr: float = 0.1
    epsilon: float = 0.2
    epsilon_decay: float = 0.99
    r_complete: float = 10.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.alpha_lr <= 1.0:
            raise ValueError(f"alpha_lr must be in (0, 1], got {self.alpha_lr}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ValueError("epsilon_decay must be in (0, 1]")


def q_update(table: QTable, s: LearningState, a: str, r: float,
             s_next: LearningState, actions_next: Iterable[str],
             spec: RewardSpec) -> QTable:
    """One temporal-difference step; only the (s, a) entry changes.

    Terminal states are expressed by an empty actions_next, which zeroes the
    bootstrap term.
    """
    target = r + spec.gamma * table.max_over(s_next, actions_next)
    updated = table.get(s, a) + spec.alpha_lr * (target - table.get(s, a))
    table.set(s, a, updated)
    return table


def apply_sparse(table: QTable, steps: Sequence[tuple[LearningState, str]],
                 reward: float, spec: RewardSpec) -> QTable:
    """Spread a sparse episode reward uniformly over its recorded steps."""
    if not steps:
        return table
    share = reward / len(steps)
    for s, a in steps:
        table.set(s, a, table.get(s, a) + spec.alpha_lr * share)
    return table


def _prereq_ids(cmap: ConceptMap, concept: str) -> set[str]:
    return {u for u, _ in cmap.prerequisites(concept)}


def _ancestors(cmap: ConceptMap, concept: str) -> set[str]:
    """Prerequisite closure of a concept, excluding the concept itself."""
    seen: set[str] = set()
    frontier = [concept]
    while frontier:
        node = frontier.pop()
        for pre in _prereq_ids(cmap, node):
            if pre not in seen:
                seen.add(pre)
                frontier.append(pre)
    seen.discard(concept)
    return seen


def _topological(cmap: ConceptMap, subset: set[str]) -> list[str]:
    """Kahn order of subset under the prerequisite relation, ties by ID."""
    prereqs = {c: _prereq_ids(cmap, c) & subset for c in subset}
    indeg = {c: len(prereqs[c]) for c in subset}
    ready = sorted(c for c in subset if indeg[c] == 0)
    placed: set[str] = set()
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        placed.add(node)
        fresh = []
        for other in subset:
            if other not in placed and node in prereqs[other]:
                indeg[other] -= 1
                if indeg[other] == 0 and other not in ready:
                    fresh.append(other)
        if fresh:
            ready.extend(fresh)
            ready.sort()
    return order


def plan_path_dijkstra(cmap: ConceptMap, required: set[str],
                       failure_costs: dict[str, float]) -> list[str]:
    """Cheapest prerequisite-feasible concept sequence covering required.

    Repeatedly targets the unvisited required concept whose remaining
    prerequisite closure is cheapest (the shortest-path sweep adapted to
    all-prerequisites-needed reachability), then emits that closure in
    topological order. Entering a concept costs its failure cost; ties
    break on the smaller concept ID.
    """
    unknown = required - set(cmap.nodes)
    if unknown:
        raise Infeasible(f"required concepts not in the map: {sorted(unknown)}")
    for concept, cost in failure_costs.items():
        if cost < 0:
            raise ValueError(f"negative failure cost for {concept}")

    visited: list[str] = []
    done: set[str] = set()
    remaining = set(required)
    while remaining:
        def closure_cost(target: str) -> float:
            need = (_ancestors(cmap, target) | {target}) - done
            return sum(failure_costs.get(c, 0.0) for c in need)

        target = min(sorted(remaining), key=lambda c: (closure_cost(c), c))
        need = (_ancestors(cmap, target) | {target}) - done
        for concept in _topological(cmap, need):
            visited.append(concept)
            done.add(concept)
        remaining -= done
    return visited


def concept_failure_costs(cmap: ConceptMap, events: Sequence[InteractionEvent],
                          prior: float = 0.5) -> dict[str, float]:
    """Mean failure rate over each concept's questions, for the planner."""
    costs = {}
    for concept in cmap.nodes:
        rates = [1.0 - question_success_rate(q, events, prior=prior)
                 for q in sorted(cmap.nodes[concept])]
        costs[concept] = float(np.mean(rates)) if rates else prior
    return costs


def _concept_finished(concept: str, cmap: ConceptMap,
                      events: Sequence[InteractionEvent],
                      criterion: MasteryCriterion, pool_ids: set[str]) -> bool:
    if concept_mastered(cmap.nodes[concept], events, criterion):
        return True
    return not (cmap.nodes[concept] & pool_ids)


def current_concept_and_actions(session: SessionState, planner_path: Sequence[str],
                                cmap: ConceptMap, criterion: MasteryCriterion,
                                pool_ids: set[str],
                                mastery_events: Optional[Sequence[InteractionEvent]] = None
                                ) -> tuple[Optional[str], list[str]]:
    """Next unfinished planner entry and the pool actions available in it.

    With the whole path finished the remaining pool itself becomes the
    action set (review mode); an empty pool means a terminal state.
    """
    events = session.events if mastery_events is None else mastery_events
    for concept in planner_path:
        if not _concept_finished(concept, cmap, events, criterion, pool_ids):
            return concept, sorted(cmap.nodes[concept] & pool_ids)
    return None, sorted(pool_ids)


def recommend(session: SessionState, qtable: QTable, planner_path: Sequence[str],
              cmap: ConceptMap, pool: list[Question], spec: RewardSpec,
              rng: np.random.Generator,
              criterion: MasteryCriterion = MasteryCriterion(),
              epsilon: Optional[float] = None,
              mastery_events: Optional[Sequence[InteractionEvent]] = None
              ) -> Recommendation:
    """Epsilon-greedy question choice inside the next unfinished concept.

    A concept counts as finished once mastered or once the pool holds none
    of its questions. If the whole path is finished but questions remain,
    choice falls through to the full pool. Raw Q-values of every candidate
    ride along in the scores map.
    """
    if not pool:
        raise EmptyPool
    pool_ids = {q.id for q in pool}
    current, candidates = current_concept_and_actions(
        session, planner_path, cmap, criterion, pool_ids, mastery_events)
    state = state_of(session, cmap, criterion, current, mastery_events)
    eps = spec.epsilon if epsilon is None else epsilon
    if rng.random() < eps:
        chosen = candidates[int(rng.integers(len(candidates)))]
    else:
        chosen = min(candidates, key=lambda qid: (-qtable.get(state, qid), qid))
    scores = {qid: qtable.get(state, qid) for qid in candidates}
    return Recommendation(question_id=chosen, strategy="reinforcement_learning",
                          scores=dict(sorted(scores.items(),
                                             key=lambda kv: (-kv[1], kv[0]))))
