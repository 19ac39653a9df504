"""Uniform strategy interface over the five recommenders plus a random control.

Callers drive every strategy through the same four calls (begin_session,
next_question, observe_event, end_session) and never branch on which one is
behind the interface. A small registry maps strategy names to their layer
tag and a factory that trains the strategy from a shared event log.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Protocol, Sequence

import numpy as np

from . import clustering as _clustering
from . import collab as _collab
from . import concept_map as _concept_map
from . import rl as _rl
from . import supervised as _supervised
from .concept_map import ConceptMap, MasteryCriterion, WalkConfig
from .core import (BackgroundProfile, InteractionEvent, Outcome, Question,
                   Recommendation, SessionState, build_rating_matrix)
from .forest import TooFewRows

logger = logging.getLogger(__name__)


class UnknownStrategy(KeyError):
    pass


class EmptyPool(ValueError):
    pass


class Strategy(Protocol):
    """What the harness and the service expect from any recommender."""

    name: str
    layer: str

    def begin_session(self, session: SessionState) -> None: ...

    def next_question(self, session: SessionState,
                      pool: list[Question]) -> Recommendation: ...

    def observe_event(self, session: SessionState,
                      event: InteractionEvent) -> None: ...

    def end_session(self, session: SessionState) -> None: ...


class _Base:
    """Shared no-op lifecycle hooks; stateless strategies keep these."""

    name = "base"
    layer = "control"

    def begin_session(self, session: SessionState) -> None:
        return None

    def observe_event(self, session: SessionState,
                      event: InteractionEvent) -> None:
        return None

    def end_session(self, session: SessionState) -> None:
        return None

    @staticmethod
    def _require_pool(pool: list[Question]) -> None:
        if not pool:
            raise EmptyPool


class _UserHistory:
    """Per-user event memory so later sessions resume where earlier ones ended."""

    def __init__(self, events: Iterable[InteractionEvent]) -> None:
        self._events: dict[str, list[InteractionEvent]] = {}
        for e in events:
            self._events.setdefault(e.user_id, []).append(e)

    def add(self, event: InteractionEvent) -> None:
        self._events.setdefault(event.user_id, []).append(event)

    def of(self, user_id: str) -> list[InteractionEvent]:
        return self._events.get(user_id, [])


class ConceptMapStrategy(_Base):
    """Two-level walk: prerequisite-ordered concepts, indicator-scored questions.

    Assumes the pool passed to next_question is exactly the session's
    unasked questions. Mastery is judged on the user's full history, so a
    student who mastered a concept in an earlier test is walked past it in
    the next one.
    """

    name = "concept_map"
    layer = "top"

    def __init__(self, bank: dict[str, Question], cmap: ConceptMap,
                 events: Iterable[InteractionEvent] = (),
                 criterion: MasteryCriterion = MasteryCriterion(),
                 config: WalkConfig = WalkConfig()) -> None:
        self._bank = bank
        self._cmap = cmap
        self._criterion = criterion
        self._config = config
        events = list(events)
        self._estimator = _concept_map.population_p_correct(events)
        self._history = _UserHistory(events)

    def observe_event(self, session: SessionState,
                      event: InteractionEvent) -> None:
        self._history.add(event)

    def next_question(self, session: SessionState,
                      pool: list[Question]) -> Recommendation:
        self._require_pool(pool)
        try:
            rec = _concept_map.recommend(
                session, self._cmap, self._bank, self._criterion,
                self._estimator, self._config,
                mastery_events=self._history.of(session.user_id))
        except _concept_map.PoolExhausted:
            # Every mapped question has been asked; the pool must hold
            # questions outside the map, handled by review mode below.
            rec = None
        if rec is not None:
            return rec
        # Tour complete but the caller still wants a question: review mode,
        # greedy indicator score over the whole remaining pool.
        qid, scores = _concept_map.next_question_in_concept(
            frozenset(q.id for q in pool), session, self._bank,
            self._estimator, self._config)
        return Recommendation(question_id=qid, strategy=self.name, scores=scores)


class CollaborativeFilteringStrategy(_Base):
    """Hybrid factor/KNN rating prediction over the implicit ratings."""

    name = "collaborative_filtering"
    layer = "bottom"

    def __init__(self, bank: dict[str, Question],
                 events: Iterable[InteractionEvent] = (),
                 seed: int = 0, k: int = 8, epochs: int = 50,
                 alpha: float = 0.5, n_neighbors: int = 20) -> None:
        self._bank = bank
        self._alpha = alpha
        self._n_neighbors = n_neighbors
        self._matrix = build_rating_matrix(list(events), list(bank.values()))
        self._model: Optional[_collab.FactorModel] = None
        if len(self._matrix) > 0:
            self._model = _collab.train_factor_model(self._matrix, k=k,
                                                     epochs=epochs, seed=seed)

    def next_question(self, session: SessionState,
                      pool: list[Question]) -> Recommendation:
        self._require_pool(pool)
        if self._model is None:
            ordered = _collab.fallback_order(pool)
            return Recommendation(question_id=ordered[0].id, strategy=self.name,
                                  scores={q.id: float(q.teacher_level)
                                          for q in ordered})
        return _collab.recommend(session, self._matrix, self._model, pool,
                                 alpha=self._alpha,
                                 n_neighbors=self._n_neighbors)


class ClusteringStrategy(_Base):
    """Difficulty ladder: step clusters on outcomes, rank by keyword relevance."""

    name = "clustering"
    layer = "top"

    def __init__(self, bank: dict[str, Question],
                 events: Iterable[InteractionEvent] = (),
                 k: int = 3, seed: int = 0) -> None:
        self._bank = bank
        self._clustering = _clustering.cluster_bank(
            bank, list(events), k=min(k, len(bank)), seed=seed)
        self._graph = _clustering.KeywordGraph(bank.values())

    def next_question(self, session: SessionState,
                      pool: list[Question]) -> Recommendation:
        self._require_pool(pool)
        return _clustering.phase4_next(session, self._clustering, self._graph,
                                       self._bank, pool)


class SupervisedStrategy(_Base):
    """Forest-predicted outcome and time folded into a utility heuristic."""

    name = "supervised"
    layer = "bottom"

    def __init__(self, bank: dict[str, Question],
                 events: Iterable[InteractionEvent] = (),
                 profiles: Sequence[BackgroundProfile] = (),
                 seed: int = 0, n_trees: int = 30, max_depth: int = 8,
                 lam: float = 0.3, t_ref_ms: float = 120000.0) -> None:
        self._bank = bank
        self._lam = lam
        self._t_ref_ms = t_ref_ms
        events = list(events)
        self._models: Optional[_supervised.SupervisedModels] = None
        if profiles:
            try:
                self._models = _supervised.train_from_log(
                    events, bank, profiles, n_trees=n_trees,
                    max_depth=max_depth, seed=seed)
            except TooFewRows:
                logger.info("supervised strategy starting cold: log too small")
        self._served_correct: dict[str, set[str]] = {}
        for e in events:
            if e.outcome is Outcome.CORRECT:
                self._served_correct.setdefault(e.user_id, set()).add(e.question_id)

    def next_question(self, session: SessionState,
                      pool: list[Question]) -> Recommendation:
        self._require_pool(pool)
        served = frozenset(self._served_correct.get(session.user_id, set()))
        return _supervised.recommend(self._models, session, pool,
                                     lam=self._lam, t_ref_ms=self._t_ref_ms,
                                     served_correct=served)


class RLStrategy(_Base):
    """Planner-constrained Q-learning that keeps learning as sessions run."""

    name = "reinforcement_learning"
    layer = "top"

    def __init__(self, bank: dict[str, Question], cmap: ConceptMap,
                 events: Iterable[InteractionEvent] = (), seed: int = 0,
                 spec: Optional[_rl.RewardSpec] = None,
                 criterion: MasteryCriterion = MasteryCriterion(),
                 required: Optional[set[str]] = None,
                 qtable: Optional[_rl.QTable] = None) -> None:
        self._bank = bank
        self._cmap = cmap
        self._criterion = criterion
        self._spec = spec or _rl.RewardSpec()
        self._population = list(events)
        self._required = set(cmap.nodes) if required is None else set(required)
        costs = _rl.concept_failure_costs(cmap, self._population)
        self.planner_path = _rl.plan_path_dijkstra(cmap, self._required, costs)
        self.qtable = qtable or _rl.QTable()
        self._rng = np.random.default_rng(seed)
        self._epsilon = self._spec.epsilon
        self._episodes: dict[str, list[tuple[_rl.LearningState, str]]] = {}
        self._pending: dict[str, tuple[_rl.LearningState, str]] = {}
        self._history = _UserHistory(self._population)

    def begin_session(self, session: SessionState) -> None:
        self._episodes[session.session_id] = []
        self._pending.pop(session.session_id, None)

    def next_question(self, session: SessionState,
                      pool: list[Question]) -> Recommendation:
        self._require_pool(pool)
        mastery = self._history.of(session.user_id)
        rec = _rl.recommend(session, self.qtable, self.planner_path, self._cmap,
                            pool, self._spec, self._rng,
                            criterion=self._criterion, epsilon=self._epsilon,
                            mastery_events=mastery)
        pool_ids = {q.id for q in pool}
        concept, _ = _rl.current_concept_and_actions(
            session, self.planner_path, self._cmap, self._criterion, pool_ids,
            mastery)
        state = _rl.state_of(session, self._cmap, self._criterion, concept,
                             mastery)
        step = (state, rec.question_id)
        self._pending[session.session_id] = step
        self._episodes.setdefault(session.session_id, []).append(step)
        return rec

    def observe_event(self, session: SessionState,
                      event: InteractionEvent) -> None:
        """Dense temporal-difference update for the just-answered question.

        Expects the event to already be part of the session state, so the
        successor state can be read straight off it.
        """
        self._history.add(event)
        pending = self._pending.pop(session.session_id, None)
        if pending is None or pending[1] != event.question_id:
            return
        state, action = pending
        mastery = self._history.of(session.user_id)
        remaining = {qid for qid in self._cmap.question_ids
                     if qid not in session.asked}
        concept, actions_next = _rl.current_concept_and_actions(
            session, self.planner_path, self._cmap, self._criterion, remaining,
            mastery)
        s_next = _rl.state_of(session, self._cmap, self._criterion, concept,
                              mastery)
        question = self._bank.get(event.question_id)
        if question is None:
            return
        r = self._spec.dense(question, event.outcome, self._population)
        _rl.q_update(self.qtable, state, action, r, s_next,
                     actions_next if remaining else [], self._spec)

    def end_session(self, session: SessionState) -> None:
        """Back-propagate the completion reward and decay exploration."""
        steps = self._episodes.pop(session.session_id, [])
        self._pending.pop(session.session_id, None)
        if not steps:
            return
        visited: list[str] = []
        for qid in session.asked:
            for concept in self._cmap.concepts_of(qid):
                if concept not in visited:
                    visited.append(concept)
        reward = self._spec.sparse(visited, self._required,
                                   r_complete=self._spec.r_complete)
        _rl.apply_sparse(self.qtable, steps, reward, self._spec)
        self._epsilon *= self._spec.epsilon_decay

    def replay_log(self, events: Iterable[InteractionEvent]) -> None:
        """Rebuild Q-values by replaying logged sessions as forced episodes.

        Each logged answer becomes a (state, action) step exactly as if the
        strategy had picked it live, so a fresh instance replayed over the
        full log reproduces population-level learning.
        """
        self._history = _UserHistory(())
        by_session: dict[str, list[InteractionEvent]] = {}
        order: list[str] = []
        for e in events:
            if e.session_id not in by_session:
                order.append(e.session_id)
            by_session.setdefault(e.session_id, []).append(e)
        for sid in order:
            batch = by_session[sid]
            session = SessionState(session_id=sid, user_id=batch[0].user_id,
                                   topic="replay", strategy_name=self.name,
                                   length_target=len(batch))
            self.begin_session(session)
            for e in batch:
                if e.question_id in session.asked:
                    continue
                mastery = self._history.of(session.user_id)
                pool_ids = {qid for qid in self._cmap.question_ids
                            if qid not in session.asked}
                concept, _ = _rl.current_concept_and_actions(
                    session, self.planner_path, self._cmap, self._criterion,
                    pool_ids, mastery)
                state = _rl.state_of(session, self._cmap, self._criterion,
                                     concept, mastery)
                step = (state, e.question_id)
                session.mark_asked(e.question_id)
                try:
                    session.add_event(e)
                except ValueError:
                    break
                self._pending[sid] = step
                self._episodes.setdefault(sid, []).append(step)
                self.observe_event(session, e)
            self.end_session(session)


def random_baseline(pool: list[Question], rng: np.random.Generator) -> Recommendation:
    """Uniform seeded choice over the pool, the experimental control."""
    if not pool:
        raise EmptyPool
    ordered = sorted(pool, key=lambda q: q.id)
    chosen = ordered[int(rng.integers(len(ordered)))]
    share = 1.0 / len(ordered)
    return Recommendation(question_id=chosen.id, strategy="random",
                          scores={q.id: share for q in ordered})


class RandomStrategy(_Base):
    """Strategy wrapper around the uniform random baseline."""

    name = "random"
    layer = "control"

    def __init__(self, seed: int = 0) -> None:
        self._rng = np.random.default_rng(seed)

    def next_question(self, session: SessionState,
                      pool: list[Question]) -> Recommendation:
        return random_baseline(pool, self._rng)


@dataclass(frozen=True)
class StrategyInfo:
    name: str
    layer: str
    trainable: bool
    factory: Callable[..., Strategy]


def _build_concept_map(**kw) -> Strategy:
    return ConceptMapStrategy(kw["bank"], kw["cmap"], kw.get("events", ()))


def _build_cf(**kw) -> Strategy:
    return CollaborativeFilteringStrategy(kw["bank"], kw.get("events", ()),
                                          seed=kw.get("seed", 0))


def _build_clustering(**kw) -> Strategy:
    return ClusteringStrategy(kw["bank"], kw.get("events", ()),
                              seed=kw.get("seed", 0))


def _build_supervised(**kw) -> Strategy:
    return SupervisedStrategy(kw["bank"], kw.get("events", ()),
                              kw.get("profiles", ()), seed=kw.get("seed", 0))


def _build_rl(**kw) -> Strategy:
    strategy = RLStrategy(kw["bank"], kw["cmap"], kw.get("events", ()),
                          seed=kw.get("seed", 0), qtable=kw.get("qtable"))
    if kw.get("replay", True):
        strategy.replay_log(kw.get("events", ()))
    return strategy


def _build_random(**kw) -> Strategy:
    return RandomStrategy(seed=kw.get("seed", 0))


REGISTRY: dict[str, StrategyInfo] = {
    "concept_map": StrategyInfo("concept_map", "top", False, _build_concept_map),
    "collaborative_filtering": StrategyInfo("collaborative_filtering", "bottom",
                                            True, _build_cf),
    "clustering": StrategyInfo("clustering", "top", False, _build_clustering),
    "supervised": StrategyInfo("supervised", "bottom", True, _build_supervised),
    "reinforcement_learning": StrategyInfo("reinforcement_learning", "top",
                                           True, _build_rl),
    "random": StrategyInfo("random", "control", False, _build_random),
}


def strategy_names() -> list[str]:
    return list(REGISTRY)


def build_strategy(name: str, *, bank: dict[str, Question],
                   cmap: Optional[ConceptMap] = None,
                   events: Iterable[InteractionEvent] = (),
                   profiles: Sequence[BackgroundProfile] = (),
                   seed: int = 0, **extra) -> Strategy:
    """Instantiate a registered strategy trained from the given log."""
    if name not in REGISTRY:
        raise UnknownStrategy(name)
    if name in ("concept_map", "reinforcement_learning") and cmap is None:
        raise ValueError(f"strategy {name} needs a concept map")
    return REGISTRY[name].factory(bank=bank, cmap=cmap, events=events,
                                  profiles=profiles, seed=seed, **extra)
