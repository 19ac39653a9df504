"""Concept graph and the two-level walk recommender.

The top level tours concepts in prerequisite order (a modified depth-first
walk over the weighted digraph); the bottom level greedily picks the best
question inside the current concept by its learning-indicator profile.
"""
from __future__ import annotations

import csv
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from .core import Outcome, Question, Recommendation, SessionState, question_success_rate
from .io import ParseError

logger = logging.getLogger(__name__)


class DanglingArcEndpoint(ValueError):
    pass


class EmptyConceptLabel(ValueError):
    pass


class ConceptExhausted(LookupError):
    """No unasked question remains inside the concept."""


class PoolExhausted(LookupError):
    """Every concept of the map has been exhausted this session."""


@dataclass(frozen=True)
class MasteryCriterion:
    """Thresholds deciding when a concept counts as learned."""

    min_correct_fraction: float = 0.7
    min_coverage_fraction: float = 0.5

    def __post_init__(self) -> None:
        for v in (self.min_correct_fraction, self.min_coverage_fraction):
            if not 0 < v <= 1:
                raise ValueError("mastery fractions must lie in (0, 1]")


@dataclass(frozen=True)
class IndicatorProfile:
    """Learning indicators for one candidate question, each in [0, 1]."""

    correct_fraction: float
    coverage: float
    p_correct: float

    def __post_init__(self) -> None:
        for v in (self.correct_fraction, self.coverage, self.p_correct):
            if not 0 <= v <= 1:
                raise ValueError("indicator components must lie in [0, 1]")


@dataclass(frozen=True)
class WalkConfig:
    """Weights of the scalarized indicator profile (configurable on purpose)."""

    w_p_correct: float = 0.7
    w_novelty: float = 0.3


class ConceptMap:
    """Weighted digraph of concepts, each labeled with a non-empty question set.

    An arc (u, v, w) says u should be mastered before v, with dependence
    strength w. Cycles are allowed; concepts sharing a strongly connected
    component are treated as mutually prerequisite-free.
    """

    def __init__(self, nodes: dict[str, frozenset[str]],
                 arcs: Sequence[tuple[str, str, float]]):
        for cid, qids in nodes.items():
            if not qids:
                raise EmptyConceptLabel(cid)
        for u, v, w in arcs:
            if u not in nodes:
                raise DanglingArcEndpoint(u)
            if v not in nodes:
                raise DanglingArcEndpoint(v)
            if u == v:
                raise ValueError(f"self-loop on concept {u}")
            if w <= 0:
                raise ValueError(f"arc {u}->{v} weight must be positive")
        self.nodes = dict(nodes)
        self.arcs = [(u, v, float(w)) for u, v, w in arcs]
        self._in_arcs: dict[str, list[tuple[str, float]]] = {c: [] for c in nodes}
        self._out_arcs: dict[str, list[tuple[str, float]]] = {c: [] for c in nodes}
        for u, v, w in self.arcs:
            self._in_arcs[v].append((u, w))
            self._out_arcs[u].append((v, w))
        self.scc_index = self._compute_sccs()
        self.cycle_warnings = self._collect_cycles()
        if self.cycle_warnings:
            logger.warning("concept map contains cycles: %s", self.cycle_warnings)

    @property
    def question_ids(self) -> frozenset[str]:
        out: set[str] = set()
        for qids in self.nodes.values():
            out |= qids
        return frozenset(out)

    def concepts_of(self, question_id: str) -> list[str]:
        return sorted(c for c, qids in self.nodes.items() if question_id in qids)

    def prerequisites(self, concept: str) -> list[tuple[str, float]]:
        """In-neighbors outside the concept's own SCC."""
        own = self.scc_index[concept]
        return [(u, w) for u, w in self._in_arcs[concept] if self.scc_index[u] != own]

    def _compute_sccs(self) -> dict[str, int]:
        # Iterative Tarjan; maps are small but recursion limits are cheap to avoid.
        index: dict[str, int] = {}
        lowlink: dict[str, int] = {}
        on_stack: set[str] = set()
        stack: list[str] = []
        scc_of: dict[str, int] = {}
        counter = 0
        n_sccs = 0
        for root in sorted(self.nodes):
            if root in index:
                continue
            work = [(root, iter(sorted(v for v, _ in self._out_arcs[root])))]
            index[root] = lowlink[root] = counter
            counter += 1
            stack.append(root)
            on_stack.add(root)
            while work:
                node, successors = work[-1]
                advanced = False
                for succ in successors:
                    if succ not in index:
                        index[succ] = lowlink[succ] = counter
                        counter += 1
                        stack.append(succ)
                        on_stack.add(succ)
                        work.append((succ, iter(sorted(v for v, _ in self._out_arcs[succ]))))
                        advanced = True
                        break
                    if succ in on_stack:
                        lowlink[node] = min(lowlink[node], index[succ])
                if advanced:
                    continue
                work.pop()
                if work:
                    parent = work[-1][0]
                    lowlink[parent] = min(lowlink[parent], lowlink[node])
                if lowlink[node] == index[node]:
                    while True:
                        member = stack.pop()
                        on_stack.discard(member)
                        scc_of[member] = n_sccs
                        if member == node:
                            break
                    n_sccs += 1
        return scc_of

    def _collect_cycles(self) -> list[tuple[str, ...]]:
        groups: dict[int, list[str]] = {}
        for c, s in self.scc_index.items():
            groups.setdefault(s, []).append(c)
        return [tuple(sorted(g)) for g in groups.values() if len(g) > 1]


def load_concept_map(nodes_path: str | Path, arcs_path: str | Path) -> ConceptMap:
    """Read the nodes/arcs CSV pair into a validated map."""
    nodes_path, arcs_path = Path(nodes_path), Path(arcs_path)
    nodes: dict[str, frozenset[str]] = {}
    with nodes_path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or "concept_id" not in reader.fieldnames \
                or "question_ids" not in reader.fieldnames:
            raise ParseError(nodes_path, 1, "expected columns concept_id,question_ids")
        for row in reader:
            cid = (row["concept_id"] or "").strip()
            if not cid:
                raise ParseError(nodes_path, reader.line_num, "empty concept_id")
            qids = frozenset(q.strip() for q in (row["question_ids"] or "").split(";")
                             if q.strip())
            if not qids:
                raise EmptyConceptLabel(cid)
            nodes[cid] = qids
    arcs: list[tuple[str, str, float]] = []
    with arcs_path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"from", "to", "weight"} <= set(reader.fieldnames):
            raise ParseError(arcs_path, 1, "expected columns from,to,weight")
        for row in reader:
            try:
                weight = float(row["weight"])
            except (TypeError, ValueError):
                raise ParseError(arcs_path, reader.line_num, "weight not a number") from None
            arcs.append(((row["from"] or "").strip(), (row["to"] or "").strip(), weight))
    return ConceptMap(nodes, arcs)


def latest_outcomes(events: Iterable) -> dict[str, Outcome]:
    """Latest non-skip outcome per question, in log order."""
    out: dict[str, Outcome] = {}
    for e in events:
        if e.outcome is not Outcome.SKIPPED:
            out[e.question_id] = e.outcome
    return out


def concept_mastered(concept_questions: frozenset[str],
                     events: Iterable,
                     criterion: MasteryCriterion) -> bool:
    """Apply the explicit mastery rule: enough coverage, enough of it correct."""
    latest = latest_outcomes(events)
    answered = [q for q in concept_questions if q in latest]
    if not answered:
        return False
    coverage = len(answered) / len(concept_questions)
    correct = sum(1 for q in answered if latest[q] is Outcome.CORRECT)
    return (coverage >= criterion.min_coverage_fraction
            and correct / len(answered) >= criterion.min_correct_fraction)


def next_concept(cmap: ConceptMap,
                 mastered: frozenset[str] | set[str],
                 retired: frozenset[str] | set[str] = frozenset()) -> str | None:
    """Pick the next concept to work on, or None when the tour is complete.

    Eligible concepts have every prerequisite (outside their own SCC) either
    mastered or retired; among those, the one with the largest total incoming
    weight from mastered concepts wins, ties to the smallest id. Retired
    concepts (exhausted before mastery) are skipped until nothing else is left.
    """
    unknown = (set(mastered) | set(retired)) - set(cmap.nodes)
    if unknown:
        raise KeyError(f"concepts not in map: {sorted(unknown)}")
    done = set(mastered) | set(retired)
    candidates = [c for c in cmap.nodes if c not in done]
    if not candidates:
        return None
    eligible = [c for c in candidates
                if all(u in done for u, _ in cmap.prerequisites(c))]
    if not eligible:
        # Unreachable with SCC-dissolved prerequisites; keep the documented
        # escape hatch of ignoring the blocking arcs.
        logger.warning("concept walk stuck; ignoring blocking prerequisites")
        eligible = candidates

    def incoming_mastered_weight(c: str) -> float:
        return sum(w for u, w in cmap._in_arcs[c] if u in mastered)

    return min(eligible, key=lambda c: (-incoming_mastered_weight(c), c))


def indicator_profile(question: Question,
                      session: SessionState,
                      bank: dict[str, Question],
                      p_correct_estimator: Callable[[Question], float]) -> IndicatorProfile:
    """Assemble the per-question indicator vector used by the bottom-level walk."""
    latest = latest_outcomes(session.events)
    answered = len(latest)
    correct = sum(1 for o in latest.values() if o is Outcome.CORRECT)
    covered = _covered_keywords(session, bank)
    return IndicatorProfile(
        correct_fraction=correct / answered if answered else 0.0,
        coverage=len(question.keywords & covered) / len(question.keywords),
        p_correct=min(max(p_correct_estimator(question), 0.0), 1.0),
    )


def _covered_keywords(session: SessionState, bank: dict[str, Question]) -> set[str]:
    covered: set[str] = set()
    for qid in session.asked:
        q = bank.get(qid)
        if q is not None:
            covered |= q.keywords
    return covered


def next_question_in_concept(concept_questions: frozenset[str],
                             session: SessionState,
                             bank: dict[str, Question],
                             p_correct_estimator: Callable[[Question], float],
                             config: WalkConfig = WalkConfig()) -> tuple[str, dict[str, float]]:
    """Greedy bottom-level choice inside one concept.

    Scores every unasked question of the concept with
    ``w_p * p_correct + w_n * (1 - covered_keyword_fraction)`` and returns the
    argmax (ties to the smallest id) plus the full score table.
    """
    unasked = sorted(q for q in concept_questions
                     if q not in session.asked and q in bank)
    if not unasked:
        raise ConceptExhausted
    scores: dict[str, float] = {}
    for qid in unasked:
        prof = indicator_profile(bank[qid], session, bank, p_correct_estimator)
        scores[qid] = (config.w_p_correct * prof.p_correct
                       + config.w_novelty * (1.0 - prof.coverage))
    best = min(unasked, key=lambda qid: (-scores[qid], qid))
    return best, scores


def recommend(session: SessionState,
              cmap: ConceptMap,
              bank: dict[str, Question],
              criterion: MasteryCriterion = MasteryCriterion(),
              p_correct_estimator: Callable[[Question], float] | None = None,
              config: WalkConfig = WalkConfig(),
              mastery_events: Sequence | None = None) -> Recommendation | None:
    """One step of the two-level walk; None once every concept is mastered.

    The top level re-derives its position from history alone, which makes
    identical histories give identical recommendations and keeps the walk
    naturally sticky: an unmastered, unexhausted concept stays current.
    Mastery is judged on mastery_events when given (typically the student's
    whole history so a new test resumes where the last one ended) and on the
    session's own events otherwise.
    """
    if session.finished:
        raise ValueError("session already finished")
    if p_correct_estimator is None:
        p_correct_estimator = lambda q: 0.5
    if mastery_events is None:
        mastery_events = session.events

    mastered = {c for c, qids in cmap.nodes.items()
                if concept_mastered(qids, mastery_events, criterion)}
    asked = set(session.asked)
    exhausted = {c for c, qids in cmap.nodes.items() if qids <= asked}
    if mastered >= set(cmap.nodes):
        return None
    if exhausted >= set(cmap.nodes):
        raise PoolExhausted
    retired = exhausted - mastered

    concept = next_concept(cmap, frozenset(mastered), frozenset(retired))
    if concept is None:
        # Everything mastered or retired but questions may remain unasked.
        return None
    qid, scores = next_question_in_concept(
        cmap.nodes[concept], session, bank, p_correct_estimator, config)
    return Recommendation(question_id=qid, strategy="concept_map", scores=scores)


def population_p_correct(events: Sequence, prior: float = 0.5) -> Callable[[Question], float]:
    """Default p-correct estimator: population success rate per question."""
    def estimate(q: Question) -> float:
        return question_success_rate(q.id, events, prior=prior)
    return estimate
