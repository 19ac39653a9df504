"""Shared builders for bank, map, and event fixtures."""
from __future__ import annotations

import itertools
from pathlib import Path

import pytest

from learnpath.concept_map import ConceptMap
from learnpath.core import Difficulty, InteractionEvent, Outcome, Question


_COUNTER = itertools.count()


def make_question(qid: str, keywords=("k1",), level: int = 2,
                  difficulty: Difficulty = Difficulty.BASIC,
                  correct_index: int = 1, topic: str = "algebra",
                  n_options: int = 4) -> Question:
    return Question(id=qid, text=f"What about {qid}?",
                    options=tuple(f"opt{i}" for i in range(n_options)),
                    correct_index=correct_index, difficulty=difficulty,
                    teacher_level=level, keywords=frozenset(keywords),
                    topic=topic)


def make_event(question_id: str, outcome: Outcome, user_id: str = "u1",
               session_id: str = "s1", elapsed_ms: int = 30000,
               click_count: int = 2, timestamp: int | None = None
               ) -> InteractionEvent:
    if timestamp is None:
        timestamp = next(_COUNTER)
    return InteractionEvent(user_id=user_id, session_id=session_id,
                            question_id=question_id, outcome=outcome,
                            elapsed_ms=elapsed_ms, click_count=click_count,
                            timestamp=timestamp)


def chain_bank() -> dict[str, Question]:
    """Twelve questions over three keyword groups with bridging overlap."""
    layout = [
        ("q01", ["k1"], 1), ("q02", ["k1"], 1),
        ("q03", ["k1"], 1), ("q04", ["k1"], 1),
        ("q05", ["k1", "k2"], 2), ("q06", ["k2"], 2),
        ("q07", ["k2"], 2), ("q08", ["k2"], 2),
        ("q09", ["k2", "k3"], 3), ("q10", ["k3"], 3),
        ("q11", ["k3"], 3), ("q12", ["k3"], 3),
    ]
    return {qid: make_question(qid, kws, level)
            for qid, kws, level in layout}


def chain_map() -> ConceptMap:
    """C1 -> C2 -> C3 over the chain bank."""
    return ConceptMap(
        nodes={"C1": frozenset(["q01", "q02", "q03", "q04"]),
               "C2": frozenset(["q05", "q06", "q07", "q08"]),
               "C3": frozenset(["q09", "q10", "q11", "q12"])},
        arcs=[("C1", "C2", 1.0), ("C2", "C3", 1.0)])


def write_corpus(dir_path) -> tuple[Path, Path, Path]:
    """Write the chain bank and map in the on-disk corpus layout."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    bank = chain_bank()
    bank_path = dir_path / "bank.csv"
    bank_path.write_text(
        "id,text,opt1,opt2,opt3,opt4,correct_index,difficulty,"
        "teacher_level,keywords,topic\n"
        + "".join(f"{q.id},{q.text},{','.join(q.options)},{q.correct_index},"
                  f"{q.difficulty.value},{q.teacher_level},"
                  f"{';'.join(sorted(q.keywords))},{q.topic}\n"
                  for q in bank.values()),
        encoding="utf-8")
    nodes_path = dir_path / "nodes.csv"
    nodes_path.write_text("concept_id,question_ids\n"
                          "C1,q01;q02;q03;q04\n"
                          "C2,q05;q06;q07;q08\n"
                          "C3,q09;q10;q11;q12\n", encoding="utf-8")
    arcs_path = dir_path / "arcs.csv"
    arcs_path.write_text("from,to,weight\nC1,C2,1.0\nC2,C3,1.0\n",
                         encoding="utf-8")
    return bank_path, nodes_path, arcs_path


@pytest.fixture
def bank() -> dict[str, Question]:
    return chain_bank()


@pytest.fixture
def cmap() -> ConceptMap:
    return chain_map()
