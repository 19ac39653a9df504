"""Adaptive learning-path recommendation over multiple-choice assessments.

Five interchangeable next-question strategies (concept-map walk,
collaborative filtering, difficulty clustering, supervised forests, tabular
Q-learning) behind one interface, plus a synthetic-student benchmark
harness and an HTTP session service.
"""
from .core import (BackgroundProfile, Difficulty, DomainError,
                   InteractionEvent, Outcome, Question, Rating, RatingMatrix,
                   Recommendation, SessionState, SkippedNotRatable,
                   build_rating_matrix, derive_rating, impute_background,
                   normalize_grade, question_success_rate)
from .concept_map import (ConceptMap, MasteryCriterion, WalkConfig,
                          concept_mastered, load_concept_map, next_concept)
from .io import (append_event, load_background, load_event_log,
                 load_question_bank)
from .simulate import (ExperimentConfig, ExperimentResult, SimulatedStudent,
                       run_experiment, simulate_answer)
from .strategies import (REGISTRY, Strategy, StrategyInfo, build_strategy,
                         random_baseline, strategy_names)

__version__ = "1.0.0"

__all__ = [
    "BackgroundProfile", "Difficulty", "DomainError", "InteractionEvent",
    "Outcome", "Question", "Rating", "RatingMatrix", "Recommendation",
    "SessionState", "SkippedNotRatable", "build_rating_matrix",
    "derive_rating", "impute_background", "normalize_grade",
    "question_success_rate", "ConceptMap", "MasteryCriterion", "WalkConfig",
    "concept_mastered", "load_concept_map", "next_concept", "append_event",
    "load_background", "load_event_log", "load_question_bank",
    "ExperimentConfig", "ExperimentResult", "SimulatedStudent",
    "run_experiment", "simulate_answer", "REGISTRY", "Strategy",
    "StrategyInfo", "build_strategy", "random_baseline", "strategy_names",
    "__version__",
]
