"""Synthetic students, the random control, and the experiment runner."""
from __future__ import annotations

import math

import numpy as np
import pytest

from learnpath.core import Difficulty, Outcome
from learnpath.simulate import (
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    RESULT_COLUMNS,
    ResultRow,
    SimulatedStudent,
    random_baseline,
    run_experiment,
    simulate_answer,
)
from learnpath.simulate import Transcript
from learnpath.strategies import EmptyPool
from tests.conftest import chain_bank, chain_map, make_question, write_corpus


def benchmark_config(seeds, strategies=("concept_map", "random")) -> ExperimentConfig:
    """Chain benchmark where prerequisite order genuinely matters.

    Students start strong on k1, weak on k2, weaker on k3, and improve with
    practice, so asking in prerequisite order reaches mastery in fewer
    questions than uniform random asking.
    """
    return ExperimentConfig(
        strategies=list(strategies), seeds=list(seeds), population=1,
        session_length=5, max_questions=36, discrimination=1.5,
        dont_know_rate=0.2,
        base_skills={"k1": 1.5, "k2": -1.0, "k3": -2.0},
        default_skill=0.0, skill_noise=0.3,
        gain_attempt=0.2, gain_correct=0.4,
        warmup_students=3, warmup_sessions=2, warmup_seed=9001)


class TestResponseModel:
    def test_midpoint_when_skill_equals_offset(self):
        basic = make_question("q1", difficulty=Difficulty.BASIC)
        difficult = make_question("q2", difficulty=Difficulty.DIFFICULT)
        student = SimulatedStudent("u1", skill={"k1": 0.0})
        assert student.p_correct(basic) == pytest.approx(0.5)
        student.skill["k1"] = 1.0
        assert student.p_correct(difficult) == pytest.approx(0.5)

    def test_logistic_formula(self):
        q = make_question("q1", difficulty=Difficulty.BASIC)
        student = SimulatedStudent("u1", skill={"k1": 0.5}, discrimination=2.0)
        assert student.p_correct(q) == pytest.approx(1 / (1 + math.exp(-1.0)))

    def test_ability_is_mean_over_keywords(self):
        q = make_question("q1", keywords=("k1", "k2"))
        student = SimulatedStudent("u1", skill={"k1": 1.0, "k2": 0.0})
        assert student.p_correct(q) == pytest.approx(1 / (1 + math.exp(-0.5)))

    def test_unknown_keyword_defaults_to_zero_skill(self):
        q = make_question("q1", keywords=("mystery",))
        student = SimulatedStudent("u1", skill={})
        assert student.p_correct(q) == pytest.approx(0.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            SimulatedStudent("u1", discrimination=0.0)
        with pytest.raises(ValueError):
            SimulatedStudent("u1", dont_know_rate=1.5)


class TestSimulateAnswer:
    def test_saturated_skill_answers_correct(self):
        q = make_question("q1")
        student = SimulatedStudent("u1", skill={"k1": 10.0})
        assert student.p_correct(q) > 0.999
        event = simulate_answer(student, q, np.random.default_rng(0))
        assert event.outcome is Outcome.CORRECT

    def test_hopeless_skill_never_answers_correct(self):
        q = make_question("q1")
        rng = np.random.default_rng(0)
        student = SimulatedStudent("u1", skill={"k1": -10.0})
        outcomes = {simulate_answer(student, q, rng).outcome
                    for _ in range(50)}
        assert outcomes <= {Outcome.WRONG, Outcome.DONT_KNOW}
        assert Outcome.CORRECT not in outcomes

    def test_dont_know_rate_extremes(self):
        q = make_question("q1")
        rng = np.random.default_rng(1)
        always = SimulatedStudent("u1", skill={"k1": -10.0}, dont_know_rate=1.0)
        never = SimulatedStudent("u2", skill={"k1": -10.0}, dont_know_rate=0.0)
        assert {simulate_answer(always, q, rng).outcome
                for _ in range(20)} == {Outcome.DONT_KNOW}
        assert {simulate_answer(never, q, rng).outcome
                for _ in range(20)} == {Outcome.WRONG}

    def test_elapsed_time_floor(self):
        q = make_question("q1")
        student = SimulatedStudent("u1", base_ms=100.0, noise_ms=0.0)
        event = simulate_answer(student, q, np.random.default_rng(0))
        assert event.elapsed_ms == 500

    def test_difficulty_adds_time(self):
        q = make_question("q1", difficulty=Difficulty.DIFFICULT)
        student = SimulatedStudent("u1", base_ms=20000.0,
                                   difficult_extra_ms=15000.0, noise_ms=0.0)
        event = simulate_answer(student, q, np.random.default_rng(0))
        assert event.elapsed_ms == 35000

    def test_click_counts_stay_plausible(self):
        q = make_question("q1")
        student = SimulatedStudent("u1")
        rng = np.random.default_rng(2)
        clicks = {simulate_answer(student, q, rng).click_count
                  for _ in range(200)}
        assert clicks == {1, 2, 3, 4}

    def test_identical_seed_replays_exactly(self):
        q = make_question("q1")

        def run(seed):
            student = SimulatedStudent("u1", skill={"k1": 0.3})
            rng = np.random.default_rng(seed)
            return [simulate_answer(student, q, rng, timestamp=t)
                    for t in range(10)]

        assert run(5) == run(5)

    def test_event_carries_identity_fields(self):
        q = make_question("q7")
        student = SimulatedStudent("alice")
        event = simulate_answer(student, q, np.random.default_rng(0),
                                session_id="s9", timestamp=42)
        assert event.user_id == "alice"
        assert event.session_id == "s9"
        assert event.question_id == "q7"
        assert event.timestamp == 42


class TestPractice:
    def test_correct_answer_gains_more(self):
        q = make_question("q1", keywords=("k1", "k2"))
        student = SimulatedStudent("u1", skill={"k1": 0.0},
                                   gain_attempt=0.2, gain_correct=0.4)
        student.practice(q, correct=True)
        assert student.skill["k1"] == pytest.approx(0.6)
        assert student.skill["k2"] == pytest.approx(0.6)
        student.practice(q, correct=False)
        assert student.skill["k1"] == pytest.approx(0.8)

    def test_zero_gains_leave_skill_alone(self):
        q = make_question("q1")
        student = SimulatedStudent("u1", skill={})
        student.practice(q, correct=True)
        assert student.skill == {}

    def test_simulate_answer_applies_practice(self):
        q = make_question("q1")
        student = SimulatedStudent("u1", skill={"k1": 10.0},
                                   gain_attempt=0.1, gain_correct=0.2)
        simulate_answer(student, q, np.random.default_rng(0))
        assert student.skill["k1"] == pytest.approx(10.3)


class TestRandomBaseline:
    def test_pool_of_one(self):
        q = make_question("q1")
        rec = random_baseline([q], np.random.default_rng(0))
        assert rec.question_id == "q1"
        assert rec.strategy == "random"
        assert rec.scores == {"q1": 1.0}

    def test_seeded_replay(self):
        pool = [make_question(f"q{i}") for i in range(6)]

        def picks(seed):
            rng = np.random.default_rng(seed)
            return [random_baseline(pool, rng).question_id for _ in range(20)]

        assert picks(3) == picks(3)

    def test_uniform_over_four_questions(self):
        pool = [make_question(f"q{i}") for i in range(4)]
        rng = np.random.default_rng(0)
        counts = {q.id: 0 for q in pool}
        for _ in range(10000):
            counts[random_baseline(pool, rng).question_id] += 1
        for qid, count in counts.items():
            assert 0.23 <= count / 10000 <= 0.27, (qid, count)

    def test_scores_are_the_uniform_share(self):
        pool = [make_question(f"q{i}") for i in range(4)]
        rec = random_baseline(pool, np.random.default_rng(0))
        assert rec.scores == {f"q{i}": 0.25 for i in range(4)}

    def test_empty_pool(self):
        with pytest.raises(EmptyPool):
            random_baseline([], np.random.default_rng(0))


class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig.from_dict(
            {"strategies": ["random"], "seeds": [1]})
        assert config.session_length == 5
        assert config.max_questions == 40
        assert config.population == 1
        assert config.warmup_seed == 9001

    def test_unknown_fields_are_named(self):
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_dict({"strategies": ["random"], "seeds": [1],
                                        "bogus": 1, "extra": 2})
        message = str(exc.value)
        assert "unknown field: bogus" in message
        assert "unknown field: extra" in message

    def test_all_validation_problems_reported_together(self):
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_dict({"strategies": [], "seeds": [],
                                        "population": -1})
        message = str(exc.value)
        assert "strategies:" in message
        assert "seeds:" in message
        assert "population:" in message

    def test_unknown_strategy_name(self):
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_dict({"strategies": ["nope"], "seeds": [1]})
        assert "unknown strategy 'nope'" in str(exc.value)

    def test_missing_required_field(self):
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_dict({"seeds": [1]})
        assert "strategies" in str(exc.value)

    def test_from_json_round_trip(self, tmp_path):
        p = tmp_path / "config.json"
        p.write_text('{"strategies": ["random"], "seeds": [5, 6], '
                     '"session_length": 3}', encoding="utf-8")
        config = ExperimentConfig.from_json(p)
        assert config.seeds == [5, 6]
        assert config.session_length == 3

    def test_from_json_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_json(p)
        assert "not valid JSON" in str(exc.value)

    def test_from_json_rejects_non_object_root(self, tmp_path):
        p = tmp_path / "list.json"
        p.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(p)

    def test_to_dict_preserves_fields(self):
        raw = {"strategies": ["random"], "seeds": [1], "max_questions": 7}
        echoed = ExperimentConfig.from_dict(raw).to_dict()
        for key, value in raw.items():
            assert echoed[key] == value


class TestResultSerialization:
    def test_csv_values_use_repr_floats(self):
        row = ResultRow("random", 0, 1, 12, 0.5, 1 / 3)
        assert row.csv_values() == ["random", "0", "1", "12", "0.5",
                                    "0.3333333333333333"]

    def test_header_line(self):
        result = ExperimentResult(config={}, rows=[], transcripts=[])
        assert result.to_csv_text() == ",".join(RESULT_COLUMNS) + "\n"

    def test_write_csv_matches_text(self, tmp_path):
        rows = [ResultRow("random", 0, 1, 12, 0.75, 1.0)]
        result = ExperimentResult(config={}, rows=rows, transcripts=[])
        path = tmp_path / "out.csv"
        result.write_csv(path)
        assert path.read_text(encoding="utf-8") == result.to_csv_text()


class TestResultMetrics:
    def test_mean_questions_to_mastery(self):
        rows = [ResultRow("x", 0, 0, 10, 0.5, 1.0),
                ResultRow("x", 0, 1, 20, 0.5, 1.0),
                ResultRow("y", 0, 0, 7, 0.5, 1.0)]
        result = ExperimentResult(config={}, rows=rows, transcripts=[])
        assert result.mean_questions_to_mastery("x") == pytest.approx(15.0)
        assert math.isnan(result.mean_questions_to_mastery("zzz"))

    def test_correct_rate_trajectory_averages_by_position(self):
        t1 = Transcript("x", 0, 0, sessions=[[("q1", Outcome.CORRECT.value),
                                              ("q2", Outcome.WRONG.value)]])
        t2 = Transcript("x", 0, 1, sessions=[[("q1", Outcome.WRONG.value)]])
        result = ExperimentResult(config={}, rows=[], transcripts=[t1, t2])
        assert result.correct_rate_trajectory("x") == pytest.approx([0.5, 0.5])

    def test_trajectory_ignores_skips_in_the_rate(self):
        t = Transcript("x", 0, 0, sessions=[[("q1", Outcome.SKIPPED.value),
                                             ("q2", Outcome.CORRECT.value)]])
        result = ExperimentResult(config={}, rows=[], transcripts=[t])
        assert result.correct_rate_trajectory("x") == pytest.approx([0.0, 1.0])

    def test_trajectory_of_unknown_strategy_is_empty(self):
        result = ExperimentResult(config={}, rows=[], transcripts=[])
        assert result.correct_rate_trajectory("x") == []


class TestRunExperiment:
    def test_population_zero_yields_header_only(self):
        config = ExperimentConfig(strategies=["random"], seeds=[0],
                                  population=0)
        result = run_experiment(config, bank=chain_bank(), cmap=chain_map())
        assert result.rows == []
        assert result.to_csv_text() == ",".join(RESULT_COLUMNS) + "\n"

    def test_missing_bank_path(self):
        config = ExperimentConfig(strategies=["random"], seeds=[0])
        with pytest.raises(ConfigError):
            run_experiment(config)

    def test_loads_bank_and_map_from_files(self, tmp_path):
        bank_path, nodes_path, arcs_path = write_corpus(tmp_path)
        config = ExperimentConfig(strategies=["random"], seeds=[0],
                                  max_questions=10,
                                  bank_path=str(bank_path),
                                  nodes_path=str(nodes_path),
                                  arcs_path=str(arcs_path))
        result = run_experiment(config)
        assert len(result.rows) == 1
        assert result.rows[0].strategy == "random"

    def test_row_grid_and_config_echo(self):
        config = ExperimentConfig(strategies=["random"], seeds=[0, 1],
                                  population=2, max_questions=8)
        result = run_experiment(config, bank=chain_bank(), cmap=chain_map())
        assert len(result.rows) == 4
        assert {(r.student, r.seed) for r in result.rows} \
            == {(0, 0), (0, 1), (1, 0), (1, 1)}
        assert result.config == config.to_dict()

    def test_rerun_is_byte_identical(self):
        config = ExperimentConfig(strategies=["random", "clustering"],
                                  seeds=[0, 1], max_questions=10,
                                  warmup_students=2, warmup_sessions=1)
        first = run_experiment(config, bank=chain_bank(), cmap=chain_map())
        second = run_experiment(config, bank=chain_bank(), cmap=chain_map())
        assert first.to_csv_text() == second.to_csv_text()

    def test_no_strategy_repeats_a_question_within_a_session(self):
        config = ExperimentConfig(
            strategies=["concept_map", "collaborative_filtering", "clustering",
                        "supervised", "reinforcement_learning", "random"],
            seeds=[0], max_questions=12, warmup_students=2, warmup_sessions=2)
        result = run_experiment(config, bank=chain_bank(), cmap=chain_map())
        assert len(result.transcripts) == 6
        for transcript in result.transcripts:
            for session in transcript.sessions:
                qids = [qid for qid, _ in session]
                assert len(qids) == len(set(qids)), transcript.strategy

    def test_metrics_stay_in_range(self):
        config = ExperimentConfig(strategies=["random"], seeds=[0, 1, 2],
                                  max_questions=15)
        result = run_experiment(config, bank=chain_bank(), cmap=chain_map())
        for row in result.rows:
            assert 1 <= row.questions_to_mastery <= 15
            assert 0.0 <= row.correct_rate <= 1.0
            assert 0.0 <= row.coverage <= 1.0

    def test_prerequisite_order_beats_random_on_the_chain(self):
        result = run_experiment(benchmark_config(range(10)),
                                bank=chain_bank(), cmap=chain_map())
        guided = result.mean_questions_to_mastery("concept_map")
        control = result.mean_questions_to_mastery("random")
        assert guided < control
