import pytest

from adventure import analytics, assessment
from adventure.events import EventLog, LogicalClock
from adventure.session import Mode
from adventure.simulate import (
    POLICY_USE_ADAPTIVE,
    SimLearnerProfile,
    SplitMix64,
    mutate_solution,
    simulate,
)

from conftest import make_engine, tiny_identity_graph


class TestSplitMix64:
    def test_reference_vector(self):
        # published test vector for splitmix64 with seed 1234567
        rng = SplitMix64(1234567)
        assert [rng.next_u64() for _ in range(3)] == [
            6457827717110365317,
            3203168211198807973,
            9817491932198370423,
        ]

    def test_deterministic(self):
        a, b = SplitMix64(99), SplitMix64(99)
        assert [a.next_u64() for _ in range(20)] == [b.next_u64() for _ in range(20)]

    def test_random_unit_interval(self):
        rng = SplitMix64(5)
        values = [rng.random() for _ in range(1000)]
        assert all(0.0 <= v < 1.0 for v in values)
        assert 0.4 < sum(values) / len(values) < 0.6


class TestMutateSolution:
    def setup_method(self):
        self.kg = tiny_identity_graph(n_per_level=2)
        self.runner = assessment.RunnerConfig.with_defaults()

    def test_mutation_always_fails_some_case(self):
        rng = SplitMix64(3)
        for ex in self.kg.exercises.values():
            code = mutate_solution(ex, rng, self.runner)
            results = assessment.run_tests(ex, code, self.runner)
            assert any(not r.passed for r in results), ex.id

    def test_flipped_comparison_fails_equality_exercise(self):
        from test_assessment import equality_graph

        kg = equality_graph()
        ex = kg.exercises["eq-1"]
        flipped = ex.reference_solution.replace("a == b", "a != b")
        results = assessment.run_tests(ex, flipped, self.runner)
        # the (5,5) -> True case must now fail
        assert results[0].passed is False

    def test_single_line_drop_becomes_empty(self):
        rng = SplitMix64(4)
        from adventure.simulate import _apply_mutation

        assert _apply_mutation("only line\n", "drop_last_line", rng) == ""

    def test_python_mutations_verified_by_runner(self):
        from test_assessment import equality_graph

        kg = equality_graph()
        ex = kg.exercises["eq-1"]
        rng = SplitMix64(5)
        for _ in range(5):
            code = mutate_solution(ex, rng, self.runner)
            results = assessment.run_tests(ex, code, self.runner)
            assert any(not r.passed for r in results)


class TestSimulate:
    def setup_method(self):
        self.kg = tiny_identity_graph(n_per_level=3, concept_count=3)

    def test_same_seed_byte_identical_logs(self, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        simulate(self.kg, Mode.HYBRID, 4, 15, seed=7, out_path=p1)
        simulate(self.kg, Mode.HYBRID, 4, 15, seed=7, out_path=p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_different_seed_diverges(self, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        simulate(self.kg, Mode.HYBRID, 4, 15, seed=7, out_path=p1)
        simulate(self.kg, Mode.HYBRID, 4, 15, seed=8, out_path=p2)
        assert p1.read_bytes() != p2.read_bytes()

    def test_high_ability_all_correct(self):
        profile = SimLearnerProfile(true_theta=9.0, slip=0.0, guess=0.0, empty_rate=0.0,
                                    skip_rate=0.0)
        events, _ = simulate(self.kg, Mode.ADAPTIVE, 2, 25, seed=1, profile=profile)
        submissions = [e for e in events if e.type == "submission"]
        assert submissions
        assert all(e.payload["classification"] == "Correct" for e in submissions)

    def test_adaptive_mode_makes_zero_llm_calls(self):
        _, engine = simulate(self.kg, Mode.ADAPTIVE, 3, 15, seed=2)
        assert engine.llm.calls == 0

    def test_replay_reconstructs_simulated_state(self):
        events, engine = simulate(self.kg, Mode.GENAI, 3, 15, seed=3)
        fresh = make_engine(self.kg, Mode.GENAI, log=EventLog(clock=LogicalClock()))
        fresh.recover_from(events)
        assert fresh.snapshot() == engine.snapshot()

    def test_always_use_adaptive_closes_loop_with_refusal_rate_one(self):
        profile = SimLearnerProfile(policy=POLICY_USE_ADAPTIVE)
        events, engine = simulate(self.kg, Mode.HYBRID, 3, 20, seed=4, profile=profile)
        rates = analytics.repeat_and_refusal_rates(events, set(engine.modes))
        assert rates.refusal_rate == 1.0

    def test_empty_submissions_exercise_missing_logic(self):
        profile = SimLearnerProfile(empty_rate=0.5)
        events, _ = simulate(self.kg, Mode.ADAPTIVE, 2, 30, seed=5, profile=profile)
        classifications = {e.payload["classification"] for e in events if e.type == "submission"}
        assert "MissingLogic" in classifications

    def test_profile_validation(self):
        with pytest.raises(ValueError):
            SimLearnerProfile(slip=1.5)

    def test_analytics_over_file_equals_in_memory_stream(self, tmp_path):
        from adventure.events import read_event_file

        path = tmp_path / "events.jsonl"
        events, engine = simulate(self.kg, Mode.HYBRID, 3, 12, seed=6, out_path=path)
        group_of = {learner: "C" for learner in engine.modes}
        from_memory = analytics.report(events, group_of)
        from_file = analytics.report(list(read_event_file(path)), group_of)
        assert from_memory == from_file
