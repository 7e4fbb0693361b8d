import pytest

from conftest import frames_equal
from lanenav.harness import (
    BenchCell,
    BenchRow,
    EpisodeRecord,
    StepRecord,
    model_label,
    run_benchmark,
    run_episode,
    speed_label,
    summarize,
    verify_replay,
)
from lanenav.mcts import MCTSConfig
from lanenav.models import ForwardModel, OracleModel
from lanenav.seeding import episode_seed
from lanenav.world import Outcome, WorldConfig

FAST_WORLD = WorldConfig(max_steps=60)
SMALL_MCTS = MCTSConfig(n_rollouts=20, rollout_length=1)


def _record(kind, steps, world=None, mcts=None):
    return EpisodeRecord(
        episode_seed=0,
        outcome=Outcome(kind, {"goal": 20.0, "died": -20.0}.get(kind, 0.0), steps),
        steps=steps,
        trace=[],
        model_name="oracle",
        model_spec="oracle",
        world_config=world or WorldConfig(),
        mcts_config=mcts or MCTSConfig(),
    )


class TestRunEpisode:
    def test_terminates_with_outcome(self):
        record = run_episode(FAST_WORLD, SMALL_MCTS, "oracle", episode_seed(1, 0))
        assert record.outcome.kind in ("goal", "died", "timeout")
        assert record.error is None
        assert record.steps == len(record.trace)
        assert record.steps <= FAST_WORLD.max_steps

    @pytest.mark.parametrize("spec", ["oracle", "frozen", "none"])
    def test_same_seed_same_record(self, spec):
        a = run_episode(FAST_WORLD, SMALL_MCTS, spec, episode_seed(2, 1))
        b = run_episode(FAST_WORLD, SMALL_MCTS, spec, episode_seed(2, 1))
        assert a.trace == b.trace
        assert a.outcome == b.outcome

    def test_keep_frames(self):
        record = run_episode(FAST_WORLD, SMALL_MCTS, "oracle", episode_seed(3, 0),
                             keep_frames=True)
        assert record.frames is not None
        assert len(record.frames) == record.steps + 1

    def test_random_agent_needs_no_model(self):
        record = run_episode(FAST_WORLD, SMALL_MCTS, "none", episode_seed(3, 1))
        assert record.model_name == "random"

    def test_action_independence_across_models(self):
        a = run_episode(FAST_WORLD, SMALL_MCTS, "oracle", episode_seed(4, 2), keep_frames=True)
        b = run_episode(FAST_WORLD, SMALL_MCTS, "frozen", episode_seed(4, 2), keep_frames=True)
        for fa, fb in zip(a.frames, b.frames):
            assert frames_equal(fa, fb)

    def test_model_instance_accepted(self):
        model = OracleModel()
        record = run_episode(FAST_WORLD, SMALL_MCTS, model, episode_seed(5, 0))
        assert record.model_name == "oracle"
        assert model.calls == record.steps

    def test_model_calls_independent_of_rollout_count(self):
        # the shared-rollout economy: one generation per decision
        counts = {}
        for n_rollouts in (1, 100, 1000):
            model = OracleModel()
            cfg = MCTSConfig(n_rollouts=n_rollouts, rollout_length=3)
            record = run_episode(FAST_WORLD, cfg, model, episode_seed(6, 0))
            assert model.calls == record.steps
            counts[n_rollouts] = model.calls / record.steps
        assert set(counts.values()) == {1.0}

    def test_model_error_becomes_diagnostic_record(self):
        class Exploding(ForwardModel):
            name = "boom"
            needs_state = True

            def predict(self, state, k):
                raise RuntimeError("synthetic failure")

        record = run_episode(FAST_WORLD, SMALL_MCTS, Exploding(), episode_seed(7, 0))
        assert record.error is not None
        assert "synthetic failure" in record.error
        assert record.outcome.kind == "running"


class TestReplay:
    @pytest.mark.parametrize("spec", ["oracle", "velocity", "none"])
    def test_replay_matches(self, spec):
        record = run_episode(FAST_WORLD, SMALL_MCTS, spec, episode_seed(8, 0))
        assert verify_replay(record)

    def test_replay_detects_tampering(self):
        record = run_episode(FAST_WORLD, SMALL_MCTS, "oracle", episode_seed(8, 1))
        step = record.trace[-1]
        record.trace[-1] = StepRecord(step.t, step.agent_x, step.agent_y,
                                      step.action, step.reward + 1.0, step.outcome)
        assert not verify_replay(record)


class TestSummarize:
    def test_mixed_outcomes(self):
        rows = [_record("goal", 30), _record("died", 12), _record("timeout", 203)]
        row = summarize(rows)
        assert (row.g, row.t, row.d) == (1, 1, 1)
        assert row.s_mean == pytest.approx(116.5)
        assert row.s_std == pytest.approx(86.5)
        assert row.episodes == 3

    def test_all_died_has_no_steps(self):
        row = summarize([_record("died", 5), _record("died", 9)])
        assert row.s_mean is None and row.s_std is None
        assert row.d == 2

    def test_single_goal(self):
        row = summarize([_record("goal", 40)])
        assert row.s_mean == pytest.approx(40.0)
        assert row.s_std == pytest.approx(0.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summarize([])

    def test_speed_label(self):
        assert speed_label(WorldConfig(agent_speed=1.0)) == "2x"
        assert speed_label(WorldConfig(agent_speed=0.5)) == "1x"

    def test_model_label(self):
        assert model_label("noisy:0.1,0.02,1.0,5") == ("noisy", 5)
        assert model_label("none") == ("random", 1)


class TestBenchmark:
    def test_count_conservation(self):
        cells = [BenchCell("oracle", "2x", 1), BenchCell("frozen", "2x", 1)]
        table = run_benchmark(cells, FAST_WORLD, SMALL_MCTS, n_episodes=8)
        for row in table.rows:
            assert row.g + row.t + row.d == 8

    def test_shared_seeds_share_worlds(self):
        # same episode index in two cells sees the same initial frame
        seed = episode_seed(WorldConfig().master_seed, 0)
        a = run_episode(FAST_WORLD.for_speed("2x"), SMALL_MCTS, "oracle", seed, keep_frames=True)
        b = run_episode(FAST_WORLD.for_speed("1x"), SMALL_MCTS, "oracle", seed, keep_frames=True)
        assert frames_equal(a.frames[0], b.frames[0])

    def test_parallel_equals_serial(self):
        cells = [BenchCell("oracle", "2x", 1), BenchCell("frozen", "2x", 3)]
        serial = run_benchmark(cells, FAST_WORLD, SMALL_MCTS, n_episodes=6, parallelism=1)
        parallel = run_benchmark(cells, FAST_WORLD, SMALL_MCTS, n_episodes=6, parallelism=4)
        assert serial.to_csv() == parallel.to_csv()

    def test_csv_shape(self):
        table = run_benchmark([BenchCell("oracle", "2x", 1)], FAST_WORLD, SMALL_MCTS,
                              n_episodes=3)
        lines = table.to_csv().strip().split("\n")
        assert lines[0] == "model,n_samples,speed,k,G,T,D,S_mean,S_std,episodes"
        assert len(lines) == 2
        assert lines[1].startswith("oracle,1,2x,1,")

    def test_csv_empty_steps_when_all_died(self):
        row = BenchRow(model="random", n_samples=1, speed="2x", k=1,
                       g=0, t=0, d=2, s_mean=None, s_std=None, episodes=2)
        from lanenav.harness import BenchTable

        csv_line = BenchTable(rows=[row]).to_csv().strip().split("\n")[1]
        assert csv_line == "random,1,2x,1,0,0,2,,,2"

    def test_text_table_contains_rows(self):
        table = run_benchmark([BenchCell("oracle", "2x", 1)], FAST_WORLD, SMALL_MCTS,
                              n_episodes=2)
        text = table.format_text()
        assert "oracle" in text
        assert "2x" in text

    def test_invalid_episode_count(self):
        with pytest.raises(ValueError):
            run_benchmark([BenchCell("oracle", "2x", 1)], FAST_WORLD, SMALL_MCTS, n_episodes=0)
