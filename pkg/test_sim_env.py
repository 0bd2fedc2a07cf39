"""
Tests for the simulator and the scheduling MDP
"""

import numpy as np
import pytest

from src.baselines import asap_schedule
from src.cholesky_dag import generate_cholesky_dag
from src.errors import EpisodeNotFinishedError, IllegalActionError
from src.models import EnvConfig, EpisodeTrace
from src.sim_env import FEATURE_DIM, Pass, SchedulingEnv, SelectTask, extract_observation, window_nodes
from src.simulator import Simulator, validate_schedule


def run_first_available(env):
    """Always start the lowest-id available task"""
    done = False
    reward = 0.0
    while not done:
        _, reward, done = env.step(SelectTask(0))
    return reward


def test_reset_t4(env_config4):
    env = SchedulingEnv(env_config4)
    obs = env.observation
    assert env.sim.clock == 0
    assert env.sim.free_processors == [0, 1, 2, 3]
    assert obs.action_map == (0,)
    assert obs.pass_allowed is False
    assert obs.action_mask().tolist() == [True, False]
    # POTRF(0) plus its three TRSM successors
    assert obs.node_ids.tolist() == [0] + list(env.graph.successors[0])
    assert obs.features.shape == (4, FEATURE_DIM)


def test_reset_single_tile():
    env = SchedulingEnv(EnvConfig(tiles=1, processors=1))
    assert env.observation.action_map == (0,)
    assert env.observation.num_nodes == 1


def test_initial_features_t8():
    env = SchedulingEnv(EnvConfig(tiles=8, processors=4, window=0))
    row = env.observation.features[0]
    # [succ, pred, POTRF, SYRK, TRSM, GEMM, avail, run, cp]
    assert row.tolist() == [7, 0, 1, 0, 0, 0, 1, 0, 1.0]
    assert env.graph.cp_to_sink[0] / env.graph.critical_path == 1.0


def test_cp_feature_can_be_disabled():
    env = SchedulingEnv(EnvConfig(tiles=4, processors=2, use_cp_feature=False))
    assert np.all(env.observation.features[:, 8] == 0)


def test_select_keeps_clock_while_decisions_remain(graph4):
    env = SchedulingEnv(EnvConfig(tiles=4, processors=4))
    obs, reward, done = env.step(SelectTask(0))
    # POTRF(0) is the only task; time jumps to its completion
    assert env.sim.clock == 11
    assert obs.action_map == tuple(graph4.successors[0])
    assert (reward, done) == (0.0, False)

    obs, _, _ = env.step(SelectTask(0))
    assert env.sim.clock == 11
    assert len(obs.action_map) == 2
    assert obs.pass_allowed is True


def test_pass_advances_to_next_completion(fork_graph):
    env = SchedulingEnv(EnvConfig(tiles=1, processors=3, window=0), graph=fork_graph)
    env.step(SelectTask(0))
    assert env.sim.clock == 3
    assert env.observation.action_map == (1, 2, 3)

    env.step(SelectTask(0))
    env.step(SelectTask(0))
    assert sorted(env.sim.finish_times[t] for t in env.sim.running) == [5.0, 7.0]
    assert env.sim.free_processors == [2]

    obs, reward, done = env.step(Pass())
    assert obs.clock == 5
    assert env.sim.free_processors == [0, 2]
    assert env.sim.running == {2}
    assert obs.action_map == (3,)
    assert (reward, done) == (0.0, False)


def test_illegal_actions(env_config4):
    env = SchedulingEnv(env_config4)
    with pytest.raises(IllegalActionError):
        env.step(Pass())
    with pytest.raises(IllegalActionError):
        env.step(SelectTask(1))
    with pytest.raises(IllegalActionError):
        env.step(SelectTask(-1))


def test_simulator_rejects_start_without_free_processor(graph4):
    sim = Simulator(graph4, 1)
    sim.start(0)
    sim.advance()
    sim.start(sim.sorted_available()[0])
    with pytest.raises(IllegalActionError):
        sim.start(sim.sorted_available()[0])


def test_step_after_done_is_rejected():
    env = SchedulingEnv(EnvConfig(tiles=1, processors=1))
    _, reward, done = env.step(SelectTask(0))
    assert done
    assert reward == 0.0
    assert env.makespan() == 11
    with pytest.raises(IllegalActionError):
        env.step(SelectTask(0))


def test_makespan_before_end_raises(env_config4):
    env = SchedulingEnv(env_config4)
    with pytest.raises(EpisodeNotFinishedError):
        env.makespan()


def test_single_processor_makespan_is_total_work():
    env = SchedulingEnv(EnvConfig(tiles=4, processors=1))
    reward = run_first_available(env)
    assert env.makespan() == 116
    assert reward == 0.0


def test_terminal_reward_arithmetic():
    env = SchedulingEnv(EnvConfig(tiles=8, processors=4, baseline_makespan=160))
    assert env.baseline_makespan == 160
    reward = run_first_available(env)
    assert reward == pytest.approx((160 - env.makespan()) / 160)
    assert (160 - 163) / 160 == pytest.approx(-0.01875)


def test_asap_order_reaches_critical_path():
    graph = generate_cholesky_dag(4)
    env = SchedulingEnv(EnvConfig(tiles=4, processors=4))
    done = False
    reward = None
    while not done:
        cp = graph.cp_to_sink
        best = max(range(len(env.observation.action_map)), key=lambda i: cp[env.observation.action_map[i]])
        _, reward, done = env.step(SelectTask(best))
    assert env.makespan() == 74
    assert reward == 0.0


def test_window_zero_is_running_and_available():
    env = SchedulingEnv(EnvConfig(tiles=6, processors=3, window=0))
    for _ in range(5):
        env.step(SelectTask(0))
    obs = env.observation
    assert set(obs.node_ids.tolist()) == env.sim.running | env.sim.available


def test_window_one_matches_brute_force():
    env = SchedulingEnv(EnvConfig(tiles=6, processors=2, window=1))
    for _ in range(8):
        env.step(SelectTask(0))
    sim = env.sim
    frontier = sim.running | sim.available
    expected = set(frontier)
    for task in frontier:
        expected |= {s for s in env.graph.successors[task] if s != env.graph.sink}
    assert set(env.observation.node_ids.tolist()) == expected


def test_unbounded_window_reaches_every_unfinished_task():
    graph = generate_cholesky_dag(5)
    sim = Simulator(graph, 2)
    sim.start(0)
    sim.advance()
    nodes = set(window_nodes(sim, None))
    assert nodes == set(graph.real_tasks) - sim.done


def test_observation_edges_are_symmetric_with_self_loops(env_config4):
    env = SchedulingEnv(env_config4)
    env.step(SelectTask(0))
    obs = env.observation
    pairs = set(map(tuple, obs.edges.T.tolist()))
    for row in range(obs.num_nodes):
        assert (row, row) in pairs
    for a, b in pairs:
        assert (b, a) in pairs


def test_avail_and_run_are_exclusive():
    env = SchedulingEnv(EnvConfig(tiles=5, processors=2, window=2))
    for _ in range(6):
        obs = env.observation
        assert not np.any((obs.features[:, 6] == 1) & (obs.features[:, 7] == 1))
        ids = obs.node_ids.tolist()
        assert env.graph.sink not in ids
        env.step(SelectTask(len(obs.action_map) - 1))


def test_observation_with_explicit_window(env_config4):
    env = SchedulingEnv(env_config4)
    env.step(SelectTask(0))
    wide = env.extract_observation(window=None)
    narrow = env.extract_observation(window=0)
    assert narrow.num_nodes <= env.observation.num_nodes <= wide.num_nodes
    direct = extract_observation(env.sim, 1, True, env.node_counts)
    np.testing.assert_array_equal(direct.features, env.observation.features)


def test_same_actions_same_trajectory():
    def roll(seed):
        env = SchedulingEnv(EnvConfig(tiles=5, processors=3, seed=seed))
        rng = np.random.default_rng(7)
        clocks = []
        done = False
        while not done:
            obs = env.observation
            if obs.pass_allowed and rng.random() < 0.2:
                action = Pass()
            else:
                action = SelectTask(int(rng.integers(len(obs.action_map))))
            _, _, done = env.step(action)
            clocks.append(env.sim.clock)
        return clocks, env.export_trace()

    first, trace_a = roll(0)
    second, trace_b = roll(0)
    assert first == second
    assert trace_a == trace_b


def test_duration_noise_is_seeded():
    graph = generate_cholesky_dag(4)
    a = Simulator(graph, 2, duration_noise=0.2, seed=3).durations
    b = Simulator(graph, 2, duration_noise=0.2, seed=3).durations
    c = Simulator(graph, 2, duration_noise=0.2, seed=4).durations
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a[graph.sink] == 0


def test_trace_export(env_config4):
    env = SchedulingEnv(env_config4)
    run_first_available(env)
    trace = env.export_trace()
    assert isinstance(trace, EpisodeTrace)
    assert trace.makespan == env.makespan()
    assert len(trace.decisions) == env.steps
    assert trace.decisions[0].action == "POTRF(0)"
    assert trace.decisions[0].assignments == [None, None, None, None]
    assert trace.config.baseline_makespan == 74
    assert validate_schedule(env.graph, trace.schedule, 4) == []

    restored = EpisodeTrace.model_validate_json(trace.model_dump_json())
    assert restored == trace


def test_validate_schedule_reports_violations(graph4):
    good = list(asap_schedule(graph4, 2).assignments)
    assert validate_schedule(graph4, good, 2) == []

    clash = good[1].model_copy(update={"start": good[0].start, "finish": good[0].start + 8, "processor": good[0].processor})
    problems = validate_schedule(graph4, [good[0], clash] + good[2:], 2)
    assert any("before" in p for p in problems)
    assert any("simultaneously" in p for p in problems)

    problems = validate_schedule(graph4, good[:-1], 2)
    assert any("never executed" in p for p in problems)
