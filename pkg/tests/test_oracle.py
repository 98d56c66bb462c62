from __future__ import annotations

import numpy as np
import pytest

from src.envs.grid import ACTIONS, OFFICE_PROPS, grid_labelling, load_map
from src.envs.tasks import craft_tasks, env_tasks
from src.mdprm import assemble, build_cross_product, run_episode
from src.oracle import (
    UnreachableGoal,
    accepts_trace,
    bellman_residual,
    cross_vi,
    greedy_rollout,
    optimal_avg_reward,
)
from src.shaping import shaped

from .conftest import GAMMA


@pytest.fixture
def task1_solution(task1):
    return cross_vi(build_cross_product(task1))


def test_start_value(task1, task1_solution):
    assert task1_solution.value(task1.env.start, 0) == pytest.approx(GAMMA**7, abs=1e-9)
    assert bellman_residual(task1_solution) <= 1e-10


def test_greedy_rollout_is_shortest(task1, task1_solution, rng):
    trace = greedy_rollout(task1, task1_solution, rng, cap=100)
    assert len(trace) == 8
    assert trace[-1].terminal and trace[-1].r == 1.0
    assert not any(e.s_next in task1.env.locations["d"] for e in trace)


def test_optimal_avg_reward_single_task(task1):
    report = optimal_avg_reward([task1], cap=1000)
    assert report.lengths == (8,)
    assert report.per_task == pytest.approx((1 / 8,))
    assert report.aggregate == pytest.approx(1 / 8)


def test_optimal_avg_reward_undiscounted_task(task1):
    t = assemble(task1.env, task1.rm, task1.labelling, 1.0)
    report = optimal_avg_reward([t], cap=1000)
    assert report.lengths == (8,)
    assert report.per_task == pytest.approx((1 / 8,))


def test_optimal_avg_reward_undiscounted_office(office_map, office_specs):
    labelling = grid_labelling(office_map, "office")
    tasks = [assemble(office_map, spec.rm, labelling, 1.0) for spec in office_specs]
    assert optimal_avg_reward(tasks, cap=1000).lengths == (8, 10, 36, 10)


def test_optimal_avg_reward_office(office_mdprms):
    report = optimal_avg_reward(office_mdprms, cap=1000)
    assert report.lengths == (8, 10, 36, 10)
    assert report.rewards == (1.0, 1.0, 1.0, 1.0)
    assert report.aggregate == pytest.approx(4 / 64)


def test_optimum_scores_shaped_tasks_on_raw_reward(task1):
    t = assemble(task1.env, shaped(task1.rm, GAMMA), task1.labelling, GAMMA, base=task1.rm)
    report = optimal_avg_reward([t], cap=1000)
    assert report.rewards == (1.0,)
    assert report.lengths == (8,)


def test_unreachable_goal(coffee_rm):
    walled = load_map("XXXXXXX\nXS.cXoX\nXXXXXXX\n", OFFICE_PROPS)
    t = assemble(walled, coffee_rm, grid_labelling(walled, "office"), GAMMA)
    with pytest.raises(UnreachableGoal):
        optimal_avg_reward([t], cap=50)


def test_shaping_keeps_optimal_actions(task1, task1_solution):
    t = assemble(task1.env, shaped(task1.rm, GAMMA), task1.labelling, GAMMA, base=task1.rm)
    sol = cross_vi(build_cross_product(t))
    for key in task1_solution.cp.states:
        s, u = key
        if not task1.rm.is_terminal(u):
            assert sol.actions(s, u) == task1_solution.actions(s, u)


@pytest.mark.parametrize(
    ("labels", "final", "accepted"),
    [
        ([{"i"}, {"w"}, {"f"}], "done", True),
        ([{"w"}, set(), {"i"}, {"f"}], "done", True),
        ([{"i", "w"}, {"f"}], "done", True),
        ([{"w"}, {"f"}, {"i"}], "u3", False),
        ([{"f"}, {"i"}], "u1", False),
        ([], "u0", False),
    ],
)
def test_accepts_trace_bridge(labels, final, accepted):
    m = craft_tasks()[4].rm
    u, total, ok = accepts_trace(m, labels)
    assert m.states[u].name == final
    assert ok is accepted
    assert total == (1.0 if accepted else 0.0)


def test_accepts_trace_rejects_broken_decoration(coffee_rm):
    u, total, ok = accepts_trace(coffee_rm, [{"c"}, {"d"}, {"o"}])
    assert coffee_rm.states[u].name == "fail"
    assert (total, ok) == (0.0, False)


@pytest.mark.parametrize(
    ("env_id", "number", "labels", "accepted"),
    [
        ("office", 2, [{"m"}, {"o"}], True),
        ("office", 2, [{"o"}, {"m"}], False),
        ("office", 2, [{"m"}, {"d"}, {"o"}], False),
        ("office", 3, [{"A"}, {"B"}, {"C"}, {"D"}], True),
        ("office", 3, [{"B"}, {"A"}, {"C"}, {"D"}], False),
        ("office", 3, [{"A"}, {"B"}, {"C"}, {"d"}, {"D"}], False),
        ("office", 4, [{"m"}, {"c"}, {"o"}], True),
        ("office", 4, [{"c"}, {"m"}, {"o"}], True),
        ("office", 4, [{"c"}, {"o"}], False),
        ("craft", 1, [{"w"}, {"t"}], True),
        ("craft", 1, [{"t"}, {"w"}], False),
        ("craft", 2, [{"w"}, {"b"}], True),
        ("craft", 2, [{"b"}], False),
        ("craft", 3, [{"g"}, {"f"}], True),
        ("craft", 3, [{"f"}, {"g"}], False),
        ("craft", 4, [{"g"}, {"t"}], True),
        ("craft", 4, [{"w"}, {"t"}], False),
        ("craft", 6, [{"w"}, {"t"}, {"g"}, {"b"}], True),
        ("craft", 6, [{"g"}, {"w"}, {"t"}, {"b"}], True),
        ("craft", 6, [{"w"}, {"t"}, {"b"}], False),
        ("craft", 6, [{"w"}, {"g"}, {"b"}], False),
        ("craft", 7, [{"w"}, {"b"}, {"i"}, {"t"}], True),
        ("craft", 7, [{"i"}, {"w"}, {"b"}, {"t"}], True),
        ("craft", 7, [{"w"}, {"b"}, {"t"}], False),
        ("craft", 8, [{"w"}, {"b"}, {"i"}, {"b"}], True),
        ("craft", 8, [{"i"}, {"w"}, {"b"}, {"b"}], True),
        ("craft", 8, [{"w"}, {"b"}, {"b"}], False),
        ("craft", 9, [{"i"}, {"w"}, {"f"}, {"r"}], True),
        ("craft", 9, [{"w"}, {"i"}, {"f"}, {"r"}], True),
        ("craft", 9, [{"i"}, {"f"}, {"w"}, {"r"}], False),
        ("craft", 10, [{"w"}, {"b"}, {"i"}, {"t"}, {"x"}], True),
        ("craft", 10, [{"i"}, {"w"}, {"b"}, {"t"}, {"x"}], True),
        ("craft", 10, [{"w"}, {"b"}, {"i"}, {"x"}, {"t"}], False),
    ],
)
def test_shipped_tasks_accept_their_traces(env_id, number, labels, accepted):
    m = env_tasks(env_id)[number - 1].rm
    u, total, ok = accepts_trace(m, labels)
    assert ok is accepted
    assert total == (1.0 if accepted else 0.0)
    if accepted:
        assert m.states[u].name == "done"


@pytest.mark.parametrize("index", range(4))
def test_accepts_trace_agrees_with_episodes(office_mdprms, index):
    t = office_mdprms[index]
    rng = np.random.default_rng(index)
    for _ in range(50):
        trace = run_episode(t, lambda s, u, g: ACTIONS[int(g.integers(len(ACTIONS)))], rng, cap=60)
        labels = [t.labelling(e.s, e.a, e.s_next) for e in trace]
        u, total, ok = accepts_trace(t.rm, labels)
        assert u == trace[-1].u_next
        assert total == sum(e.raw_r for e in trace)
        assert ok is (trace[-1].terminal and total > 0)
