import dataclasses

import numpy as np
import pytest

from signalgame.cli import builtin_example
from signalgame.evaluator import (
    NodeBudgetExceeded,
    exact_value,
    one_shot_deviation_check,
    reachable_tree,
    simulate,
)
from signalgame.game import GameSpec
from signalgame.solver import EquilibriumSolution, solve


def _single_action_game():
    # one action per stage: play is forced, all randomness is in the chain
    return GameSpec(
        horizon=3,
        states=(("a", "b"),) * 3,
        actions=(("go",),) * 3,
        terminating=(frozenset(),) * 3,
        kernels=(
            np.array([[[0.7, 0.3]], [[0.2, 0.8]]]),
            np.array([[[0.5, 0.5]], [[0.9, 0.1]]]),
        ),
        rewards_principal=(np.array([[1.0], [0.0]]),) * 3,
        rewards_receiver=(np.array([[0.0], [2.0]]),) * 3,
        prior=[0.6, 0.4],
    )


def test_reachable_tree_quickest_detection_two_stages():
    sol = solve(builtin_example("quickest_detection", 0.2, 0.1, 2))
    root = reachable_tree(sol)
    # the prior (1, 0) is already a vertex: one uninformative message,
    # the receiver declares state 1 and the chain moves to (0.8, 0.2)
    assert root.stage == 1
    assert np.allclose(root.belief, [1.0, 0.0], atol=1e-12)
    assert root.reach_probability == pytest.approx(1.0)
    assert len(root.edges) == 1
    edge = root.edges[0]
    assert edge.probability == pytest.approx(1.0)
    assert edge.action == 0
    assert edge.reward_principal == pytest.approx(1.0)
    assert edge.reward_receiver == pytest.approx(0.0)
    child = edge.child
    assert child is not None and child.stage == 2
    assert np.allclose(child.belief, [0.8, 0.2], atol=1e-12)
    # last stage: split onto the threshold 1/11 and the certain-no-change corner
    probs = sorted((e.probability, e.posterior[0]) for e in child.edges)
    assert len(probs) == 2
    assert probs[0][0] == pytest.approx(0.22)
    assert probs[0][1] == pytest.approx(1.0 / 11.0)
    assert probs[1][0] == pytest.approx(0.78)
    assert probs[1][1] == pytest.approx(1.0)
    assert exact_value(sol) == pytest.approx((2.0, -0.02), abs=1e-12)


def test_reachable_posteriors_are_vertices_and_probabilities_sum():
    for name, c, horizon in (("quickest_detection", 0.1, 7), ("detector", 0.15, 9)):
        sol = solve(builtin_example(name, 0.2, c, horizon))
        stack = [reachable_tree(sol)]
        seen = set()
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            if not node.edges:
                continue
            assert sum(e.probability for e in node.edges) == pytest.approx(1.0, abs=1e-12)
            verts = sol.stage(node.stage).triangulation.vertices
            for e in node.edges:
                gaps = np.abs(verts - e.posterior).max(axis=1)
                assert gaps.min() <= 1e-9
                if e.child is not None:
                    stack.append(e.child)


def test_exact_value_matches_backward_induction():
    for name, c, horizon in (("quickest_detection", 0.1, 14), ("detector", 0.15, 14)):
        sol = solve(builtin_example(name, 0.2, c, horizon))
        v = exact_value(sol)
        want = sol.values_at_prior()
        assert v[0] == pytest.approx(want[0], abs=1e-9)
        assert v[1] == pytest.approx(want[1], abs=1e-9)


def test_node_budget_guard():
    sol = solve(builtin_example("detector", 0.2, 0.15, 12))
    with pytest.raises(NodeBudgetExceeded) as err:
        reachable_tree(sol, node_cap=3)
    assert err.value.nodes >= 3
    assert 1 <= err.value.stage <= 12


def test_simulate_reproducible_and_seed_sensitive():
    sol = solve(builtin_example("quickest_detection", 0.2, 0.1, 6))
    a = simulate(sol, seed=5, trajectories=2000)
    b = simulate(sol, seed=5, trajectories=2000)
    c = simulate(sol, seed=6, trajectories=2000)
    assert a == b
    assert a.mean_principal != c.mean_principal or a.mean_receiver != c.mean_receiver


def test_simulate_single_action_game_matches_exact():
    sol = solve(_single_action_game())
    rep = simulate(sol, seed=1, trajectories=4000)
    v_a, v_b = exact_value(sol)
    # play is forced, so only chain noise remains; means land within 4 SEs
    assert abs(rep.mean_principal - v_a) <= 4 * rep.stderr_principal + 1e-12
    assert abs(rep.mean_receiver - v_b) <= 4 * rep.stderr_receiver + 1e-12
    assert rep.trajectories == 4000 and rep.seed == 1


def test_simulate_zero_variance_when_rewards_are_flat():
    spec = _single_action_game()
    flat = dataclasses.replace(
        spec,
        rewards_principal=(np.full((2, 1), 0.5),) * 3,
        rewards_receiver=(np.full((2, 1), -0.25),) * 3,
    )
    sol = solve(flat)
    rep = simulate(sol, seed=3, trajectories=500)
    assert rep.mean_principal == pytest.approx(1.5, abs=1e-12)
    assert rep.mean_receiver == pytest.approx(-0.75, abs=1e-12)
    assert rep.stderr_principal == pytest.approx(0.0, abs=1e-15)
    assert rep.stderr_receiver == pytest.approx(0.0, abs=1e-15)


def test_simulate_needs_two_trajectories():
    sol = solve(builtin_example("quickest_detection", 0.2, 0.1, 2))
    with pytest.raises(ValueError):
        simulate(sol, trajectories=1)


def test_simulate_agrees_with_exact_value():
    for name, c in (("quickest_detection", 0.1), ("detector", 0.15)):
        sol = solve(builtin_example(name, 0.2, c, 8))
        rep = simulate(sol, seed=12, trajectories=20_000)
        v_a, v_b = exact_value(sol)
        assert abs(rep.mean_principal - v_a) <= 4 * rep.stderr_principal + 1e-12
        assert abs(rep.mean_receiver - v_b) <= 4 * rep.stderr_receiver + 1e-12


def test_no_profitable_one_shot_deviations_on_builtins():
    for name, c in (("quickest_detection", 0.1), ("detector", 0.15)):
        sol = solve(builtin_example(name, 0.2, c, 10))
        report = one_shot_deviation_check(sol, seed=2)
        assert report.ok
        assert report.violations == ()
        assert report.max_receiver_gain <= 1e-9
        assert report.max_principal_gain <= 1e-9
        assert report.receiver_checked > 0
        assert report.principal_checked > 0


def test_deviation_check_flags_wrong_receiver_action():
    # corrupt the stored action at the absorbing corner of the last stage,
    # where declaring state 1 is strictly suboptimal for the receiver
    sol = solve(builtin_example("quickest_detection", 0.2, 0.1, 2))
    last = sol.stage(2)
    corner = int(np.argmax(last.triangulation.vertices[:, 0] > 0.5))
    assert last.vertex_actions[corner] == 0
    flipped = tuple(
        1 - a if i == corner else a for i, a in enumerate(last.vertex_actions)
    )
    bad_stage = dataclasses.replace(last, vertex_actions=flipped)
    bad = EquilibriumSolution(spec=sol.spec, stages=(sol.stages[0], bad_stage))
    report = one_shot_deviation_check(bad, seed=2)
    assert not report.ok
    kinds = {v["kind"] for v in report.violations}
    assert "receiver_action" in kinds
    flagged = [v for v in report.violations if v["kind"] == "receiver_action"]
    assert any(abs(v["belief"][0] - 1.0) <= 1e-9 and v["stage"] == 2 for v in flagged)
    assert report.max_receiver_gain == pytest.approx(1.0, abs=1e-9)


def test_deviation_check_single_action_game_is_vacuously_clean():
    sol = solve(_single_action_game())
    report = one_shot_deviation_check(sol, seed=0)
    assert report.ok
    assert report.max_receiver_gain == pytest.approx(0.0, abs=1e-12)
