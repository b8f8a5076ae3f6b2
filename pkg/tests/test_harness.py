import itertools
import json

import numpy as np
import pytest

from reluquery.harness import (
    CSV_COLUMNS,
    address_task_sampler,
    address_witness,
    affine_context_check,
    cube_containing,
    evaluation_grid,
    find_uncovered_cube,
    path_task_sampler,
    path_witness,
    support_hit_audit,
    sweep_worst_case,
    task_axis_breakpoints,
    value_task_sampler,
    verify_witness,
    write_csv,
)
from reluquery.learners import make_address_agent, make_path_agent, make_value_agent
from reluquery.mlp import affine_network
from reluquery.tasks import (
    AddressTask,
    HardFunction,
    PathTask,
    random_path,
    task_from_descriptor,
)


def test_cube_containing_half_open_convention():
    assert cube_containing(np.array([0.5]), 1).index == (1,)
    assert cube_containing(np.array([0.4999]), 1).index == (0,)
    assert cube_containing(np.array([1.0]), 2).index == (3,)  # last cell closed
    assert cube_containing(np.array([0.3, 0.8]), 2).index == (1, 3)


def brute_force_uncovered(queries, d, depth):
    level = depth - 1
    covered = set()
    for q in queries:
        idx = tuple(min(int(v * 2**level), 2**level - 1) for v in np.atleast_1d(q))
        covered.add(idx)
    for idx in itertools.product(range(2**level), repeat=d):
        if idx not in covered:
            return idx
    return None


@pytest.mark.parametrize("d,depth,n", [(1, 4, 7), (2, 2, 3), (2, 3, 10), (3, 2, 5)])
def test_find_uncovered_cube_matches_brute_force(d, depth, n):
    rng = np.random.default_rng(d * 100 + depth)
    for _ in range(10):
        queries = rng.uniform(0, 1, (n, d))
        hole = find_uncovered_cube(queries, d, depth)
        assert hole.index == brute_force_uncovered(queries, d, depth)


@pytest.mark.parametrize("d,depth,n", [(1, 4, 7), (2, 2, 3)])
def test_path_witness_reverified_from_descriptors(d, depth, n):
    rng = np.random.default_rng(7)
    queries = rng.uniform(0, 1, (n, d))
    pair = path_witness(queries, d, depth)
    audit = verify_witness(pair)
    assert audit["ok"]
    assert audit["context_gap"] == 0.0
    assert pair.separation == 1.0
    # the witness point lands in exactly one of the two deepest cubes
    ta = task_from_descriptor(pair.task_a)
    tb = task_from_descriptor(pair.task_b)
    z = np.asarray(pair.witness_point)
    assert abs(float(ta(z[None, :])[0]) - float(tb(z[None, :])[0])) == 1.0


def test_path_witness_rejects_saturating_query_sets():
    with pytest.raises(ValueError):
        path_witness(np.zeros((8, 1)), 1, 4)


def test_address_witness_picks_smallest_admissible_point():
    queries = [(0.0,), (0.125,), (0.25,), (0.67,), (0.7,)]
    delta = 1 / 60
    pair = address_witness(queries, 5, delta=delta)
    y = pair.witness_point[0]
    assert verify_witness(pair)["ok"]
    # brute scan: nothing admissible below y
    qs = np.asarray(queries).ravel()
    grid = np.linspace(2 / 3, y - 1e-9, 2000)
    dist = np.min(np.abs(grid[:, None] - qs[None, :]), axis=1)
    assert np.all(dist <= delta + 1e-12)
    assert np.min(np.abs(y - qs)) > delta


def test_address_witness_is_deterministic():
    queries = [(k / 8,) for k in range(5)]
    a = address_witness(queries, 5)
    b = address_witness(queries, 5)
    assert a.to_json_dict() == b.to_json_dict()


def test_affine_context_check_and_negative_control():
    pos = affine_context_check(5, trials=100, seed=1)
    assert pos["max_defect"] <= 1e-12
    neg = affine_context_check(5, trials=100, seed=1, hit_moving_support=True)
    assert neg["negative_control"] and neg["max_defect"] > 1e-6


def test_evaluation_grid_contains_breakpoints():
    task = PathTask(random_path(1, 3, np.random.default_rng(0)))
    grid = evaluation_grid(task, 50)[:, 0]
    for brk in task_axis_breakpoints(task)[0]:
        if 0 <= brk <= 1:
            assert np.min(np.abs(grid - brk)) == 0.0


def test_sweep_report_replay_stable_and_serializable(tmp_path):
    agent = make_path_agent(1, 2)
    sampler = path_task_sampler(1, 2)
    r1 = sweep_worst_case(agent, sampler, 500, 4, seed=11)
    r2 = sweep_worst_case(agent, sampler, 500, 4, seed=11)
    assert r1.payload() == r2.payload()
    assert r1.worst_error == 0.0
    doc = json.loads(r1.to_json())
    assert doc["schema_version"] == 1
    assert doc["seed"] == 11
    assert "lower bounds" in doc["scope_note"]
    out = tmp_path / "rep.csv"
    write_csv(out, [r1])
    header = out.read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)


def test_sweep_value_and_address_agents():
    rv = sweep_worst_case(make_value_agent(5, eps=0.01), value_task_sampler(5), 400, 3, seed=2)
    assert rv.worst_error <= 0.05
    h = HardFunction("invertible-address", input_dim=4, codomain=(2 / 3, 1))
    ra = sweep_worst_case(
        make_address_agent(5, address_fn=h), address_task_sampler(5, address_fn=h), 400, 3, seed=2
    )
    assert ra.worst_error == 0.0


def test_support_hit_audit_detects_unrecoverable_bit():
    h = HardFunction("invertible-address", input_dim=4, codomain=(2 / 3, 1))
    task = AddressTask(5, s=(0.3, 0.4, 0.5, 0.6), beta=1, address_fn=h)
    # agent that always guesses the spike at 2/3, far from the true location
    wrong = make_address_agent(5, address_net=affine_network(np.zeros((1, 4)), np.array([2 / 3])))
    audit = support_hit_audit(wrong, task)
    assert not audit["moving_support_hit"]
    assert audit["beta_predictions_identical"]
    # the correct agent does hit the moving support and separates the bits
    right = make_address_agent(5, address_fn=h)
    audit = support_hit_audit(right, task)
    assert audit["moving_support_hit"]
    assert not audit["beta_predictions_identical"]
