"""Acceptance gate: one test per headline claim, one PASS/FAIL line each.

Universal lower bounds quantifying over all bounded-size networks are not
empirically checkable; their constructive skeletons (witness pairs, affine
context maps, support-hit audits) stand in for them here, and nothing in
this file claims the quantified bounds themselves.
"""

import sys
import time

import numpy as np
from conftest import record_acceptance

from reluquery import gadgets, mlp, transformer
from reluquery.gadgets import BumpSpec, HatSpec
from reluquery.harness import (
    address_witness,
    affine_context_check,
    evaluation_grid,
    path_task_sampler,
    path_witness,
    support_hit_audit,
    sweep_worst_case,
    value_task_sampler,
    verify_witness,
)
from reluquery.learners import (
    InContextLearner,
    embed_ic_as_agent,
    make_address_agent,
    make_grid_ic_learner,
    make_network_ic_learner,
    make_path_agent,
    make_value_agent,
    run_agentic,
    run_in_context,
)
from reluquery.mlp import affine_network, count_weights, evaluate_scalar
from reluquery.tasks import (
    AddressTask,
    HardFunction,
    PathTask,
    ValueTask,
    default_delta,
    random_path,
    task_from_descriptor,
)


def _check(num, desc, ok, detail=""):
    tail = f" [{detail}]" if detail else ""
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {desc}{tail}"
    print(line, file=sys.__stdout__, flush=True)
    record_acceptance(line)
    assert ok, line


def test_criterion_1_exact_gadget_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0

    xs = np.union1d(np.linspace(-2, 2, 10_001), [0.0])
    worst = max(worst, float(np.max(np.abs(
        evaluate_scalar(gadgets.abs_gadget(), xs[:, None]) - np.abs(xs)))))

    for d in (2, 4, 8):
        pts = rng.uniform(-1, 1, (10_000, d))
        ties = np.repeat(rng.uniform(-1, 1, (1000, 1)), d, axis=1)
        pts = np.vstack([pts, ties])
        got = evaluate_scalar(gadgets.max_gadget(d), pts)
        worst = max(worst, float(np.max(np.abs(got - pts.max(axis=1)))))

    spec = HatSpec(0.375, 1 / 60)
    xs = np.union1d(np.linspace(0, 1, 10_001),
                    [spec.center - spec.half_width, spec.center, spec.center + spec.half_width])
    got = evaluate_scalar(gadgets.hat_gadget(spec), xs[:, None])
    worst = max(worst, float(np.max(np.abs(got - spec.reference(xs)))))

    xs = np.union1d(np.linspace(-1, 2, 10_001), [0.0, 1.0])
    got = evaluate_scalar(gadgets.selector_gadget(), xs[:, None])
    worst = max(worst, float(np.max(np.abs(got - np.clip(xs, 0, 1)))))

    for d in (1, 2):
        bspec = BumpSpec((0.25,) * d, 0.5, 0.25)
        kinks = [0.0, 0.125, 0.25, 0.375, 0.5]
        axis = np.union1d(np.linspace(0, 1, {1: 10_001, 2: 101}[d]), kinks)
        mesh = np.meshgrid(*[axis] * d, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        got = evaluate_scalar(gadgets.bump_gadget(bspec), pts)
        worst = max(worst, float(np.max(np.abs(got - gadgets.bump_reference(bspec, pts)))))

    elapsed = time.perf_counter() - t0
    _check(1, "gadget suite exact to 1e-9 on 1e4+ inputs with kinks, < 10 s",
           worst <= 1e-9 and elapsed < 10.0,
           f"worst={worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_mult_log_weight_contract():
    t0 = time.perf_counter()
    # (c0, c1) fixed once from the eps = 1e-1 and 1e-4 weight measurements
    # (156 and 396 nonzero parameters respectively)
    c1 = 240.0 / (np.log2(1e4) - np.log2(10))
    c0 = 156.0 - c1 * np.log2(10) + 1e-6
    g = np.linspace(0, 1, 201)
    a, b = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([a.ravel(), b.ravel()], axis=1)
    ok = True
    details = []
    for eps in (1e-1, 1e-2, 1e-3):
        net = gadgets.mult_eps(eps)
        err = float(np.max(np.abs(evaluate_scalar(net, pts) - pts[:, 0] * pts[:, 1])))
        weights = count_weights(net)
        bound = c0 + c1 * np.log2(1 / eps)
        ok &= err <= eps and weights <= bound
        details.append(f"eps={eps:g}: err={err:.1e}, w={weights}<={bound:.0f}")
    elapsed = time.perf_counter() - t0
    _check(2, "Mult error <= eps and weights <= c0 + c1 log2(1/eps), < 30 s",
           ok and elapsed < 30.0, "; ".join(details) + f", {elapsed:.1f}s")


def test_criterion_3_path_agent_exactness():
    t0 = time.perf_counter()
    worst = 0.0
    worst_gap = 0.0
    ok_budget = True
    for d in (1, 2, 3):
        for depth in (1, 2, 3, 4):
            if 2**d * depth > 64:
                continue
            general = make_path_agent(d, depth)
            realizable = make_path_agent(d, depth, realizable=True)
            ok_budget &= general.n_queries == 2**d * depth
            ok_budget &= realizable.n_queries == 2**d * depth
            rng = np.random.default_rng(1000 * d + depth)
            res = {1: 2000, 2: 400, 3: 64}[d]
            for _ in range(100):
                task = PathTask(random_path(d, depth, rng))
                grid = evaluation_grid(task, res)
                truth = task(grid)
                _, pred_g = run_agentic(general, task)
                _, pred_r = run_agentic(realizable, task)
                got_g, got_r = pred_g(grid), pred_r(grid)
                worst = max(worst, float(np.max(np.abs(got_g - truth))),
                            float(np.max(np.abs(got_r - truth))))
                worst_gap = max(worst_gap, float(np.max(np.abs(got_g - got_r))))
    elapsed = time.perf_counter() - t0
    _check(3, "path agent exact (both modes, realizable == general), < 2 min",
           worst <= 1e-9 and worst_gap <= 1e-9 and ok_budget and elapsed < 120.0,
           f"worst={worst:.2e}, mode gap={worst_gap:.2e}, {elapsed:.1f}s")


def test_criterion_4_path_in_context_witness():
    ok = True
    details = []
    for d, depth, n in ((1, 4, 7), (2, 2, 3)):
        ic = make_grid_ic_learner(d, n)
        pair = path_witness(ic.queries, d, depth)
        audit = verify_witness(pair)
        ok &= audit["context_gap"] == 0.0 and pair.separation == 1.0
        z = np.asarray(pair.witness_point)[None, :]
        err = 0.0
        for doc in (pair.task_a, pair.task_b):
            task = task_from_descriptor(doc)
            _, predict = run_in_context(ic, task)
            err = max(err, float(np.abs(predict(z) - task(z))[0]))
        ok &= err >= 0.5 - 1e-9
        details.append(f"d={d}: IC error {err:.3f}")
    _check(4, "path witness: equal contexts, separation 1, IC error >= 1/2",
           ok, "; ".join(details))


def _random_ic_learners(d=1, count=10):
    learners = []
    for i in range(count - 1):
        rng = np.random.default_rng(100 + i)
        n = int(rng.integers(3, 9))
        queries = np.sort(rng.uniform(0, 1, (n, d)), axis=0)
        w = rng.normal(size=n)
        v = float(rng.normal())

        def predictor(ctx, xs, w=w, v=v):
            return float(w @ ctx.responses) + v * xs[:, 0]

        learners.append(InContextLearner(queries=queries, predictor=predictor))
    rng = np.random.default_rng(999)
    queries = np.sort(rng.uniform(0, 1, (4, d)), axis=0)
    net = affine_network(rng.normal(size=(1, 4 * (d + 1) + d)))
    learners.append(make_network_ic_learner(queries, net))
    return learners


def test_criterion_5_monotonicity_embedding():
    rng = np.random.default_rng(55)
    h = HardFunction("invertible-address", input_dim=4, codomain=(2 / 3, 1))
    tasks = []
    tasks += [PathTask(random_path(1, 3, rng)) for _ in range(20)]
    tasks += [ValueTask(5, s=tuple(rng.uniform(0, 1, 3)),
                        q_star=float(rng.uniform(2 / 3, 1))) for _ in range(20)]
    tasks += [AddressTask(5, s=tuple(rng.uniform(0, 1, 4)),
                          beta=int(rng.integers(2)), address_fn=h) for _ in range(20)]
    xs = rng.uniform(0, 1, (200, 1))
    ok = True
    for ic in _random_ic_learners():
        agent = embed_ic_as_agent(ic)
        for task in tasks:
            _, p_ic = run_in_context(ic, task)
            _, p_ag = run_agentic(agent, task)
            ok &= bool(np.array_equal(np.asarray(p_ic(xs)), np.asarray(p_ag(xs))))
    _check(5, "embedded IC learner predicts identically on every task, exact equality", ok,
           "10 learners x 60 tasks")


def test_criterion_6_value_agent_bound():
    t0 = time.perf_counter()
    eps = 0.01
    ok = True
    details = []
    for n in (3, 5, 8):
        rep = sweep_worst_case(make_value_agent(n, eps=eps), value_task_sampler(n),
                               800, 200, seed=n)
        rep_exact = sweep_worst_case(make_value_agent(n, exact_product=True),
                                     value_task_sampler(n), 800, 200, seed=n)
        ok &= rep.worst_error <= n * eps and rep_exact.worst_error <= 1e-9
        details.append(f"N={n}: {rep.worst_error:.1e}<={n * eps:g}, exact {rep_exact.worst_error:.1e}")
    elapsed = time.perf_counter() - t0
    _check(6, "value agent error <= N*eps; exact-product variant <= 1e-9, < 1 min",
           ok and elapsed < 60.0, "; ".join(details) + f", {elapsed:.1f}s")


def test_criterion_7_affine_context():
    pos = affine_context_check(5, trials=1000, seed=7)
    neg = affine_context_check(5, trials=1000, seed=7, hit_moving_support=True)
    _check(7, "context affine in (q*, s) to 1e-12; negative control > 1e-6",
           pos["max_defect"] <= 1e-12 and neg["max_defect"] > 1e-6,
           f"defect={pos['max_defect']:.1e}, control={neg['max_defect']:.1e}")


def test_criterion_8_address_agent_exactness():
    ok = True
    worst = 0.0
    for n in (3, 5):
        h = HardFunction("invertible-address", input_dim=n - 1, codomain=(2 / 3, 1))
        agent = make_address_agent(n, address_fn=h)
        rng = np.random.default_rng(n)
        for _ in range(100):
            task = AddressTask(n, s=tuple(rng.uniform(0, 1, n - 1)),
                               beta=int(rng.integers(2)), address_fn=h)
            ctx, predict = run_agentic(agent, task)
            ok &= float(ctx.responses[-1]) == float(task.beta)
            grid = evaluation_grid(task, 800)
            worst = max(worst, float(np.max(np.abs(predict(grid) - task(grid[:, 0])))))
    _check(8, "address agent reconstructs exactly; final response equals the bit",
           ok and worst <= 1e-9, f"worst={worst:.2e}")


def test_criterion_9_address_witness():
    ok = True
    rng = np.random.default_rng(9)
    for _ in range(20):
        queries = rng.uniform(0, 1, 5)
        pair = address_witness([(q,) for q in queries], 5, delta=1 / 60)
        audit = verify_witness(pair)
        ok &= audit["context_gap"] <= 1e-12 and pair.separation == 1.0
    # fold collision: flipping a {0,1} coordinate moves nothing
    h = HardFunction("invertible-address", input_dim=4, codomain=(2 / 3, 1))
    s = (0.0, 0.3, 0.8, 0.5)
    s_flip = (1.0, 0.3, 0.8, 0.5)
    a = AddressTask(5, s=s, beta=1, delta=1 / 60, address_fn=h)
    b = AddressTask(5, s=s_flip, beta=1, delta=1 / 60, address_fn=h)
    ok &= a.spike_location == b.spike_location
    _check(9, "address witness always succeeds; fold-collision pair shares its spike", ok,
           "20 query sets, delta=1/60")


def test_criterion_10_support_hit_audit():
    h = HardFunction("invertible-address", input_dim=4, codomain=(2 / 3, 1))
    task = AddressTask(5, s=(0.3, 0.4, 0.5, 0.6), beta=1, address_fn=h)
    # realizable agent whose address network guesses 2/3, off by more than delta
    wrong = make_address_agent(5, address_net=affine_network(np.zeros((1, 4)), np.array([2 / 3])))
    assert abs(2 / 3 - task.spike_location) > default_delta(5)
    audit = support_hit_audit(wrong, task)
    _check(10, "mispredicted address leaves the bit invisible: identical predictions",
           audit["beta_predictions_identical"] and not audit["moving_support_hit"],
           f"spike at {task.spike_location:.4f}, probe at 0.6667")


def test_criterion_11_transformerification():
    suite = {
        "abs": gadgets.abs_gadget(),
        "max2": gadgets.max_gadget(2),
        "max8": gadgets.max_gadget(8),
        "hat": gadgets.hat_gadget(HatSpec(0.5, 0.1)),
        "selector": gadgets.selector_gadget(),
        "bump1": gadgets.bump_gadget(BumpSpec((0.25,), 0.5, 0.25)),
        "bump2": gadgets.bump_gadget(BumpSpec((0.25, 0.75), 0.5, 0.25)),
        "mult": gadgets.mult_eps(1e-2),
    }
    worst = 0.0
    ok = True
    for i, (name, net) in enumerate(sorted(suite.items())):
        tnet = transformer.mlp_to_transformer(net)
        ok &= len(tnet.layers) == net.depth  # one head per layer, depth preserved
        xs = np.random.default_rng(i).uniform(-1, 1, (1000, net.in_dim))
        defect = transformer.conversion_defect(net, tnet, xs, temperatures=(0.1, 1.0, 10.0))
        worst = max(worst, defect)
    _check(11, "every gadget converts exactly at lambda in {0.1, 1, 10}",
           ok and worst <= 1e-12, f"max defect={worst:.1e}")
