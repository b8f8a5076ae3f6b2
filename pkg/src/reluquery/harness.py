"""Experiment drivers: worst-case sweeps, adversarial witnesses, audits.

The universal lower bounds quantifying over all bounded-size ReLU networks are
NOT claimed empirically anywhere here; the harness verifies only their
constructive skeleton (indistinguishable contexts, affine context maps,
support hitting, fold collisions) and says so in its reports.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .learners import (
    AgenticLearner,
    Context,
    InContextLearner,
    run_agentic,
    run_in_context,
    task_dim,
    task_value,
    max_network_size,
)
from .tasks import (
    AddressTask,
    CubeIndex,
    CubicalPath,
    HardFunction,
    PathTask,
    ValueTask,
    cube_geometry,
    children,
    default_delta,
    fixed_query_points,
    invert_address,
    random_path,
    task_descriptor,
    task_from_descriptor,
)

SCHEMA_VERSION = 1

SCOPE_NOTE = (
    "worst-case errors are estimated over sampled tasks and finite grids; "
    "no claim is made about lower bounds quantified over all bounded-size networks"
)


@dataclass(frozen=True)
class WitnessPair:
    """Two tasks with identical contexts on shared queries but a stated gap."""

    task_a: dict
    task_b: dict
    shared_queries: tuple
    shared_context: Context
    witness_point: tuple
    separation: float

    def to_json_dict(self) -> dict:
        return {
            "task_a": self.task_a,
            "task_b": self.task_b,
            "shared_queries": [[float(v) for v in q] for q in self.shared_queries],
            "context_responses": self.shared_context.responses.tolist(),
            "witness_point": [float(v) for v in self.witness_point],
            "separation": float(self.separation),
        }


def verify_witness(pair: WitnessPair, tol: float = 1e-12) -> dict:
    """Independent re-verification from the serialized task descriptors."""
    ta = task_from_descriptor(pair.task_a)
    tb = task_from_descriptor(pair.task_b)
    qs = [np.asarray(q, dtype=np.float64) for q in pair.shared_queries]
    resp_a = np.array([task_value(ta, q) for q in qs])
    resp_b = np.array([task_value(tb, q) for q in qs])
    context_gap = float(np.max(np.abs(resp_a - resp_b))) if qs else 0.0
    z = np.asarray(pair.witness_point, dtype=np.float64)
    sep = abs(task_value(ta, z) - task_value(tb, z))
    return {
        "context_gap": context_gap,
        "separation": sep,
        "ok": context_gap <= tol and abs(sep - pair.separation) <= tol,
    }


@dataclass
class ExperimentReport:
    """Replayable record of one experiment; payload is timing-free."""

    experiment: str
    parameters: dict
    seed: int
    per_task_errors: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)
    n_queries: int | None = None
    max_weights: int | None = None
    checks: dict = field(default_factory=dict)
    wall_time_ms: float = 0.0

    @property
    def worst_error(self) -> float | None:
        return max(self.per_task_errors) if self.per_task_errors else None

    def payload(self) -> dict:
        """Replay-stable content: everything except wall time."""
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "parameters": self.parameters,
            "seed": self.seed,
            "scope_note": SCOPE_NOTE,
            "per_task_errors": self.per_task_errors,
            "worst_error": self.worst_error,
            "witnesses": self.witnesses,
            "n_queries": self.n_queries,
            "max_weights": self.max_weights,
            "checks": self.checks,
        }

    def to_json(self) -> str:
        doc = self.payload()
        doc["wall_time_ms"] = round(self.wall_time_ms, 3)
        return json.dumps(doc, indent=2)

    def csv_row(self) -> dict:
        return {
            "experiment": self.experiment,
            "parameters": json.dumps(self.parameters, sort_keys=True),
            "seed": self.seed,
            "worst_error": self.worst_error,
            "n_queries": self.n_queries,
            "max_weights": self.max_weights,
            "wall_time_ms": round(self.wall_time_ms, 3),
        }


CSV_COLUMNS = ["experiment", "parameters", "seed", "worst_error", "n_queries", "max_weights", "wall_time_ms"]


def write_csv(path, reports):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for rep in reports:
            writer.writerow(rep.csv_row())


# -- evaluation grids --------------------------------------------------------

def task_axis_breakpoints(task) -> list[np.ndarray]:
    """Per-axis kink coordinates of the task's piecewise-linear structure."""
    if isinstance(task, PathTask):
        axes = [set() for _ in range(task.dim)]
        for spec in task.bump_specs:
            half = spec.side_length / 2
            eta_half = spec.eta * spec.side_length
            for i, c in enumerate(spec.center):
                axes[i].update((c - half, c - eta_half, c, c + eta_half, c + half))
        return [np.array(sorted(a)) for a in axes]
    if isinstance(task, ValueTask):
        centers = list(task.query_points[: task.n_budget - 1]) + [task.q_star]
        delta = task.delta
    elif isinstance(task, AddressTask):
        centers = list(task.query_points[: task.n_budget - 1]) + [task.spike_location]
        delta = task.delta
    else:
        raise TypeError(f"not a task: {task!r}")
    pts = set()
    for c in centers:
        pts.update((c - delta, c, c + delta))
    return [np.array(sorted(p for p in pts if 0 <= p <= 1))]


def evaluation_grid(task, resolution: int) -> np.ndarray:
    """Uniform grid of about `resolution` points, augmented with all task
    breakpoints per axis (piecewise-linear extrema sit on breakpoints)."""
    d = task_dim(task)
    per_axis = max(2, round(resolution ** (1.0 / d)))
    axes = []
    for brk in task_axis_breakpoints(task):
        coords = np.union1d(np.linspace(0.0, 1.0, per_axis), np.clip(brk, 0.0, 1.0))
        axes.append(coords)
    if d == 1:
        return axes[0][:, None]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def task_values_on(task, xs: np.ndarray) -> np.ndarray:
    if isinstance(task, PathTask):
        return task(xs)
    return task(xs[:, 0])


# -- task samplers -----------------------------------------------------------

def path_task_sampler(d: int, depth: int, eta: float = 0.25):
    def sample(rng: np.random.Generator) -> PathTask:
        return PathTask(random_path(d, depth, rng), eta=eta)

    return sample


def value_task_sampler(n_budget: int, delta: float | None = None, hard_fn: HardFunction | None = None):
    def sample(rng: np.random.Generator) -> ValueTask:
        return ValueTask(
            n_budget=n_budget,
            s=tuple(rng.uniform(0, 1, n_budget - 2)),
            q_star=float(rng.uniform(2.0 / 3.0, 1.0)),
            delta=delta,
            hard_fn=hard_fn,
        )

    return sample


def address_task_sampler(n_budget: int, delta: float | None = None, address_fn: HardFunction | None = None):
    def sample(rng: np.random.Generator) -> AddressTask:
        return AddressTask(
            n_budget=n_budget,
            s=tuple(rng.uniform(0, 1, n_budget - 1)),
            beta=int(rng.integers(2)),
            delta=delta,
            address_fn=address_fn,
        )

    return sample


def sweep_worst_case(
    learner,
    task_sampler,
    grid_resolution: int,
    n_tasks: int,
    seed: int = 0,
    experiment: str = "sweep",
    parameters: dict | None = None,
) -> ExperimentReport:
    """Estimate sup-norm worst-case error over sampled tasks.

    Deterministic given the seed; per-task errors are reported in sampling
    order so parallel evaluation cannot change the payload.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(n_tasks):
        task = task_sampler(rng)
        if isinstance(learner, InContextLearner):
            _, predict = run_in_context(learner, task)
        else:
            _, predict = run_agentic(learner, task)
        grid = evaluation_grid(task, grid_resolution)
        errors.append(float(np.max(np.abs(predict(grid) - task_values_on(task, grid)))))
    return ExperimentReport(
        experiment=experiment,
        parameters=dict(parameters or {}, grid_resolution=grid_resolution, n_tasks=n_tasks),
        seed=seed,
        per_task_errors=errors,
        n_queries=learner.n_queries,
        max_weights=max_network_size(learner),
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
    )


# -- cubical-path witnesses --------------------------------------------------

def cube_containing(x: np.ndarray, level: int) -> CubeIndex:
    """Half-open cell convention [k*2^-n, (k+1)*2^-n); last cell closed."""
    top = 2**level
    idx = np.minimum(np.floor(np.asarray(x) * top).astype(int), top - 1)
    return CubeIndex(level, tuple(idx))


def find_uncovered_cube(queries, d: int, depth: int) -> CubeIndex | None:
    """First level-(depth-1) cube (lexicographic) containing no query point."""
    level = depth - 1
    covered = {cube_containing(np.atleast_1d(q), level).index for q in queries}
    for idx in itertools.product(range(2**level), repeat=d):
        if idx not in covered:
            return CubeIndex(level, idx)
    return None


def path_witness(queries, d: int, depth: int, eta: float = 0.25) -> WitnessPair:
    """Two path tasks indistinguishable on `queries` yet 1 apart at a point.

    Requires fewer queries than level-(depth-1) cubes; the paths share all
    cubes down to an uncovered level-(depth-1) cube and then split into two
    of its children.
    """
    queries = [np.atleast_1d(np.asarray(q, dtype=np.float64)) for q in queries]
    if len(queries) >= 2 ** (d * (depth - 1)):
        raise ValueError(
            f"need fewer than 2^(d(L-1)) = {2 ** (d * (depth - 1))} queries, got {len(queries)}"
        )
    hole = find_uncovered_cube(queries, d, depth)
    if hole is None:
        raise RuntimeError("no uncovered cube despite the counting guarantee")
    trunk = [
        CubeIndex(level, tuple(k >> (hole.level - level) for k in hole.index))
        for level in range(1, hole.level + 1)
    ]
    kid_a, kid_b = children(hole)[:2]
    task_a = PathTask(CubicalPath(tuple(trunk) + (kid_a,)), eta=eta)
    task_b = PathTask(CubicalPath(tuple(trunk) + (kid_b,)), eta=eta)

    ctx = Context()
    for q in queries:
        ya, yb = task_value(task_a, q), task_value(task_b, q)
        if ya != yb:
            raise RuntimeError(f"contexts differ at {q}: {ya} vs {yb}")
        ctx = ctx.appended(q, ya)
    z, _ = cube_geometry(kid_a)
    sep = abs(task_value(task_a, z) - task_value(task_b, z))
    return WitnessPair(
        task_a=task_descriptor(task_a),
        task_b=task_descriptor(task_b),
        shared_queries=tuple(tuple(q) for q in queries),
        shared_context=ctx,
        witness_point=tuple(z),
        separation=sep,
    )


# -- address-spike witnesses -------------------------------------------------

def _free_point(queries: np.ndarray, delta: float) -> float:
    """Smallest y in [2/3, 1] clear of every query's delta-neighborhood."""
    lo, hi = 2.0 / 3.0, 1.0
    segments = [(lo, hi)]
    for xi in np.sort(np.asarray(queries, dtype=np.float64)):
        nxt = []
        for a, b in segments:
            if xi + delta <= a or xi - delta >= b:
                nxt.append((a, b))
                continue
            if xi - delta > a:
                nxt.append((a, xi - delta))
            if xi + delta < b:
                nxt.append((xi + delta, b))
        segments = nxt
    if not segments:
        raise RuntimeError("no admissible point; delta budget violated")
    a, b = segments[0]
    y = a
    if np.min(np.abs(np.asarray(queries) - y)) <= delta:
        y = a + min((b - a) / 2, 1e-9)  # nudge off the closed boundary
    return float(y)


def address_witness(queries, n_budget: int, delta: float | None = None) -> WitnessPair:
    """Flip-the-bit witness pair for a fixed query set.

    Finds the smallest admissible spike location in [2/3, 1], inverts the
    address map to place the spike there, and returns the beta = 0 / beta = 1
    pair with identical contexts and separation 1.
    """
    queries = np.asarray([float(np.atleast_1d(q)[0]) for q in queries])
    if queries.shape[0] != n_budget:
        raise ValueError(f"expected {n_budget} queries, got {queries.shape[0]}")
    if delta is None:
        delta = default_delta(n_budget)
    if not 0 < delta < 1.0 / (6.0 * n_budget):
        raise ValueError(f"delta must lie in (0, 1/(6N)), got {delta}")
    address_fn = HardFunction(
        "invertible-address", input_dim=n_budget - 1, codomain=(2.0 / 3.0, 1.0)
    )
    y = _free_point(queries, delta)
    s = tuple(invert_address(address_fn, y))
    task_a = AddressTask(n_budget, s=s, beta=0, delta=delta, address_fn=address_fn)
    task_b = AddressTask(n_budget, s=s, beta=1, delta=delta, address_fn=address_fn)

    ctx = Context()
    worst_gap = 0.0
    for q in queries:
        ya, yb = task_a(q), task_b(q)
        worst_gap = max(worst_gap, abs(float(ya) - float(yb)))
        ctx = ctx.appended(np.array([q]), float(ya))
    if worst_gap > 1e-12:
        raise RuntimeError(f"contexts differ by {worst_gap}")
    sep = abs(float(task_a(y)) - float(task_b(y)))
    return WitnessPair(
        task_a=task_descriptor(task_a),
        task_b=task_descriptor(task_b),
        shared_queries=tuple((q,) for q in queries),
        shared_context=ctx,
        witness_point=(y,),
        separation=sep,
    )


# -- affine-context check ----------------------------------------------------

def affine_context_check(
    n_budget: int,
    delta: float | None = None,
    trials: int = 1000,
    seed: int = 0,
    hit_moving_support: bool = False,
) -> dict:
    """Affinity of (q*, s) -> context for static queries missing the moving
    hat range; with `hit_moving_support` a query is planted inside [2/3, 1]
    as a negative control (the hard value leaks into the context)."""
    if delta is None:
        delta = default_delta(n_budget)
    hard_fn = HardFunction("seeded", input_dim=n_budget - 2)
    xi = list(fixed_query_points(n_budget))
    if hit_moving_support:
        xi[-1] = 0.83  # inside the moving range [2/3, 1]

    def context_of(u: np.ndarray) -> np.ndarray:
        q_star, s = float(u[0]), tuple(u[1:])
        task = ValueTask(n_budget, s=s, q_star=q_star, delta=delta, hard_fn=hard_fn)
        return task(np.asarray(xi))

    rng = np.random.default_rng(seed)
    max_defect = 0.0
    for _ in range(trials):
        u = np.concatenate([[rng.uniform(2 / 3, 1)], rng.uniform(0, 1, n_budget - 2)])
        v = np.concatenate([[rng.uniform(2 / 3, 1)], rng.uniform(0, 1, n_budget - 2)])
        lam = float(rng.uniform())
        mix = context_of(lam * u + (1 - lam) * v)
        defect = np.max(np.abs(mix - lam * context_of(u) - (1 - lam) * context_of(v)))
        max_defect = max(max_defect, float(defect))
    return {
        "n_budget": n_budget,
        "delta": delta,
        "trials": trials,
        "negative_control": hit_moving_support,
        "max_defect": max_defect,
    }


# -- support-hit audit -------------------------------------------------------

def support_hit_audit(agent: AgenticLearner, task: AddressTask) -> dict:
    """Which hat supports the transcript hits, plus bit recoverability.

    Runs the agent on the task with both values of the hidden bit; if the
    audited query misses the moving support, the two predictions must be
    identical and the bit is unrecoverable.
    """
    delta = task.delta
    q = task.query_points
    ctx, _ = run_agentic(agent, task)
    pts = ctx.queries[:, 0]
    static_hits = [bool(np.any(np.abs(pts - q[i]) <= delta)) for i in range(task.n_budget - 1)]
    moving_hit = bool(np.any(np.abs(pts - task.spike_location) <= delta))

    grid = evaluation_grid(task, 2001)
    preds = {}
    for beta in (0, 1):
        variant = AddressTask(
            task.n_budget, s=task.s, beta=beta, delta=task.delta, address_fn=task.address_fn
        )
        _, predict = run_agentic(agent, variant)
        preds[beta] = predict(grid)
    identical = bool(np.array_equal(preds[0], preds[1]))
    return {
        "static_supports_hit": static_hits,
        "moving_support_hit": moving_hit,
        "spike_location": task.spike_location,
        "beta_predictions_identical": identical,
    }
