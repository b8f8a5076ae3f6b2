"""In-context and agentic learner protocols, and the concrete agents.

A learner is immutable; a run produces an ordered transcript (the context) and
a vectorized predictor closure. Realizable learners carry the ReLU networks
that implement their query maps and predictor, and their runs actually route
queries and predictions through network evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import assemble
from .gadgets import BumpSpec, bump_reference
from .mlp import MlpNetwork, count_weights, evaluate, evaluate_batch, evaluate_scalar
from .tasks import (
    AddressTask,
    PathTask,
    ValueTask,
    child_offsets,
    fixed_query_points,
    fold_tau,
    hard_fn_eval,
)


class ProtocolError(RuntimeError):
    """Raised when a run violates the protocol (budget, domain, residuals)."""


@dataclass(frozen=True)
class Context:
    """Ordered transcript of (query point, response) pairs."""

    pairs: tuple[tuple[tuple[float, ...], float], ...] = ()

    def __len__(self):
        return len(self.pairs)

    @property
    def queries(self) -> np.ndarray:
        return np.array([p for p, _ in self.pairs], dtype=np.float64)

    @property
    def responses(self) -> np.ndarray:
        return np.array([y for _, y in self.pairs], dtype=np.float64)

    def flatten(self) -> np.ndarray:
        """Interleaved (x_1, y_1, x_2, y_2, ...) vector."""
        out = []
        for p, y in self.pairs:
            out.extend(p)
            out.append(y)
        return np.array(out, dtype=np.float64)

    def appended(self, point: np.ndarray, response: float) -> "Context":
        return Context(self.pairs + ((tuple(float(v) for v in point), float(response)),))


Predictor = Callable[[Context, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InContextLearner:
    """Fixed query points chosen before seeing the task, plus a predictor."""

    queries: np.ndarray  # (N, d)
    predictor: Predictor
    network: MlpNetwork | None = None  # set iff realizable

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.queries, dtype=np.float64))
        q.setflags(write=False)
        object.__setattr__(self, "queries", q)

    @property
    def n_queries(self) -> int:
        return self.queries.shape[0]

    @property
    def dim(self) -> int:
        return self.queries.shape[1]

    @property
    def realizable(self) -> bool:
        return self.network is not None


@dataclass(frozen=True)
class AgenticLearner:
    """Initial query plus transcript-driven query maps and a final predictor."""

    dim: int
    initial_query: np.ndarray
    query_maps: tuple[Callable[[Context], np.ndarray], ...]
    predictor: Predictor
    networks: dict = field(default_factory=dict)  # non-empty iff realizable

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.initial_query, dtype=np.float64))
        q.setflags(write=False)
        object.__setattr__(self, "initial_query", q)
        object.__setattr__(self, "query_maps", tuple(self.query_maps))

    @property
    def n_queries(self) -> int:
        return 1 + len(self.query_maps)

    @property
    def realizable(self) -> bool:
        return bool(self.networks)


def max_network_size(learner) -> int | None:
    """Largest component network size, or None for general learners."""
    if isinstance(learner, InContextLearner):
        return count_weights(learner.network) if learner.realizable else None
    if not learner.realizable:
        return None
    sizes = []
    for value in learner.networks.values():
        if isinstance(value, MlpNetwork):
            sizes.append(count_weights(value))
        else:
            sizes.extend(count_weights(n) for n in value)
    return max(sizes)


def task_dim(task) -> int:
    return task.dim if isinstance(task, PathTask) else 1


def task_value(task, point: np.ndarray) -> float:
    """Evaluate a task at a single point given as a (d,) vector."""
    if isinstance(task, PathTask):
        return float(task(point))
    return float(task(float(point[0])))


def _check_point(point: np.ndarray, dim: int):
    if point.shape != (dim,):
        raise ProtocolError(f"query has shape {point.shape}, expected ({dim},)")
    if np.any(point < -1e-12) or np.any(point > 1 + 1e-12):
        raise ProtocolError(f"query {point} outside the unit domain")


def run_in_context(learner: InContextLearner, task):
    """Gather the fixed context, return it with the prediction closure."""
    if learner.dim != task_dim(task):
        raise ProtocolError(f"learner dim {learner.dim} != task dim {task_dim(task)}")
    ctx = Context()
    for point in learner.queries:
        _check_point(point, learner.dim)
        ctx = ctx.appended(point, task_value(task, point))
    return ctx, lambda xs, _ctx=ctx: learner.predictor(_ctx, np.atleast_2d(xs))


def run_agentic(learner: AgenticLearner, task):
    """Drive the adaptive query recursion, return transcript and closure."""
    if learner.dim != task_dim(task):
        raise ProtocolError(f"learner dim {learner.dim} != task dim {task_dim(task)}")
    ctx = Context()
    point = learner.initial_query
    _check_point(point, learner.dim)
    ctx = ctx.appended(point, task_value(task, point))
    for qmap in learner.query_maps:
        point = np.atleast_1d(np.asarray(qmap(ctx), dtype=np.float64))
        _check_point(point, learner.dim)
        ctx = ctx.appended(point, task_value(task, point))
    return ctx, lambda xs, _ctx=ctx: learner.predictor(_ctx, np.atleast_2d(xs))


def embed_ic_as_agent(learner: InContextLearner) -> AgenticLearner:
    """Constant-query-map embedding: adaptivity ignored, predictions unchanged."""
    maps = tuple(
        (lambda _ctx, _p=np.array(p): _p) for p in learner.queries[1:]
    )
    networks = {}
    if learner.realizable:
        networks = {"predictor": learner.network}
    return AgenticLearner(
        dim=learner.dim,
        initial_query=learner.queries[0],
        query_maps=maps,
        predictor=learner.predictor,
        networks=networks,
    )


def make_grid_ic_learner(d: int, n_queries: int) -> InContextLearner:
    """Shipped baseline: uniform grid queries with interpolating predictor.

    1-d: piecewise-linear interpolation of the context; d > 1: nearest
    observed response.
    """
    if d == 1:
        queries = np.linspace(0.0, 1.0, n_queries)[:, None]
    else:
        per_axis = max(1, round(n_queries ** (1.0 / d)))
        axes = [np.linspace(0.0, 1.0, per_axis + 2)[1:-1] for _ in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        queries = np.stack([m.ravel() for m in mesh], axis=1)[:n_queries]
        if queries.shape[0] < n_queries:
            rng = np.random.default_rng(0)
            extra = rng.uniform(0, 1, size=(n_queries - queries.shape[0], d))
            queries = np.vstack([queries, extra])

    def predictor(ctx: Context, xs: np.ndarray) -> np.ndarray:
        pts, ys = ctx.queries, ctx.responses
        if d == 1:
            order = np.argsort(pts[:, 0])
            return np.interp(xs[:, 0], pts[order, 0], ys[order])
        dist = np.linalg.norm(xs[:, None, :] - pts[None, :, :], axis=2)
        return ys[np.argmin(dist, axis=1)]

    return InContextLearner(queries=queries, predictor=predictor)


def make_network_ic_learner(queries: np.ndarray, net: MlpNetwork) -> InContextLearner:
    """Realizable in-context learner whose predictor is a stored network.

    The network reads the flattened context followed by the evaluation point.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    n, d = queries.shape
    if net.in_dim != n * (d + 1) + d:
        raise ValueError(f"network input dim {net.in_dim} != {n * (d + 1) + d}")

    def predictor(ctx: Context, xs: np.ndarray) -> np.ndarray:
        flat = ctx.flatten()
        batch = np.hstack([np.tile(flat, (xs.shape[0], 1)), xs])
        return evaluate_scalar(net, batch)

    return InContextLearner(queries=queries, predictor=predictor, network=net)


# -- cubical-path agent ------------------------------------------------------

def _chi(t: np.ndarray) -> np.ndarray:
    return np.clip(t, 0.0, 1.0)


def recover_path_centers(d: int, eta: float, ctx: Context, levels: int) -> np.ndarray:
    """Re-derive path cube centers from a transcript of K queries per level.

    Asserts the proof's residual pattern: per level, exactly one residual in
    (1/2, 1] and all others in [0, 1/2).
    """
    K = 2**d
    queries, responses = ctx.queries, ctx.responses
    if len(ctx) < K * levels:
        raise ProtocolError(f"transcript too short: {len(ctx)} < {K * levels}")
    centers = np.empty((levels, d))
    for n in range(1, levels + 1):
        lo = K * (n - 1)
        q_block = queries[lo : lo + K]
        rho = responses[lo : lo + K].copy()
        for l_prev in range(1, n):
            spec = BumpSpec(tuple(centers[l_prev - 1]), 2.0**-l_prev, eta)
            rho -= bump_reference(spec, q_block)
        hits = rho > 0.5
        if hits.sum() != 1 or np.any(rho[hits] > 1 + 1e-9) or np.any(rho[~hits] < -1e-9):
            raise ProtocolError(f"residuals at level {n} are not one-hot: {rho}")
        prev = centers[n - 2] if n > 1 else np.full(d, 0.5)
        centers[n - 1] = prev + 2.0 ** -(n + 1) * (_chi(rho) @ child_offsets(d))
    return centers


def make_path_agent(d: int, depth: int, eta: float = 0.25, realizable: bool = False) -> AgenticLearner:
    """Agent recovering a cubical path by querying all child centers per level.

    Uses exactly 2^d * depth queries and reconstructs every matching path task
    exactly. In realizable mode the query maps and the predictor are networks
    assembled from the gadget catalog.
    """
    K = 2**d
    offsets = child_offsets(d)
    initial = np.full(d, 0.5) + 0.25 * offsets[0]

    def general_qmap(t: int):
        level, child = t // K + 1, t % K

        def qmap(ctx: Context) -> np.ndarray:
            if level == 1:
                return np.full(d, 0.5) + 0.25 * offsets[child]
            centers = recover_path_centers(d, eta, ctx, level - 1)
            return centers[-1] + 2.0 ** -(level + 1) * offsets[child]

        return qmap

    def general_predictor(ctx: Context, xs: np.ndarray) -> np.ndarray:
        centers = recover_path_centers(d, eta, ctx, depth)
        total = np.zeros(xs.shape[0])
        for n in range(1, depth + 1):
            total += bump_reference(BumpSpec(tuple(centers[n - 1]), 2.0**-n, eta), xs)
        return total

    if not realizable:
        return AgenticLearner(
            dim=d,
            initial_query=initial,
            query_maps=tuple(general_qmap(t) for t in range(1, K * depth)),
            predictor=general_predictor,
        )

    qnets = tuple(
        assemble.path_query_map_network(d, t // K + 1, t % K, t, eta)
        for t in range(1, K * depth)
    )
    centers_net = assemble.center_chain(d, depth, eta, K * depth)
    head_net = assemble.path_predictor_head(d, depth, eta)
    predictor_net = assemble.path_predictor_network(d, depth, eta)

    def net_qmap(net: MlpNetwork):
        return lambda ctx: evaluate(net, ctx.flatten())

    def net_predictor(ctx: Context, xs: np.ndarray) -> np.ndarray:
        # Head/chain split of predictor_net: the transcript half is constant
        # across evaluation points, so the center chain runs once.
        centers = evaluate(centers_net, ctx.flatten())
        batch = np.hstack([xs, np.tile(centers, (xs.shape[0], 1))])
        return evaluate_scalar(head_net, batch)

    return AgenticLearner(
        dim=d,
        initial_query=initial,
        query_maps=tuple(net_qmap(n) for n in qnets),
        predictor=net_predictor,
        networks={
            "query_maps": qnets,
            "predictor": predictor_net,
            "predictor_centers": centers_net,
            "predictor_head": head_net,
        },
    )


# -- pointed-value agent -----------------------------------------------------

def make_value_agent(
    n_budget: int,
    eps: float = 0.01,
    realizable: bool = False,
    exact_product: bool = False,
) -> AgenticLearner:
    """Agent for the pointed-value family: N-1 fixed queries, then one
    adaptive query at the revealed location y_1 = q*.

    The predictor combines observed coefficients with the hat basis through
    the approximate multiplier (worst-case error N * eps), or through exact
    products when `exact_product` is set (reference variant, exact
    reconstruction).
    """
    if n_budget < 3:
        raise ValueError("value agent needs N >= 3")
    from .tasks import default_delta

    q = fixed_query_points(n_budget)
    delta = default_delta(n_budget)
    mult_net = None if exact_product else assemble.mult_eps(eps)

    def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if mult_net is None:
            return a * b
        return evaluate_scalar(mult_net, np.stack([a, b], axis=1))

    def predictor(ctx: Context, xs: np.ndarray) -> np.ndarray:
        ys = ctx.responses
        x = xs[:, 0]
        total = np.zeros_like(x)
        centers = list(q[: n_budget - 1]) + [ys[0]]
        for i, c in enumerate(centers):
            hat = np.maximum(0.0, 1.0 - np.abs(x - c) / delta)
            total += multiply(np.full_like(x, ys[i]), hat)
        return total

    maps = [lambda ctx, _p=np.array([p]): _p for p in q[1 : n_budget - 1]]
    maps.append(lambda ctx: np.array([ctx.responses[0]]))

    networks = {}
    if realizable:
        pred_net = assemble.value_predictor_network(n_budget, eps, delta)
        networks = {"predictor": pred_net}

        def predictor(ctx: Context, xs: np.ndarray) -> np.ndarray:  # noqa: F811
            flat = ctx.flatten()
            batch = np.hstack([np.tile(flat, (xs.shape[0], 1)), xs])
            return evaluate_scalar(pred_net, batch)

    return AgenticLearner(
        dim=1,
        initial_query=np.array([q[0]]),
        query_maps=tuple(maps),
        predictor=predictor,
        networks=networks,
    )


# -- address-spike agent -----------------------------------------------------

def make_address_agent(
    n_budget: int,
    address_fn=None,
    address_net: MlpNetwork | None = None,
) -> AgenticLearner:
    """Agent for the address-spike family.

    General mode (`address_fn` given): computes the folded coefficients,
    evaluates the family's address function, queries the spike, and
    reconstructs exactly. Realizable mode (`address_net` given): the adaptive
    query location is the network's output on the observed coefficients; a
    mismatched network misses the spike and cannot observe the hidden bit.
    """
    if n_budget < 3:
        raise ValueError("address agent needs N >= 3")
    if (address_fn is None) == (address_net is None):
        raise ValueError("give exactly one of address_fn or address_net")
    from .tasks import default_delta

    q = fixed_query_points(n_budget)
    delta = default_delta(n_budget)

    if address_net is not None:
        query_net = assemble.address_query_network(address_net, n_budget)

        def final_map(ctx: Context) -> np.ndarray:
            return np.array([evaluate(query_net, ctx.flatten())[0]])

        networks = {"final_query_map": query_net, "address_net": address_net}
    else:

        def final_map(ctx: Context) -> np.ndarray:
            s_hat = fold_tau(ctx.responses)
            return np.array([hard_fn_eval(address_fn, s_hat)])

        networks = {}

    def predictor(ctx: Context, xs: np.ndarray) -> np.ndarray:
        x = xs[:, 0]
        ys = ctx.responses
        spike_loc = ctx.queries[-1, 0]
        total = np.zeros_like(x)
        for i in range(n_budget - 1):
            total += ys[i] * np.maximum(0.0, 1.0 - np.abs(x - q[i]) / delta)
        total += ys[-1] * np.maximum(0.0, 1.0 - np.abs(x - spike_loc) / delta)
        return total

    maps = [lambda ctx, _p=np.array([p]): _p for p in q[1 : n_budget - 1]]
    maps.append(final_map)
    return AgenticLearner(
        dim=1,
        initial_query=np.array([q[0]]),
        query_maps=tuple(maps),
        predictor=predictor,
        networks=networks,
    )
