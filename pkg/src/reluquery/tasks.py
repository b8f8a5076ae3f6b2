"""The three task families, dyadic-cube indexing, and the hard-function stand-in.

Task evaluation always uses the closed-form references, never ReLU gadgets, so
tasks double as ground-truth oracles for the network-built learners.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .gadgets import BumpSpec, bump_reference


@dataclass(frozen=True)
class CubeIndex:
    """Dyadic cube [k * 2^-n, (k+1) * 2^-n] per axis at level n."""

    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(k) for k in self.index))
        if self.level < 0:
            raise ValueError("level must be >= 0")
        top = 2**self.level
        if any(not 0 <= k < top for k in self.index):
            raise ValueError(f"index {self.index} outside {{0..{top - 1}}}^d")

    @property
    def dim(self) -> int:
        return len(self.index)


def cube_geometry(c: CubeIndex) -> tuple[np.ndarray, float]:
    """Center (k + 1/2) * 2^-n per axis and side length 2^-n."""
    side = 2.0**-c.level
    center = (np.asarray(c.index, dtype=np.float64) + 0.5) * side
    return center, side


def children(c: CubeIndex) -> list[CubeIndex]:
    """The 2^d dyadic children, ordered by sign pattern in {-1,+1}^d.

    Child centers are parent center + 2^-(n+2) * eps for eps in {-1,+1}^d.
    """
    out = []
    for eps in itertools.product((-1, 1), repeat=c.dim):
        idx = tuple(2 * k + (e + 1) // 2 for k, e in zip(c.index, eps))
        out.append(CubeIndex(c.level + 1, idx))
    return out


def child_offsets(d: int) -> np.ndarray:
    """Sign patterns {-1,+1}^d in the same order `children` uses."""
    return np.array(list(itertools.product((-1, 1), repeat=d)), dtype=np.float64)


@dataclass(frozen=True)
class CubicalPath:
    """Strictly nested dyadic cubes, one per level 1..L."""

    cubes: tuple[CubeIndex, ...]

    def __post_init__(self):
        object.__setattr__(self, "cubes", tuple(self.cubes))
        if not self.cubes:
            raise ValueError("path needs depth >= 1")
        for n, cube in enumerate(self.cubes, start=1):
            if cube.level != n:
                raise ValueError(f"cube {n - 1} has level {cube.level}, expected {n}")
        for parent, child in zip(self.cubes, self.cubes[1:]):
            if any(ck // 2 != pk for ck, pk in zip(child.index, parent.index)):
                raise ValueError(f"cube at level {child.level} is not nested in its parent")

    @property
    def depth(self) -> int:
        return len(self.cubes)

    @property
    def dim(self) -> int:
        return self.cubes[0].dim


def random_path(d: int, depth: int, rng: np.random.Generator) -> CubicalPath:
    """Nested path built from independent uniform child choices."""
    cube = CubeIndex(0, (0,) * d)
    cubes = []
    for _ in range(depth):
        kids = children(cube)
        cube = kids[int(rng.integers(len(kids)))]
        cubes.append(cube)
    return CubicalPath(tuple(cubes))


@dataclass(frozen=True)
class PathTask:
    """Sum of cubical bumps along a nested path; range within [0, depth]."""

    path: CubicalPath
    eta: float = 0.25

    def __post_init__(self):
        if not 0 < self.eta < 0.5:
            raise ValueError("eta must lie in (0, 1/2)")

    @property
    def dim(self) -> int:
        return self.path.dim

    @property
    def bump_specs(self) -> tuple[BumpSpec, ...]:
        specs = []
        for cube in self.path.cubes:
            center, side = cube_geometry(cube)
            specs.append(BumpSpec(tuple(center), side, self.eta))
        return tuple(specs)

    def __call__(self, x) -> np.ndarray:
        return eval_path_task(self, x)


def eval_path_task(t: PathTask, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != t.dim:
        raise ValueError(f"point dim {pts.shape[1]} != task dim {t.dim}")
    total = np.zeros(pts.shape[0])
    for spec in t.bump_specs:
        total += bump_reference(spec, pts)
    return total[0] if single else total


def fixed_query_points(n_budget: int) -> np.ndarray:
    """The static hat centers q_i = (i-1)/(2(N-1)), i = 1..N."""
    i = np.arange(1, n_budget + 1, dtype=np.float64)
    return (i - 1.0) / (2.0 * (n_budget - 1))


def default_delta(n_budget: int) -> float:
    """Half of the admissible bound 1/(6N), leaving slack for witness search."""
    return 1.0 / (12.0 * n_budget)


def fold_tau(s) -> np.ndarray:
    """Componentwise tent fold tau(t) = 2 min(t, 1-t) on [0,1]."""
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0) or np.any(s > 1):
        raise ValueError("fold_tau entries must lie in [0, 1]")
    return 2.0 * np.minimum(s, 1.0 - s)


@dataclass(frozen=True)
class HardFunction:
    """Pluggable stand-in for a hard-to-approximate continuous function.

    kind="seeded": multilinear interpolation of seeded pseudorandom grid
    values (resolution `resolution` per axis); continuous and deterministic.
    kind="invertible-address": affine map lo + (hi - lo) * u_1, surjective
    onto its codomain and analytically invertible in the first coordinate.
    No hardness is claimed for either mode.
    """

    kind: str
    input_dim: int
    codomain: tuple[float, float] = (0.0, 1.0)
    seed: int = 0
    resolution: int = 8

    def __post_init__(self):
        if self.kind not in ("seeded", "invertible-address"):
            raise ValueError(f"unknown hard-function kind {self.kind!r}")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.codomain[1] <= self.codomain[0]:
            raise ValueError("codomain must be a nondegenerate interval")

    def _vertex_value(self, idx: tuple[int, ...]) -> float:
        ss = np.random.SeedSequence([self.seed, *idx])
        u = ss.generate_state(1, dtype=np.uint64)[0] / float(2**64)
        lo, hi = self.codomain
        return lo + (hi - lo) * float(u)

    def __call__(self, u) -> float:
        return hard_fn_eval(self, u)


def hard_fn_eval(h: HardFunction, u) -> float:
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if u.shape != (h.input_dim,):
        raise ValueError(f"input shape {u.shape} != ({h.input_dim},)")
    lo, hi = h.codomain
    if h.kind == "invertible-address":
        return lo + (hi - lo) * float(u[0])
    # Multilinear interpolation on the seeded vertex grid.
    scaled = np.clip(u, 0.0, 1.0) * h.resolution
    base = np.minimum(scaled.astype(int), h.resolution - 1)
    frac = scaled - base
    value = 0.0
    for corner in itertools.product((0, 1), repeat=h.input_dim):
        weight = 1.0
        for f, c in zip(frac, corner):
            weight *= f if c else (1.0 - f)
        if weight:
            value += weight * h._vertex_value(tuple(int(b + c) for b, c in zip(base, corner)))
    return float(min(max(value, lo), hi))


def invert_address(h: HardFunction, y: float) -> np.ndarray:
    """Coefficient vector s with q*(s) = hard_fn(fold_tau(s)) = y.

    Uses the branch tau^{-1}(t) = t/2 in the first coordinate; all other
    coordinates are zero.
    """
    if h.kind != "invertible-address":
        raise ValueError("invert_address requires invertible-address mode")
    lo, hi = h.codomain
    if not lo <= y <= hi:
        raise ValueError(f"target {y} outside codomain [{lo}, {hi}]")
    s = np.zeros(h.input_dim)
    s[0] = (y - lo) / (hi - lo) / 2.0
    return s


def _check_hat_separation(n_budget: int, delta: float):
    if n_budget < 3:
        raise ValueError("family needs N >= 3")
    if not 0 < delta < 1.0 / (6.0 * n_budget):
        raise ValueError(f"delta must lie in (0, 1/(6N)) = (0, {1.0 / (6 * n_budget)})")


@dataclass(frozen=True)
class ValueTask:
    """Pointed-value task: the hard value hard_fn(s) sits at the readable q*."""

    n_budget: int
    s: tuple[float, ...]  # coefficients s_2..s_{N-1}
    q_star: float
    delta: float | None = None
    hard_fn: HardFunction | None = None

    def __post_init__(self):
        delta = self.delta if self.delta is not None else default_delta(self.n_budget)
        object.__setattr__(self, "delta", float(delta))
        _check_hat_separation(self.n_budget, self.delta)
        object.__setattr__(self, "s", tuple(float(v) for v in self.s))
        if len(self.s) != self.n_budget - 2:
            raise ValueError(f"need {self.n_budget - 2} coefficients, got {len(self.s)}")
        if not 2.0 / 3.0 <= self.q_star <= 1.0:
            raise ValueError("q_star must lie in [2/3, 1]")
        if any(not 0 <= v <= 1 for v in self.s):
            raise ValueError("coefficients must lie in [0, 1]")
        if self.hard_fn is None:
            object.__setattr__(
                self, "hard_fn", HardFunction("seeded", input_dim=self.n_budget - 2)
            )
        if self.hard_fn.input_dim != self.n_budget - 2:
            raise ValueError("hard_fn input_dim must equal N - 2")

    @property
    def query_points(self) -> np.ndarray:
        return fixed_query_points(self.n_budget)

    @property
    def hard_value(self) -> float:
        return hard_fn_eval(self.hard_fn, np.asarray(self.s))

    def __call__(self, x) -> np.ndarray:
        return eval_value_task(self, x)


def _hat_batch(centers, heights, delta, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 0
    xs = np.atleast_1d(x)
    vals = np.zeros_like(xs)
    for c, hgt in zip(centers, heights):
        if hgt:
            vals += hgt * np.maximum(0.0, 1.0 - np.abs(xs - c) / delta)
    return vals[0] if single else vals


def eval_value_task(t: ValueTask, x) -> np.ndarray:
    q = t.query_points
    centers = [q[0], *q[1 : t.n_budget - 1], t.q_star]
    heights = [t.q_star, *t.s, t.hard_value]
    return _hat_batch(centers, heights, t.delta, x)


@dataclass(frozen=True)
class AddressTask:
    """Address-spike task: the hidden bit beta sits at the hard location q*(s)."""

    n_budget: int
    s: tuple[float, ...]  # coefficients s_1..s_{N-1}
    beta: int
    delta: float | None = None
    address_fn: HardFunction | None = None

    def __post_init__(self):
        delta = self.delta if self.delta is not None else default_delta(self.n_budget)
        object.__setattr__(self, "delta", float(delta))
        _check_hat_separation(self.n_budget, self.delta)
        object.__setattr__(self, "s", tuple(float(v) for v in self.s))
        if len(self.s) != self.n_budget - 1:
            raise ValueError(f"need {self.n_budget - 1} coefficients, got {len(self.s)}")
        if self.beta not in (0, 1):
            raise ValueError("beta must be 0 or 1")
        if any(not 0 <= v <= 1 for v in self.s):
            raise ValueError("coefficients must lie in [0, 1]")
        if self.address_fn is None:
            object.__setattr__(
                self,
                "address_fn",
                HardFunction(
                    "invertible-address",
                    input_dim=self.n_budget - 1,
                    codomain=(2.0 / 3.0, 1.0),
                ),
            )
        if self.address_fn.input_dim != self.n_budget - 1:
            raise ValueError("address_fn input_dim must equal N - 1")
        if self.address_fn.codomain != (2.0 / 3.0, 1.0):
            raise ValueError("address_fn codomain must be [2/3, 1]")

    @property
    def query_points(self) -> np.ndarray:
        return fixed_query_points(self.n_budget)

    @property
    def spike_location(self) -> float:
        return hard_fn_eval(self.address_fn, fold_tau(np.asarray(self.s)))

    def __call__(self, x) -> np.ndarray:
        return eval_address_task(self, x)


def eval_address_task(t: AddressTask, x) -> np.ndarray:
    q = t.query_points
    centers = [*q[: t.n_budget - 1], t.spike_location]
    heights = [*t.s, float(t.beta)]
    return _hat_batch(centers, heights, t.delta, x)


# -- serializable descriptors ------------------------------------------------

def task_descriptor(task) -> dict:
    """JSON-serializable descriptor from which the task can be rebuilt."""
    if isinstance(task, PathTask):
        return {
            "family": "path",
            "eta": task.eta,
            "cubes": [list(c.index) for c in task.path.cubes],
        }
    if isinstance(task, ValueTask):
        return {
            "family": "value",
            "n_budget": task.n_budget,
            "s": list(task.s),
            "q_star": task.q_star,
            "delta": task.delta,
            "hard_fn": _hard_fn_descriptor(task.hard_fn),
        }
    if isinstance(task, AddressTask):
        return {
            "family": "address",
            "n_budget": task.n_budget,
            "s": list(task.s),
            "beta": task.beta,
            "delta": task.delta,
            "hard_fn": _hard_fn_descriptor(task.address_fn),
        }
    raise TypeError(f"not a task: {task!r}")


def _hard_fn_descriptor(h: HardFunction) -> dict:
    return {
        "kind": h.kind,
        "input_dim": h.input_dim,
        "codomain": list(h.codomain),
        "seed": h.seed,
        "resolution": h.resolution,
    }


def task_from_descriptor(doc: dict):
    family = doc.get("family")
    if family == "path":
        cubes = tuple(
            CubeIndex(n + 1, tuple(idx)) for n, idx in enumerate(doc["cubes"])
        )
        return PathTask(CubicalPath(cubes), eta=doc["eta"])
    if family == "value":
        return ValueTask(
            n_budget=doc["n_budget"],
            s=tuple(doc["s"]),
            q_star=doc["q_star"],
            delta=doc["delta"],
            hard_fn=_hard_fn_from(doc["hard_fn"]),
        )
    if family == "address":
        return AddressTask(
            n_budget=doc["n_budget"],
            s=tuple(doc["s"]),
            beta=doc["beta"],
            delta=doc["delta"],
            address_fn=_hard_fn_from(doc["hard_fn"]),
        )
    raise ValueError(f"unknown task family {family!r}")


def _hard_fn_from(doc: dict) -> HardFunction:
    return HardFunction(
        kind=doc["kind"],
        input_dim=doc["input_dim"],
        codomain=tuple(doc["codomain"]),
        seed=doc["seed"],
        resolution=doc["resolution"],
    )
