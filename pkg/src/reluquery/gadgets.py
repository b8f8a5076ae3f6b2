"""Closed-form ReLU constructions: abs, max, hat, cubical bump, clamp, multiplier.

Every gadget except the approximate multiplier is exact: its network evaluates
the closed-form reference up to floating-point rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mlp import (
    AffineLayer,
    MlpNetwork,
    affine_network,
    compose,
    identity_network,
    parallel,
)


@dataclass(frozen=True)
class HatSpec:
    """Tent function h_a(x) = (1 - |x - a|/delta)_+."""

    center: float
    half_width: float

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("hat half_width must be positive")

    def reference(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.maximum(0.0, 1.0 - np.abs(x - self.center) / self.half_width)


@dataclass(frozen=True)
class BumpSpec:
    """Cubical plateau bump on the dyadic cube with the given center and side.

    Equals 1 on the central sub-cube of relative half-width eta and 0 outside
    the cube.
    """

    center: tuple[float, ...]
    side_length: float
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not 0 < self.eta < 0.5:
            raise ValueError("eta must lie in (0, 1/2)")
        n = math.log2(1.0 / self.side_length)
        if self.side_length <= 0 or abs(n - round(n)) > 1e-12 or round(n) < 0:
            raise ValueError("side_length must be 2**-n for integer n >= 0")
        half = self.side_length / 2
        for c in self.center:
            if c - half < -1e-12 or c + half > 1 + 1e-12:
                raise ValueError("cube must stay inside the unit cube")

    @property
    def dim(self) -> int:
        return len(self.center)


def abs_gadget() -> MlpNetwork:
    """|u| = ReLU(u) + ReLU(-u)."""
    return MlpNetwork(
        (
            affine_network([[1.0], [-1.0]]).layers[0],
            affine_network([[1.0, 1.0]]).layers[0],
        )
    )


def _pairwise_max() -> MlpNetwork:
    # max(a, b) = ReLU(a - b) + b, with b carried through sign-split.
    first = affine_network([[1.0, -1.0], [0.0, 1.0], [0.0, -1.0]]).layers[0]
    second = affine_network([[1.0, 1.0, -1.0]]).layers[0]
    return MlpNetwork((first, second))


def max_gadget(d: int) -> MlpNetwork:
    """Exact maximum of d reals via a balanced tree of pairwise maxima."""
    if d < 1:
        raise ValueError("max_gadget needs d >= 1")
    net = identity_network(d)
    k = d
    while k > 1:
        blocks = [_pairwise_max() for _ in range(k // 2)]
        if k % 2:
            blocks.append(identity_network(1))
        net = compose(parallel(blocks, mode="disjoint"), net)
        k = (k + 1) // 2
    return net


def hat_gadget(spec: HatSpec) -> MlpNetwork:
    """Exact ReLU network for the tent h_a."""
    a, delta = spec.center, spec.half_width
    split = affine_network([[1.0], [-1.0]], [-a, a]).layers[0]
    tent = affine_network([[-1.0 / delta, -1.0 / delta]], [1.0]).layers[0]
    out = affine_network([[1.0]]).layers[0]
    return MlpNetwork((split, tent, out))


def selector_gadget() -> MlpNetwork:
    """chi(t) = ReLU(t) - ReLU(t - 1): clamps to [0,1], identity on [0,1]."""
    first = affine_network([[1.0], [1.0]], [0.0, -1.0]).layers[0]
    second = affine_network([[1.0, -1.0]]).layers[0]
    return MlpNetwork((first, second))


def bump_reference(spec: BumpSpec, x) -> np.ndarray:
    """Closed-form bump value; the oracle the bump network is tested against.

    Accepts a single point (d,) or a batch (n, d).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != spec.dim:
        raise ValueError(f"point dim {pts.shape[1]} != bump dim {spec.dim}")
    c = np.asarray(spec.center)
    slack = np.abs(pts - c) - spec.eta * spec.side_length
    dist = np.max(np.maximum(slack, 0.0), axis=1)
    val = np.maximum(0.0, 1.0 - dist / ((0.5 - spec.eta) * spec.side_length))
    return val[0] if single else val


def _bump_tail(spec_side: float, eta: float) -> MlpNetwork:
    # M' -> chi(1 - M'/((1/2 - eta) * side)); chi caps the plateau at 1.
    scale = (0.5 - eta) * spec_side
    first = affine_network([[-1.0 / scale], [-1.0 / scale]], [1.0, 0.0]).layers[0]
    second = affine_network([[1.0, -1.0]]).layers[0]
    return MlpNetwork((first, second))


def _bump_front(d: int, eta_side: float, centers=None) -> MlpNetwork:
    """(x) or (c, x) -> per-coordinate slack |x_i - c_i| - eta*side (affine output).

    With `centers` given the input is x alone; otherwise the input is the
    concatenation (c, x) and the construction is translation invariant.
    """
    if centers is not None:
        w1 = np.vstack([np.eye(d), -np.eye(d)])
        b1 = np.concatenate([-np.asarray(centers), np.asarray(centers)])
    else:
        eye = np.eye(d)
        w1 = np.block([[-eye, eye], [eye, -eye]])
        b1 = np.zeros(2 * d)
    first = AffineLayer(w1, b1)
    w2 = np.hstack([np.eye(d), np.eye(d)])
    second = AffineLayer(w2, np.full(d, -eta_side))
    return MlpNetwork((first, second))


def bump_gadget(spec: BumpSpec) -> MlpNetwork:
    """Exact ReLU network for the cubical bump, size independent of center/level."""
    front = _bump_front(spec.dim, spec.eta * spec.side_length, centers=spec.center)
    # The (.)_+ on the slack merges into the max stage for d > 1; for d = 1 the
    # outer clamp makes it redundant as well, since negative slack means the
    # point is inside the plateau.
    mid = compose(max_gadget(spec.dim), front)
    return compose(_bump_tail(spec.side_length, spec.eta), mid)


def bump_pair_gadget(d: int, side_length: float, eta: float) -> MlpNetwork:
    """Bump as a joint network of (center, point) in R^{2d}, for a fixed level."""
    front = _bump_front(d, eta * side_length, centers=None)
    mid = compose(max_gadget(d), front)
    return compose(_bump_tail(side_length, eta), mid)


def _square_net(steps: int) -> MlpNetwork:
    """Approximate x^2 on [0,1] as x - sum_k g_k(x)/4^k with tent-map iterates.

    Uniform error at most 4**-(steps+1).
    """
    dup = affine_network([[1.0], [1.0]])  # x -> (g_0, acc_0) = (x, x)
    net = dup
    for k in range(1, steps + 1):
        first = AffineLayer(
            np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([0.0, -0.5, 0.0])
        )
        scale = 4.0**-k
        second = AffineLayer(
            np.array([[2.0, -4.0, 0.0], [-2.0 * scale, 4.0 * scale, 1.0]]), np.zeros(2)
        )
        net = compose(MlpNetwork((first, second)), net)
    return compose(affine_network([[0.0, 1.0]]), net)


def mult_eps(eps: float) -> MlpNetwork:
    """Approximate multiplier on [0,1]^2 with O(log(1/eps)) weights.

    Polarization ab = 2((a+b)/2)^2 - a^2/2 - b^2/2 applied to the sawtooth
    squaring network; output clamped to [0,1]. Uniform error < eps by a wide
    margin (the measured error is quadratically smaller).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    steps = math.ceil(math.log2(1.0 / eps)) + 2
    pre = affine_network([[0.5, 0.5], [1.0, 0.0], [0.0, 1.0]])
    squares = parallel([_square_net(steps) for _ in range(3)], mode="disjoint")
    comb = affine_network([[2.0, -0.5, -0.5]])
    return compose(selector_gadget(), compose(comb, compose(squares, pre)))
