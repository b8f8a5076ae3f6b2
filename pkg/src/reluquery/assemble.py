"""Network assembly for realizable learners.

Builds, from the gadget catalog, the ReLU networks that implement the adaptive
query maps and predictors: transcript goes in, query point or prediction comes
out. The key piece is the center-recovery chain for the cubical-path agent,
which re-derives the path cube centers level by level from the raw transcript
using joint (center, point) bump networks, clamp units, and affine
recombination.
"""

from __future__ import annotations

import numpy as np

from .gadgets import HatSpec, bump_pair_gadget, hat_gadget, mult_eps, selector_gadget
from .mlp import (
    AffineLayer,
    MlpNetwork,
    affine_network,
    compose,
    identity_network,
    parallel,
)
from .tasks import child_offsets


def _select(in_dim: int, pieces, bias=None) -> MlpNetwork:
    """Affine network gathering (start, length) input slices in order."""
    rows = sum(length for _, length in pieces)
    w = np.zeros((rows, in_dim))
    r = 0
    for start, length in pieces:
        w[r : r + length, start : start + length] = np.eye(length)
        r += length
    return affine_network(w, bias)


def _center_stage(d: int, level: int, rest_levels: int, extra: int, eta: float) -> MlpNetwork:
    """One center-recovery stage.

    Input layout: [transcript levels `level`..`level+rest_levels-1`
    ((d+1)*K per level)] [extra] [recovered centers (level-1)*d].
    Output layout: the same with the level block consumed and c^{(level)}
    appended.
    """
    K = 2**d
    qlen = d + 1
    block = K * qlen
    trans_len = block * rest_levels
    n_prev = level - 1
    in_dim = trans_len + extra + n_prev * d
    centers_at = trans_len + extra
    pass_pieces = [(block, trans_len - block), (trans_len, extra), (centers_at, n_prev * d)]
    p_len = (trans_len - block) + extra + n_prev * d

    # A: gather bump-pair inputs (c^{(l')}, x_j), then responses, then passthrough.
    pieces = []
    for j in range(K):
        for lp in range(n_prev):
            pieces.append((centers_at + lp * d, d))
            pieces.append((j * qlen, d))
    for j in range(K):
        pieces.append((j * qlen + d, 1))
    pieces.extend(pass_pieces)
    stage = _select(in_dim, pieces)

    # B: evaluate ancestor bumps at this level's query points.
    blocks = [
        bump_pair_gadget(d, 2.0 ** -(lp + 1), eta)
        for _ in range(K)
        for lp in range(n_prev)
    ]
    blocks.append(identity_network(K + p_len))
    stage = compose(parallel(blocks, mode="disjoint"), stage)

    # C: residuals rho_j = y_j - sum of ancestor bump values.
    nb = K * n_prev
    w = np.zeros((K + p_len, nb + K + p_len))
    for j in range(K):
        w[j, j * n_prev : (j + 1) * n_prev] = -1.0
        w[j, nb + j] = 1.0
    w[K:, nb + K :] = np.eye(p_len)
    stage = compose(affine_network(w), stage)

    # D: clamp residuals to {0, 1} indicators.
    blocks = [selector_gadget() for _ in range(K)]
    if p_len:
        blocks.append(identity_network(p_len))
    stage = compose(parallel(blocks, mode="disjoint"), stage)

    # E: c^{(level)} = c^{(level-1)} + 2^-(level+1) * sum_j chi_j * eps^j.
    offs = child_offsets(d) * 2.0 ** -(level + 1)
    out_dim = p_len + d
    w = np.zeros((out_dim, K + p_len))
    w[:p_len, K:] = np.eye(p_len)
    b = np.zeros(out_dim)
    for axis in range(d):
        row = p_len + axis
        for j in range(K):
            w[row, j] = offs[j, axis]
        if n_prev:
            w[row, K + p_len - n_prev * d + (n_prev - 1) * d + axis] = 1.0
        else:
            b[row] = 0.5  # center of the unit cube
    return compose(affine_network(w, b), stage)


def center_chain(d: int, levels: int, eta: float, transcript_queries: int, extra: int = 0) -> MlpNetwork:
    """Transcript (+ optional trailing extras) -> ([extra], c^{(1..levels)}).

    `transcript_queries` is the number of (point, response) pairs in the flat
    transcript; only the first K*levels complete-level pairs are read.
    """
    K = 2**d
    qlen = d + 1
    if transcript_queries < K * levels:
        raise ValueError("transcript too short for the requested level count")
    in_dim = qlen * transcript_queries + extra
    net = _select(in_dim, [(0, qlen * K * levels), (qlen * transcript_queries, extra)])
    for level in range(1, levels + 1):
        net = compose(_center_stage(d, level, levels - level + 1, extra, eta), net)
    return net


def path_query_map_network(d: int, level: int, child: int, transcript_queries: int, eta: float) -> MlpNetwork:
    """Query map for the `child`-th center query at `level`, as a network.

    Input: flat transcript of `transcript_queries` pairs. Output: the query
    point c^{(level-1)} + 2^-(level+1) * eps^child.
    """
    offset = child_offsets(d)[child] * 2.0 ** -(level + 1)
    in_dim = (d + 1) * transcript_queries
    if level == 1:
        w = np.zeros((d, in_dim))
        return affine_network(w, np.full(d, 0.5) + offset)
    chain = center_chain(d, level - 1, eta, transcript_queries)
    pick = _select(chain.out_dim, [(chain.out_dim - d, d)], bias=offset)
    return compose(pick, chain)


def path_predictor_head(d: int, levels: int, eta: float) -> MlpNetwork:
    """(x, c^{(1)}, ..., c^{(levels)}) -> sum of level bumps at x."""
    in_dim = d + levels * d
    pieces = []
    for n in range(1, levels + 1):
        pieces.append((n * d, d))
        pieces.append((0, d))
    net = _select(in_dim, pieces)
    blocks = [bump_pair_gadget(d, 2.0**-n, eta) for n in range(1, levels + 1)]
    net = compose(parallel(blocks, mode="disjoint"), net)
    return compose(affine_network([[1.0] * levels]), net)


def path_predictor_network(d: int, levels: int, eta: float) -> MlpNetwork:
    """Full predictor: (flat transcript of 2^d * levels pairs, x) -> prediction."""
    K = 2**d
    chain = center_chain(d, levels, eta, K * levels, extra=d)
    return compose(path_predictor_head(d, levels, eta), chain)


def moving_hat_network(delta: float) -> MlpNetwork:
    """(a, x) -> (1 - |x - a|/delta)_+, the hat as a joint network."""
    split = AffineLayer(np.array([[-1.0, 1.0], [1.0, -1.0]]), np.zeros(2))
    tent = AffineLayer(np.array([[-1.0 / delta, -1.0 / delta]]), np.array([1.0]))
    out = AffineLayer(np.array([[1.0]]), np.zeros(1))
    return MlpNetwork((split, tent, out))


def value_predictor_network(n_budget: int, eps: float, delta: float) -> MlpNetwork:
    """Pointed-value predictor: (flat transcript of N pairs, x) -> prediction.

    Approximate products of the observed coefficients with the hat basis; the
    moving hat is centered at the first observed response.
    """
    from .tasks import fixed_query_points

    N = n_budget
    q = fixed_query_points(N)
    in_dim = 2 * N + 1
    x_at = 2 * N

    pieces = [(x_at, 1) for _ in range(N - 1)]  # fixed hats read x
    pieces.append((1, 1))  # moving hat reads (y_1, x)
    pieces.append((x_at, 1))
    pieces.extend((2 * i + 1, 1) for i in range(N))  # coefficients y_1..y_N
    net = _select(in_dim, pieces)

    blocks = [hat_gadget(HatSpec(q[i], delta)) for i in range(N - 1)]
    blocks.append(moving_hat_network(delta))
    blocks.append(identity_network(N))
    net = compose(parallel(blocks, mode="disjoint"), net)

    # Pair each coefficient with its hat value: (y_i, h_i) for the multiplier.
    hats_len = N
    pairs = []
    for i in range(N):
        pairs.append((hats_len + i, 1))
        pairs.append((i, 1))
    net = compose(_select(2 * N, pairs), net)
    net = compose(parallel([mult_eps(eps) for _ in range(N)], mode="disjoint"), net)
    return compose(affine_network([[1.0] * N]), net)


def address_query_network(address_net: MlpNetwork, n_budget: int) -> MlpNetwork:
    """Final address query map: flat transcript of N-1 pairs -> spike guess.

    Feeds the observed static coefficients into the supplied address network.
    """
    n_coeff = n_budget - 1
    if address_net.in_dim != n_coeff:
        raise ValueError(f"address net expects {address_net.in_dim} inputs, need {n_coeff}")
    pick = _select(2 * n_coeff, [(2 * i + 1, 1) for i in range(n_coeff)])
    return compose(address_net, pick)
