"""Fully connected ReLU MLPs: representation, evaluation, algebra, serialization.

Networks are immutable after construction and evaluation is pure, so they can
be shared freely across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class NetworkError(ValueError):
    """Raised for malformed networks or mismatched dimensions."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AffineLayer:
    """One affine map x -> W x + b. Rows of `weights` index output units."""

    weights: np.ndarray  # (d_out, d_in)
    bias: np.ndarray  # (d_out,)

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_readonly(self.weights))
        object.__setattr__(self, "bias", _as_readonly(self.bias))
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise NetworkError("layer expects 2-d weights and 1-d bias")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise NetworkError(
                f"weights rows {self.weights.shape[0]} != bias length {self.bias.shape[0]}"
            )
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise NetworkError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class MlpNetwork:
    """Sequence of affine layers; ReLU applied after every layer but the last."""

    layers: tuple[AffineLayer, ...] = field()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise NetworkError("network needs at least one layer")
        for j in range(len(self.layers) - 1):
            if self.layers[j].out_dim != self.layers[j + 1].in_dim:
                raise NetworkError(
                    f"layer {j} output dim {self.layers[j].out_dim} does not chain "
                    f"into layer {j + 1} input dim {self.layers[j + 1].in_dim}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def depth(self) -> int:
        return len(self.layers)


def evaluate(net: MlpNetwork, x) -> np.ndarray:
    """Forward pass on a single input vector."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (net.in_dim,):
        raise NetworkError(f"input shape {x.shape} != ({net.in_dim},) at layer 0")
    return evaluate_batch(net, x[None, :])[0]


def evaluate_batch(net: MlpNetwork, xs: np.ndarray) -> np.ndarray:
    """Forward pass on a batch of shape (n, in_dim); returns (n, out_dim)."""
    h = np.asarray(xs, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != net.in_dim:
        raise NetworkError(f"batch shape {h.shape} incompatible with input dim {net.in_dim}")
    last = len(net.layers) - 1
    for j, layer in enumerate(net.layers):
        h = h @ layer.weights.T + layer.bias
        if j != last:
            np.maximum(h, 0.0, out=h)
    return h


def evaluate_scalar(net: MlpNetwork, xs: np.ndarray) -> np.ndarray:
    """Batched scalar-output convenience: (n, in_dim) -> (n,)."""
    return evaluate_batch(net, xs)[:, 0]


def compose(outer: MlpNetwork, inner: MlpNetwork) -> MlpNetwork:
    """Network computing outer(inner(x)).

    The inner final affine layer is multiplied into the outer first layer, so
    no spurious activation appears at the seam and depth adds as
    depth(inner) + depth(outer) - 1.
    """
    if inner.out_dim != outer.in_dim:
        raise NetworkError(
            f"compose: inner output dim {inner.out_dim} != outer input dim {outer.in_dim}"
        )
    a, b = inner.layers[-1], outer.layers[0]
    seam = AffineLayer(b.weights @ a.weights, b.weights @ a.bias + b.bias)
    return MlpNetwork(inner.layers[:-1] + (seam,) + outer.layers[1:])


def identity_network(dim: int, hidden_layers: int = 0) -> MlpNetwork:
    """Exact identity on R^dim.

    With hidden layers, each intermediate activation carries the sign-split
    pair (ReLU(v), ReLU(-v)), so the passthrough is exact for all real inputs.
    """
    if dim < 1:
        raise NetworkError("identity needs dim >= 1")
    eye = np.eye(dim)
    if hidden_layers == 0:
        return MlpNetwork((AffineLayer(eye, np.zeros(dim)),))
    split = AffineLayer(np.vstack([eye, -eye]), np.zeros(2 * dim))
    resplit = AffineLayer(
        np.block([[eye, -eye], [-eye, eye]]), np.zeros(2 * dim)
    )
    merge = AffineLayer(np.hstack([eye, -eye]), np.zeros(dim))
    return MlpNetwork((split,) + (resplit,) * (hidden_layers - 1) + (merge,))


def pad_to_depth(net: MlpNetwork, depth: int) -> MlpNetwork:
    """Append exact identity passthrough layers to reach the requested depth."""
    if depth < net.depth:
        raise NetworkError(f"cannot pad depth {net.depth} down to {depth}")
    if depth == net.depth:
        return net
    return compose(identity_network(net.out_dim, hidden_layers=depth - net.depth), net)


def parallel(nets, mode: str = "disjoint") -> MlpNetwork:
    """Stack networks side by side; output is the concatenation of outputs.

    mode="disjoint": nets read consecutive slices of the input.
    mode="shared": all nets read the same full input (first layers stack
    vertically instead of block-diagonally).
    Depths are aligned by exact identity passthrough padding.
    """
    nets = list(nets)
    if not nets:
        raise NetworkError("parallel of empty sequence")
    if mode not in ("disjoint", "shared"):
        raise NetworkError(f"unknown parallel mode {mode!r}")
    if mode == "shared" and len({n.in_dim for n in nets}) != 1:
        raise NetworkError("shared mode requires equal input dims")
    depth = max(n.depth for n in nets)
    nets = [pad_to_depth(n, depth) for n in nets]
    layers = []
    for j in range(depth):
        blocks = [n.layers[j] for n in nets]
        if j == 0 and mode == "shared":
            w = np.vstack([b.weights for b in blocks])
        else:
            w = _block_diag([b.weights for b in blocks])
        layers.append(AffineLayer(w, np.concatenate([b.bias for b in blocks])))
    return MlpNetwork(tuple(layers))


def _block_diag(mats) -> np.ndarray:
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols))
    r = c = 0
    for m in mats:
        out[r : r + m.shape[0], c : c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


def affine_network(weights, bias=None) -> MlpNetwork:
    """Single affine layer as a network."""
    weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    if bias is None:
        bias = np.zeros(weights.shape[0])
    return MlpNetwork((AffineLayer(weights, bias),))


def count_weights(net: MlpNetwork) -> int:
    """Network size: number of nonzero entries over all weights and biases."""
    total = 0
    for layer in net.layers:
        total += int(np.count_nonzero(layer.weights)) + int(np.count_nonzero(layer.bias))
    return total


def to_json_dict(net: MlpNetwork) -> dict:
    return {
        "layers": [
            {"weights": layer.weights.tolist(), "bias": layer.bias.tolist()}
            for layer in net.layers
        ]
    }


def serialize(net: MlpNetwork) -> str:
    return json.dumps(to_json_dict(net))


def from_json_dict(doc: dict) -> MlpNetwork:
    if not isinstance(doc, dict) or "layers" not in doc:
        raise NetworkError("document missing 'layers'")
    raw = doc["layers"]
    if not isinstance(raw, list) or not raw:
        raise NetworkError("'layers' must be a nonempty list")
    layers = []
    for j, entry in enumerate(raw):
        try:
            layers.append(AffineLayer(np.array(entry["weights"]), np.array(entry["bias"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkError(f"malformed layer {j}: {exc}") from exc
    return MlpNetwork(tuple(layers))


def deserialize(text: str | bytes) -> MlpNetwork:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"invalid JSON: {exc}") from exc
    return from_json_dict(doc)
