"""Attention-layer networks and the MLP-to-transformer embedding.

A transformer layer here is single-head self-attention followed by a
position-wise affine map and ReLU (no ReLU after the last layer, matching
the MLP convention).  Any ReLU MLP embeds exactly by zeroing the query and
key matrices: the softmax is then uniform, and with a single-row input the
attention output is the value matrix applied to that row, independent of
the temperature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .mlp import AffineLayer, MlpNetwork, NetworkError


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise NetworkError(f"{name} must be 2-d, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NetworkError(f"{name} contains non-finite entries")
    m.flags.writeable = False
    return m


@dataclass(frozen=True)
class AttentionHead:
    """Single-head self-attention with square projections of size d_model."""

    query: np.ndarray
    key: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        q = _as_matrix(self.query, "query")
        k = _as_matrix(self.key, "key")
        v = _as_matrix(self.value, "value")
        d = q.shape[0]
        for name, m in (("query", q), ("key", k), ("value", v)):
            if m.shape != (d, d):
                raise NetworkError(f"{name} must be {d}x{d}, got {m.shape}")
        object.__setattr__(self, "query", q)
        object.__setattr__(self, "key", k)
        object.__setattr__(self, "value", v)

    @property
    def d_model(self) -> int:
        return self.query.shape[0]


@dataclass(frozen=True)
class TransformerLayer:
    head: AttentionHead
    affine: AffineLayer

    def __post_init__(self):
        if self.affine.in_dim != self.head.d_model:
            raise NetworkError(
                f"affine expects {self.affine.in_dim} inputs, head outputs {self.head.d_model}"
            )


@dataclass(frozen=True)
class TransformerNetwork:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise NetworkError("transformer needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.affine.out_dim != b.head.d_model:
                raise NetworkError(
                    f"layer output dim {a.affine.out_dim} != next head dim {b.head.d_model}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].head.d_model

    @property
    def out_dim(self) -> int:
        return self.layers[-1].affine.out_dim


def attention(head: AttentionHead, rows: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-stochastic softmax attention over a (n_rows, d_model) array."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != head.d_model:
        raise NetworkError(f"expected (n, {head.d_model}) rows, got {rows.shape}")
    if temperature <= 0:
        raise NetworkError(f"temperature must be positive, got {temperature}")
    scores = (rows @ head.query.T) @ (rows @ head.key.T).T
    scores *= temperature / np.sqrt(head.d_model)
    scores -= scores.max(axis=1, keepdims=True)  # stable softmax
    weights = np.exp(scores)
    weights /= weights.sum(axis=1, keepdims=True)
    return weights @ (rows @ head.value.T)


def eval_transformer(
    net: TransformerNetwork, rows: np.ndarray, temperature: float = 1.0
) -> np.ndarray:
    """Apply each layer (attention, then affine, then ReLU except last)."""
    h = np.asarray(rows, dtype=np.float64)
    if h.ndim == 1:
        h = h[None, :]
    for i, layer in enumerate(net.layers):
        h = attention(layer.head, h, temperature)
        h = h @ layer.affine.weights.T + layer.affine.bias
        if i < len(net.layers) - 1:
            h = np.maximum(h, 0.0)
    return h


def mlp_to_transformer(mlp: MlpNetwork) -> TransformerNetwork:
    """Exact embedding: zero query/key, identity value, affine maps copied.

    On single-row inputs the output equals the MLP's for every temperature.
    """
    layers = []
    for layer in mlp.layers:
        d = layer.in_dim
        head = AttentionHead(np.zeros((d, d)), np.zeros((d, d)), np.eye(d))
        layers.append(TransformerLayer(head, layer))
    return TransformerNetwork(tuple(layers))


def conversion_defect(
    mlp: MlpNetwork, net: TransformerNetwork, xs: np.ndarray, temperatures=(0.5, 1.0, 4.0)
) -> float:
    """Max deviation between MLP and converted transformer over inputs and
    temperatures."""
    from .mlp import evaluate_batch

    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    ref = evaluate_batch(mlp, xs)
    worst = 0.0
    for lam in temperatures:
        got = np.stack([eval_transformer(net, x, temperature=lam)[0] for x in xs])
        worst = max(worst, float(np.max(np.abs(got - ref))))
    return worst


def to_json_dict(net: TransformerNetwork) -> dict:
    return {
        "layers": [
            {
                "query": layer.head.query.tolist(),
                "key": layer.head.key.tolist(),
                "value": layer.head.value.tolist(),
                "weights": layer.affine.weights.tolist(),
                "bias": layer.affine.bias.tolist(),
            }
            for layer in net.layers
        ]
    }


def serialize(net: TransformerNetwork) -> str:
    return json.dumps(to_json_dict(net))


def from_json_dict(doc: dict) -> TransformerNetwork:
    if not isinstance(doc, dict) or "layers" not in doc:
        raise NetworkError("expected an object with a 'layers' list")
    layers = []
    for i, spec in enumerate(doc["layers"]):
        try:
            head = AttentionHead(
                np.asarray(spec["query"], dtype=np.float64),
                np.asarray(spec["key"], dtype=np.float64),
                np.asarray(spec["value"], dtype=np.float64),
            )
            affine = AffineLayer(
                np.asarray(spec["weights"], dtype=np.float64),
                np.asarray(spec["bias"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkError(f"layer {i}: {exc}") from exc
        layers.append(TransformerLayer(head, affine))
    return TransformerNetwork(tuple(layers))


def deserialize(text: str) -> TransformerNetwork:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"invalid JSON: {exc}") from exc
    return from_json_dict(doc)
