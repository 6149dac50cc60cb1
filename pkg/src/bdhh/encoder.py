"""Unified global hybrid encoder.

Every node fuses its own embedding with attention-pooled embeddings of its
cross-type neighbors through a sigmoid gate:

    h = gamma * f1 + (1 - gamma) * f2 + z
    gamma = sigmoid(W @ [z; f1; f2] + W1 @ f1 + W2 @ f2)
    f_delta = sum_i softmax_i(alpha . z_i) * z_i   over type-delta neighbors

(f1, f2) follow the canonical feature order with the centre type removed.
Nodes without neighbors of some type use a zero feature vector, so isolated
nodes reduce to h = z with a constant gate.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch
from .hypergraph import FEATURE_ORDER, NodeType
from .nnops import sigmoid


def deltas_for(center_type):
    """The two cross feature types, in canonical order."""
    return tuple(t for t in FEATURE_ORDER if t != center_type)


@dataclass
class EmbeddingTables:
    z_id: np.ndarray
    z_price: np.ndarray
    z_cat: np.ndarray

    @property
    def d(self):
        return self.z_id.shape[1]

    def table(self, node_type):
        return {
            NodeType.ID: self.z_id,
            NodeType.PRICE: self.z_price,
            NodeType.CATEGORY: self.z_cat,
        }[node_type]


@dataclass
class TypeEncoderParams:
    """Gate matrix (d, 3d), per-delta cross matrices (d, d) and attention
    vectors (d,) for one centre node type."""

    center_type: NodeType
    gate: np.ndarray
    cross: dict
    attn: dict


@dataclass
class EnhancedEmbeddings:
    h_id: np.ndarray
    h_price: np.ndarray
    h_cat: np.ndarray

    def table(self, node_type):
        return {
            NodeType.ID: self.h_id,
            NodeType.PRICE: self.h_price,
            NodeType.CATEGORY: self.h_cat,
        }[node_type]


def aggregate_feature(z_t, neighbor_embs, alpha):
    """Attention-weighted neighbor pool; zero vector for no neighbors.

    ``z_t`` only fixes the expected width (the attention logits depend on the
    neighbors and ``alpha`` alone).
    """
    z_t = np.asarray(z_t, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if z_t.shape != alpha.shape:
        raise DimensionMismatch(f"alpha shape {alpha.shape} != embedding shape {z_t.shape}")
    if len(neighbor_embs) == 0:
        return np.zeros_like(z_t)
    embs = np.asarray(neighbor_embs, dtype=np.float64)
    if embs.ndim != 2 or embs.shape[1] != z_t.shape[0]:
        raise DimensionMismatch(f"neighbor embeddings shape {embs.shape} incompatible with d={z_t.shape[0]}")
    logits = embs @ alpha
    logits -= logits.max()
    weights = np.exp(logits)
    weights /= weights.sum()
    return weights @ embs


def gate_and_fuse(z_t, f1, f2, params):
    """Single-vector form of the gated fusion (see module docstring)."""
    z_t = np.asarray(z_t, dtype=np.float64)
    f1 = np.asarray(f1, dtype=np.float64)
    f2 = np.asarray(f2, dtype=np.float64)
    d = z_t.shape[0]
    if f1.shape != (d,) or f2.shape != (d,):
        raise DimensionMismatch("z, f1, f2 must share one width")
    if params.gate.shape != (d, 3 * d):
        raise DimensionMismatch(f"gate matrix must be (d, 3d), got {params.gate.shape}")
    d1, d2 = deltas_for(params.center_type)
    pre = params.gate @ np.concatenate([z_t, f1, f2]) + params.cross[d1] @ f1 + params.cross[d2] @ f2
    gamma = sigmoid(pre)
    return gamma * f1 + (1.0 - gamma) * f2 + z_t


def _encode_type(center_type, inputs, params, graph):
    """Vectorized forward for all nodes of one type; returns (h, cache)."""
    z_center = inputs.table(center_type)
    feats = {}
    feat_cache = {}
    for delta in deltas_for(center_type):
        z_delta = inputs.table(delta)
        idx, offs = graph.neighbor_csr(center_type, delta)
        logits = (z_delta @ params.attn[delta])[idx]
        weights = kernels.segment_softmax(logits, offs)
        feats[delta] = kernels.segment_weighted_sum(weights, idx, z_delta, offs)
        feat_cache[delta] = (idx, offs, weights)
    d1, d2 = deltas_for(center_type)
    f1, f2 = feats[d1], feats[d2]
    concat = np.hstack([z_center, f1, f2])
    pre = concat @ params.gate.T + f1 @ params.cross[d1].T + f2 @ params.cross[d2].T
    gamma = sigmoid(pre)
    h = gamma * f1 + (1.0 - gamma) * f2 + z_center
    cache = {
        "center_type": center_type,
        "concat": concat,
        "gamma": gamma,
        "f1": f1,
        "f2": f2,
        "feat_cache": feat_cache,
    }
    return h, cache


def _encode_type_backward(grad_h, cache, inputs, params, grad_inputs, grad_params):
    """Mirror of :func:`_encode_type`; accumulates into grad dicts."""
    center_type = cache["center_type"]
    d1, d2 = deltas_for(center_type)
    gamma, f1, f2 = cache["gamma"], cache["f1"], cache["f2"]
    d = grad_h.shape[1]

    d_gamma = grad_h * (f1 - f2)
    d_pre = d_gamma * gamma * (1.0 - gamma)
    grad_params[center_type]["gate"] += d_pre.T @ cache["concat"]
    d_concat = d_pre @ params.gate
    grad_params[center_type]["cross"][d1] += d_pre.T @ f1
    grad_params[center_type]["cross"][d2] += d_pre.T @ f2

    d_f = {
        d1: grad_h * gamma + d_pre @ params.cross[d1] + d_concat[:, d : 2 * d],
        d2: grad_h * (1.0 - gamma) + d_pre @ params.cross[d2] + d_concat[:, 2 * d :],
    }
    grad_inputs[center_type] += grad_h + d_concat[:, :d]

    for delta in (d1, d2):
        idx, offs, weights = cache["feat_cache"][delta]
        z_delta = inputs.table(delta)
        grad_w = kernels.segment_weighted_sum_grad(
            d_f[delta], weights, idx, z_delta, offs, grad_inputs[delta]
        )
        grad_logits = kernels.segment_softmax_grad(weights, grad_w, offs)
        # logits_e = (z_delta @ alpha)[idx]: fan the per-element gradient back
        # through the gather as per-code coefficients.
        coeff = np.bincount(idx, weights=grad_logits, minlength=z_delta.shape[0])
        grad_params[center_type]["attn"][delta] += coeff @ z_delta
        nz = np.flatnonzero(coeff)
        if nz.size:
            grad_inputs[delta][nz] += np.outer(coeff[nz], params.attn[delta])


def encode_graph(graph, tables, params, layers=1, with_cache=False):
    """Semantics-enhanced embeddings for every node of every type.

    ``layers`` > 1 re-applies the same encoder with the previous pass's
    output as input embeddings.
    """
    if tables.z_id.shape[0] != graph.m_d or tables.z_price.shape[0] != graph.m_p or tables.z_cat.shape[0] != graph.m_c:
        raise DimensionMismatch("embedding tables do not match graph vocabulary sizes")
    inputs = tables
    layer_caches = []
    for _ in range(layers):
        outputs = {}
        caches = {}
        for center_type in FEATURE_ORDER:
            outputs[center_type], caches[center_type] = _encode_type(
                center_type, inputs, params[center_type], graph
            )
        layer_caches.append({"inputs": inputs, "caches": caches})
        inputs = EnhancedEmbeddings(
            h_id=outputs[NodeType.ID],
            h_price=outputs[NodeType.PRICE],
            h_cat=outputs[NodeType.CATEGORY],
        )
    enhanced = EnhancedEmbeddings(h_id=inputs.h_id, h_price=inputs.h_price, h_cat=inputs.h_cat)
    if with_cache:
        return enhanced, {"layers": layer_caches, "graph": graph, "params": params}
    return enhanced


def zero_param_grads(params, d):
    grads = {}
    for center_type in FEATURE_ORDER:
        grads[center_type] = {
            "gate": np.zeros((d, 3 * d)),
            "cross": {delta: np.zeros((d, d)) for delta in deltas_for(center_type)},
            "attn": {delta: np.zeros(d) for delta in deltas_for(center_type)},
        }
    return grads


def encode_graph_backward(cache, grad_h):
    """Backward through (possibly stacked) encoder passes.

    ``grad_h``: dict NodeType -> (m_t, d) gradient of the final embeddings.
    Returns (grad_tables dict, grad_params nested dict).
    """
    params = cache["params"]
    d = grad_h[NodeType.ID].shape[1]
    grad_params = zero_param_grads(params, d)
    grad_current = {t: grad_h[t].copy() for t in FEATURE_ORDER}
    for layer in reversed(cache["layers"]):
        inputs = layer["inputs"]
        grad_inputs = {t: np.zeros_like(inputs.table(t)) for t in FEATURE_ORDER}
        for center_type in FEATURE_ORDER:
            _encode_type_backward(
                grad_current[center_type],
                layer["caches"][center_type],
                inputs,
                params[center_type],
                grad_inputs,
                grad_params,
            )
        grad_current = grad_inputs
    return grad_current, grad_params
