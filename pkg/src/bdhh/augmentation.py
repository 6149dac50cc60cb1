"""Basket-guided dynamic augmentation.

Each batch basket is pooled into a tanh-bounded vector; every node (item-ID
or price-level) appearing in at least one batch basket attends over the
vectors of "its" baskets and adds the attention summary to its embedding:

    v_B   = tanh(mean of member embeddings)
    a     = softmax(b . tanh(W v_B))   over the baskets containing the node
    h~    = h + sum_j a_j v_Bj

Nodes absent from the batch keep h~ = h. At training time the basket pool is
the mini-batch's input baskets; at evaluation time it is the evaluated
user's own history, so predictions never depend on unrelated users.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, EmptyBasket
from .hypergraph import NodeType


@dataclass
class AugmentationParams:
    proj: np.ndarray  # (d, d)
    vec: np.ndarray  # (d,)


@dataclass
class ItemBasketIndex:
    """CSR map from node code to the batch-basket indices containing it."""

    nodes: np.ndarray  # sorted codes with >= 1 containing basket
    basket_ids: np.ndarray  # one entry per (node, basket) pair
    offsets: np.ndarray  # len(nodes) + 1


def pool_basket(item_embs):
    """tanh of the element-wise mean of the member embeddings."""
    if len(item_embs) == 0:
        raise EmptyBasket("cannot pool an empty basket")
    embs = np.asarray(item_embs, dtype=np.float64)
    return np.tanh(embs.mean(axis=0))


def item_basket_attention(basket_vecs, params):
    """Attention-weighted combination of the baskets containing one item."""
    vecs = np.asarray(basket_vecs, dtype=np.float64)
    if vecs.ndim != 2 or vecs.shape[0] < 1:
        raise DimensionMismatch("basket_vecs must be a non-empty (j, d) matrix")
    d = vecs.shape[1]
    if params.proj.shape != (d, d) or params.vec.shape != (d,):
        raise DimensionMismatch("augmentation parameter shapes do not match d")
    logits = np.tanh(vecs @ params.proj.T) @ params.vec
    logits -= logits.max()
    weights = np.exp(logits)
    weights /= weights.sum()
    return weights @ vecs


def batch_baskets(samples):
    """Deduplicated input baskets of a batch, in canonical order."""
    seen = {}
    for sample in samples:
        for basket in sample.inputs:
            seen.setdefault((basket.user, basket.seq_index), basket)
    return [seen[key] for key in sorted(seen)]


def _member_codes(basket, feature):
    if feature == NodeType.ID:
        return [t[0] for t in basket.items]
    if feature == NodeType.PRICE:
        return [t[1] for t in basket.items]
    raise ValueError("augmentation applies to ID and PRICE features only")


def build_pool_arrays(baskets, feature):
    """CSR member arrays for pooling: codes, offsets, 1/len weights.

    Price levels keep per-item multiplicity (the pool averages over items).
    """
    codes = []
    offsets = np.zeros(len(baskets) + 1, dtype=np.int64)
    weights = []
    for i, basket in enumerate(baskets):
        members = _member_codes(basket, feature)
        codes.extend(members)
        weights.extend([1.0 / len(members)] * len(members))
        offsets[i + 1] = len(codes)
    return (
        np.array(codes, dtype=np.int64),
        offsets,
        np.array(weights, dtype=np.float64),
    )


def build_item_basket_index(baskets, feature):
    per_node = {}
    for basket_id, basket in enumerate(baskets):
        for code in sorted(set(_member_codes(basket, feature))):
            per_node.setdefault(code, []).append(basket_id)
    nodes = sorted(per_node)
    basket_ids = []
    offsets = np.zeros(len(nodes) + 1, dtype=np.int64)
    for i, code in enumerate(nodes):
        basket_ids.extend(per_node[code])
        offsets[i + 1] = len(basket_ids)
    return ItemBasketIndex(
        nodes=np.array(nodes, dtype=np.int64),
        basket_ids=np.array(basket_ids, dtype=np.int64),
        offsets=offsets,
    )


class _AugmentCache:
    __slots__ = ("feature", "pool", "basket_vecs", "index", "attn", "h_table")

    def __init__(self, **kw):
        for k, v in kw.items():
            setattr(self, k, v)


def augment_embeddings(h_table, baskets, index, params, feature, with_cache=False):
    """Forward pass; ``index`` must have been built from ``baskets`` for the
    same feature type."""
    if feature not in (NodeType.ID, NodeType.PRICE):
        raise ValueError("augmentation applies to ID and PRICE features only")
    augmented = h_table.copy()
    if not baskets or index.nodes.size == 0:
        if with_cache:
            return augmented, _AugmentCache(
                feature=feature, pool=None, basket_vecs=None, index=index, attn=None, h_table=h_table
            )
        return augmented

    codes, pool_offsets, pool_weights = build_pool_arrays(baskets, feature)
    means = kernels.segment_weighted_sum(pool_weights, codes, h_table, pool_offsets)
    basket_vecs = np.tanh(means)

    hidden = np.tanh(basket_vecs @ params.proj.T)
    logits = (hidden @ params.vec)[index.basket_ids]
    weights = kernels.segment_softmax(logits, index.offsets)
    summaries = kernels.segment_weighted_sum(weights, index.basket_ids, basket_vecs, index.offsets)
    augmented[index.nodes] += summaries

    if with_cache:
        cache = _AugmentCache(
            feature=feature,
            pool=(codes, pool_offsets, pool_weights),
            basket_vecs=basket_vecs,
            index=index,
            attn=(hidden, weights),
            h_table=h_table,
        )
        return augmented, cache
    return augmented


def augment_backward(grad_augmented, cache, params, grad_params):
    """Returns the gradient w.r.t. the pre-augmentation table; accumulates
    parameter gradients into ``grad_params`` ({"proj", "vec"})."""
    grad_h = grad_augmented.copy()
    if cache.pool is None:
        return grad_h
    index = cache.index
    basket_vecs = cache.basket_vecs
    hidden, weights = cache.attn

    grad_summaries = grad_augmented[index.nodes]
    grad_vecs = np.zeros_like(basket_vecs)
    grad_w = kernels.segment_weighted_sum_grad(
        grad_summaries, weights, index.basket_ids, basket_vecs, index.offsets, grad_vecs
    )
    grad_logits = kernels.segment_softmax_grad(weights, grad_w, index.offsets)
    coeff = np.bincount(
        index.basket_ids, weights=grad_logits, minlength=basket_vecs.shape[0]
    )
    grad_params["vec"] += hidden.T @ coeff
    grad_hidden = np.outer(coeff, params.vec) * (1.0 - hidden**2)
    grad_params["proj"] += grad_hidden.T @ basket_vecs
    grad_vecs += grad_hidden @ params.proj

    grad_means = grad_vecs * (1.0 - basket_vecs**2)
    codes, pool_offsets, pool_weights = cache.pool
    kernels.segment_weighted_sum_grad(
        grad_means, pool_weights, codes, cache.h_table, pool_offsets, grad_h
    )
    return grad_h
