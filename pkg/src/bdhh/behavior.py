"""User behavior modeling.

Price sensitivity: multi-head scaled dot-product self-attention over the
user's chronological price-level embeddings; the preference vector is the
output row of the most recent position (mean pooling is a config option).

Product preference: the item sequence is reversed (most recent first),
averaged into a basket-aggregate vector, and passed through a gated linear
unit whose per-position scalar scores weight the reversed item embeddings:

    pre_i  = W1 pos_i + W2 r_i + W3 mean(r) + bias
    g_i    = W4 (tanh(pre_i) * sigmoid(pre_i))
    beta_i = w_score . g_i          (unnormalized)
    phi    = sum_i beta_i r_i
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySequence
from .nnops import sigmoid, softmax_rows


@dataclass
class AttentionParams:
    """Per-head projections (heads, d, d/heads) and output matrix (d, d)."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray

    @property
    def heads(self):
        return self.wq.shape[0]


@dataclass
class InterestParams:
    pos: np.ndarray  # (max_len, d), row 0 = most recent position
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    w4: np.ndarray
    bias: np.ndarray
    score: np.ndarray  # (d,)


def price_attention(seq, params, pool="last", with_cache=False):
    """Multi-head self-attention over an (m, d) sequence.

    Returns (attended (m, d), pooled preference (d,)) and optionally the
    backward cache.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise EmptySequence("attention needs at least one position")
    m, d = seq.shape
    h = params.heads
    if d % h != 0 or params.wq.shape != (h, d, d // h):
        raise DimensionMismatch(f"width {d} incompatible with {h} heads")
    dh = d // h
    scale = 1.0 / np.sqrt(dh)

    q = np.einsum("md,hde->hme", seq, params.wq)
    k = np.einsum("md,hde->hme", seq, params.wk)
    v = np.einsum("md,hde->hme", seq, params.wv)
    scores = np.einsum("hme,hne->hmn", q, k) * scale
    attn = softmax_rows(scores)
    heads_out = np.einsum("hmn,hne->hme", attn, v)
    concat = heads_out.transpose(1, 0, 2).reshape(m, d)
    out = concat @ params.wo
    pooled = out.mean(axis=0) if pool == "mean" else out[-1]
    if with_cache:
        cache = {"seq": seq, "q": q, "k": k, "v": v, "attn": attn, "concat": concat,
                 "pool": pool, "scale": scale}
        return out, pooled, cache
    return out, pooled


def price_attention_backward(grad_pooled, cache, params, grad_params):
    """Gradient w.r.t. the input sequence; parameter grads accumulate into
    ``grad_params`` ({"wq","wk","wv","wo"})."""
    seq, attn = cache["seq"], cache["attn"]
    m, d = seq.shape
    h = params.heads
    dh = d // h

    grad_out = np.zeros((m, d))
    if cache["pool"] == "mean":
        grad_out += grad_pooled / m
    else:
        grad_out[-1] = grad_pooled

    grad_params["wo"] += cache["concat"].T @ grad_out
    grad_concat = grad_out @ params.wo.T
    grad_heads = grad_concat.reshape(m, h, dh).transpose(1, 0, 2)

    grad_attn = np.einsum("hme,hne->hmn", grad_heads, cache["v"])
    grad_v = np.einsum("hmn,hme->hne", attn, grad_heads)
    inner = (grad_attn * attn).sum(axis=2, keepdims=True)
    grad_scores = attn * (grad_attn - inner) * cache["scale"]
    grad_q = np.einsum("hmn,hne->hme", grad_scores, cache["k"])
    grad_k = np.einsum("hmn,hme->hne", grad_scores, cache["q"])

    grad_seq = np.zeros_like(seq)
    for name, g in (("wq", grad_q), ("wk", grad_k), ("wv", grad_v)):
        grad_params[name] += np.einsum("md,hme->hde", seq, g)
        grad_seq += np.einsum("hme,hde->md", g, getattr(params, name))
    return grad_seq


def interest_embedding(seq, params, with_cache=False):
    """General-interest vector from an (m, d) chronological item sequence."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise EmptySequence("interest embedding needs at least one item")
    m, d = seq.shape
    if m > params.pos.shape[0]:
        raise DimensionMismatch(
            f"sequence length {m} exceeds positional table {params.pos.shape[0]}"
        )
    rev = seq[::-1]
    basket_mean = rev.mean(axis=0)
    pos = params.pos[:m]
    pre = pos @ params.w1.T + rev @ params.w2.T + basket_mean @ params.w3.T + params.bias
    content = np.tanh(pre)
    gate = sigmoid(pre)
    glu = (content * gate) @ params.w4.T
    beta = glu @ params.score
    phi = beta @ rev
    if with_cache:
        cache = {"rev": rev, "basket_mean": basket_mean, "pre": pre, "content": content,
                 "gate": gate, "glu": glu, "beta": beta}
        return phi, cache
    return phi


def interest_embedding_backward(grad_phi, cache, params, grad_params):
    """Gradient w.r.t. the chronological input sequence; parameter grads
    accumulate into ``grad_params`` ({"pos","w1","w2","w3","w4","bias","score"})."""
    rev, beta = cache["rev"], cache["beta"]
    m = rev.shape[0]

    grad_beta = rev @ grad_phi
    grad_rev = np.outer(beta, grad_phi)

    grad_glu = np.outer(grad_beta, params.score)
    grad_params["score"] += cache["glu"].T @ grad_beta
    gated = cache["content"] * cache["gate"]
    grad_params["w4"] += grad_glu.T @ gated
    grad_gated = grad_glu @ params.w4
    grad_pre = grad_gated * (
        cache["gate"] * (1.0 - cache["content"] ** 2)
        + cache["content"] * cache["gate"] * (1.0 - cache["gate"])
    )

    grad_params["w1"] += grad_pre.T @ params.pos[:m]
    grad_params["pos"][:m] += grad_pre @ params.w1
    grad_params["w2"] += grad_pre.T @ rev
    grad_rev += grad_pre @ params.w2
    pre_sum = grad_pre.sum(axis=0)
    grad_params["w3"] += np.outer(pre_sum, cache["basket_mean"])
    grad_basket = pre_sum @ params.w3
    grad_params["bias"] += pre_sum
    grad_rev += grad_basket[None, :] / m

    return grad_rev[::-1]
