"""Parameter container and the end-to-end forward/backward composition.

Parameters live in one flat dict of float64 arrays with dotted names
(``emb.id``, ``enc.id.gate``, ``beh.interest.score``, ...). Views expose the
structured shapes the stage modules expect without copying. The batch
pipeline is encode -> augment -> per-user behavior -> score -> loss; the
backward pass mirrors it exactly and fills a grad dict with the same keys.
"""

from dataclasses import dataclass

import numpy as np

from .augmentation import (
    AugmentationParams,
    augment_backward,
    augment_embeddings,
    batch_baskets,
    build_item_basket_index,
)
from .behavior import (
    AttentionParams,
    InterestParams,
    interest_embedding,
    interest_embedding_backward,
    price_attention,
    price_attention_backward,
)
from .encoder import (
    EmbeddingTables,
    TypeEncoderParams,
    deltas_for,
    encode_graph,
    encode_graph_backward,
)
from .hypergraph import FEATURE_ORDER, NodeType
from .nnops import softmax_rows
from .objective import build_variant, multi_hot, nbr_loss, nbr_loss_grad_scores

TYPE_KEYS = {NodeType.ID: "id", NodeType.CATEGORY: "cat", NodeType.PRICE: "price"}


@dataclass
class ModelState:
    params: dict
    hp: "HyperParams"  # noqa: F821 - objective.HyperParams, kept string to avoid cycle
    vocab: "Vocabulary"  # noqa: F821


def param_specs(hp, vocab):
    """Ordered (name, shape) list of every learnable tensor."""
    d = hp.d
    dh = d // hp.heads
    specs = [
        ("emb.id", (vocab.m_d, d)),
        ("emb.price", (vocab.m_p, d)),
        ("emb.cat", (vocab.m_c, d)),
    ]
    for t in FEATURE_ORDER:
        tk = TYPE_KEYS[t]
        specs.append((f"enc.{tk}.gate", (d, 3 * d)))
        for delta in deltas_for(t):
            specs.append((f"enc.{tk}.cross.{TYPE_KEYS[delta]}", (d, d)))
            specs.append((f"enc.{tk}.attn.{TYPE_KEYS[delta]}", (d,)))
    for tk in ("id", "price"):
        specs.append((f"aug.{tk}.proj", (d, d)))
        specs.append((f"aug.{tk}.vec", (d,)))
    specs += [
        ("beh.price.wq", (hp.heads, d, dh)),
        ("beh.price.wk", (hp.heads, d, dh)),
        ("beh.price.wv", (hp.heads, d, dh)),
        ("beh.price.wo", (d, d)),
        ("beh.interest.pos", (hp.max_seq_len, d)),
        ("beh.interest.w1", (d, d)),
        ("beh.interest.w2", (d, d)),
        ("beh.interest.w3", (d, d)),
        ("beh.interest.w4", (d, d)),
        ("beh.interest.bias", (d,)),
        ("beh.interest.score", (d,)),
    ]
    return specs


def init_params(hp, vocab, rng):
    """Uniform(+-1/sqrt(d)) for matrices and tables, zeros for vectors."""
    scale = 1.0 / np.sqrt(hp.d)
    params = {}
    for name, shape in param_specs(hp, vocab):
        if len(shape) >= 2:
            params[name] = rng.uniform(-scale, scale, size=shape)
        else:
            params[name] = np.zeros(shape)
    return params


def zero_grads(params):
    return {name: np.zeros_like(arr) for name, arr in params.items()}


def tables_view(params):
    return EmbeddingTables(
        z_id=params["emb.id"], z_price=params["emb.price"], z_cat=params["emb.cat"]
    )


def encoder_view(params):
    view = {}
    for t in FEATURE_ORDER:
        tk = TYPE_KEYS[t]
        view[t] = TypeEncoderParams(
            center_type=t,
            gate=params[f"enc.{tk}.gate"],
            cross={d: params[f"enc.{tk}.cross.{TYPE_KEYS[d]}"] for d in deltas_for(t)},
            attn={d: params[f"enc.{tk}.attn.{TYPE_KEYS[d]}"] for d in deltas_for(t)},
        )
    return view


def aug_view(params, type_key):
    return AugmentationParams(
        proj=params[f"aug.{type_key}.proj"], vec=params[f"aug.{type_key}.vec"]
    )


def attention_view(params):
    return AttentionParams(
        wq=params["beh.price.wq"],
        wk=params["beh.price.wk"],
        wv=params["beh.price.wv"],
        wo=params["beh.price.wo"],
    )


def interest_view(params):
    return InterestParams(
        pos=params["beh.interest.pos"],
        w1=params["beh.interest.w1"],
        w2=params["beh.interest.w2"],
        w3=params["beh.interest.w3"],
        w4=params["beh.interest.w4"],
        bias=params["beh.interest.bias"],
        score=params["beh.interest.score"],
    )


def flatten_history(sample, max_len):
    """Chronological (item, level) codes of the input baskets, most recent
    ``max_len`` kept."""
    items = [triple for basket in sample.inputs for triple in basket.items]
    items = items[-max_len:]
    item_codes = np.array([t[0] for t in items], dtype=np.int64)
    level_codes = np.array([t[1] for t in items], dtype=np.int64)
    return item_codes, level_codes


def _level_groups(item_level, m_p):
    return [np.flatnonzero(item_level == level) for level in range(m_p)]


def forward_batch(params, graph, samples, hp, item_level, with_cache=False):
    """Mean loss over a batch of samples; optionally the backward cache."""
    variant = build_variant(hp)
    tables = tables_view(params)
    enhanced, enc_cache = encode_graph(
        graph, tables, encoder_view(params), layers=hp.encoder_layers, with_cache=True
    )

    if variant.without_augmentation:
        baskets = []
        h_id_aug, id_cache = enhanced.h_id, None
        h_price_aug, price_cache = enhanced.h_price, None
    else:
        baskets = batch_baskets(samples)
        id_index = build_item_basket_index(baskets, NodeType.ID)
        h_id_aug, id_cache = augment_embeddings(
            enhanced.h_id, baskets, id_index, aug_view(params, "id"), NodeType.ID, with_cache=True
        )
        if variant.without_price:
            h_price_aug, price_cache = enhanced.h_price, None
        else:
            price_index = build_item_basket_index(baskets, NodeType.PRICE)
            h_price_aug, price_cache = augment_embeddings(
                enhanced.h_price,
                baskets,
                price_index,
                aug_view(params, "price"),
                NodeType.PRICE,
                with_cache=True,
            )

    n = len(samples)
    d = hp.d
    phi_d_rows = np.zeros((n, d))
    phi_p_rows = np.zeros((n, d))
    user_caches = []
    for i, sample in enumerate(samples):
        item_codes, level_codes = flatten_history(sample, hp.max_seq_len)
        phi_d, interest_cache = interest_embedding(
            h_id_aug[item_codes], interest_view(params), with_cache=True
        )
        phi_d_rows[i] = phi_d
        attn_cache = None
        if not variant.without_price:
            _, phi_p, attn_cache = price_attention(
                h_price_aug[level_codes],
                attention_view(params),
                pool=hp.price_pool,
                with_cache=True,
            )
            phi_p_rows[i] = phi_p
        user_caches.append((item_codes, level_codes, interest_cache, attn_cache))

    scores = phi_d_rows @ tables.z_id.T
    if not variant.without_price:
        scores = scores + phi_p_rows @ tables.z_price[item_level].T
    probs = softmax_rows(scores)
    targets = [multi_hot(s.target.item_codes, graph.m_d) for s in samples]
    loss = float(np.mean([nbr_loss(probs[i], targets[i]) for i in range(n)]))

    if not with_cache:
        return loss, scores
    cache = {
        "variant": variant,
        "enc_cache": enc_cache,
        "id_cache": id_cache,
        "price_cache": price_cache,
        "user_caches": user_caches,
        "phi_d_rows": phi_d_rows,
        "phi_p_rows": phi_p_rows,
        "probs": probs,
        "targets": targets,
        "h_id_aug": h_id_aug,
        "h_price_aug": h_price_aug,
        "item_level": item_level,
        "hp": hp,
        "params": params,
        "graph": graph,
    }
    return loss, scores, cache


def backward_batch(cache):
    """Gradient of the mean batch loss w.r.t. every parameter tensor."""
    params = cache["params"]
    variant = cache["variant"]
    graph = cache["graph"]
    tables = tables_view(params)
    grads = zero_grads(params)

    probs, targets = cache["probs"], cache["targets"]
    n = probs.shape[0]
    grad_scores = np.stack(
        [nbr_loss_grad_scores(probs[i], targets[i]) / n for i in range(n)]
    )

    # Scoring layer: dense item-table gradient plus per-level price sums.
    grads["emb.id"] += grad_scores.T @ cache["phi_d_rows"]
    grad_phi_d = grad_scores @ tables.z_id
    grad_phi_p = None
    if not variant.without_price:
        groups = _level_groups(cache["item_level"], graph.m_p)
        level_sums = np.stack(
            [grad_scores[:, idx].sum(axis=1) if idx.size else np.zeros(n) for idx in groups],
            axis=1,
        )
        grads["emb.price"] += level_sums.T @ cache["phi_p_rows"]
        grad_phi_p = level_sums @ tables.z_price

    grad_h_id_aug = np.zeros_like(cache["h_id_aug"])
    grad_h_price_aug = np.zeros_like(cache["h_price_aug"])
    interest_grads = {
        "pos": grads["beh.interest.pos"],
        "w1": grads["beh.interest.w1"],
        "w2": grads["beh.interest.w2"],
        "w3": grads["beh.interest.w3"],
        "w4": grads["beh.interest.w4"],
        "bias": grads["beh.interest.bias"],
        "score": grads["beh.interest.score"],
    }
    attn_grads = {
        "wq": grads["beh.price.wq"],
        "wk": grads["beh.price.wk"],
        "wv": grads["beh.price.wv"],
        "wo": grads["beh.price.wo"],
    }
    for i, (item_codes, level_codes, interest_cache, attn_cache) in enumerate(
        cache["user_caches"]
    ):
        grad_seq_d = interest_embedding_backward(
            grad_phi_d[i], interest_cache, interest_view(params), interest_grads
        )
        np.add.at(grad_h_id_aug, item_codes, grad_seq_d)
        if attn_cache is not None:
            grad_seq_p = price_attention_backward(
                grad_phi_p[i], attn_cache, attention_view(params), attn_grads
            )
            np.add.at(grad_h_price_aug, level_codes, grad_seq_p)

    if cache["id_cache"] is not None:
        aug_grads = {"proj": grads["aug.id.proj"], "vec": grads["aug.id.vec"]}
        grad_h_id = augment_backward(
            grad_h_id_aug, cache["id_cache"], aug_view(params, "id"), aug_grads
        )
    else:
        grad_h_id = grad_h_id_aug
    if cache["price_cache"] is not None:
        aug_grads = {"proj": grads["aug.price.proj"], "vec": grads["aug.price.vec"]}
        grad_h_price = augment_backward(
            grad_h_price_aug, cache["price_cache"], aug_view(params, "price"), aug_grads
        )
    else:
        grad_h_price = grad_h_price_aug

    grad_h = {
        NodeType.ID: grad_h_id,
        NodeType.PRICE: grad_h_price,
        NodeType.CATEGORY: np.zeros_like(params["emb.cat"]),
    }
    grad_tables, grad_enc = encode_graph_backward(cache["enc_cache"], grad_h)
    grads["emb.id"] += grad_tables[NodeType.ID]
    grads["emb.price"] += grad_tables[NodeType.PRICE]
    grads["emb.cat"] += grad_tables[NodeType.CATEGORY]
    for t in FEATURE_ORDER:
        tk = TYPE_KEYS[t]
        grads[f"enc.{tk}.gate"] += grad_enc[t]["gate"]
        for delta in deltas_for(t):
            grads[f"enc.{tk}.cross.{TYPE_KEYS[delta]}"] += grad_enc[t]["cross"][delta]
            grads[f"enc.{tk}.attn.{TYPE_KEYS[delta]}"] += grad_enc[t]["attn"][delta]
    return grads


def iter_scores(params, graph, samples, hp, item_level):
    """Evaluation-time scores, one sample at a time.

    The encoder pass runs once; augmentation uses each user's own history
    baskets so predictions are independent of batch composition.
    """
    variant = build_variant(hp)
    tables = tables_view(params)
    enhanced = encode_graph(graph, tables, encoder_view(params), layers=hp.encoder_layers)
    price_item_rows = tables.z_price[item_level]
    for sample in samples:
        if variant.without_augmentation:
            h_id_aug, h_price_aug = enhanced.h_id, enhanced.h_price
        else:
            baskets = list(sample.inputs)
            id_index = build_item_basket_index(baskets, NodeType.ID)
            h_id_aug = augment_embeddings(
                enhanced.h_id, baskets, id_index, aug_view(params, "id"), NodeType.ID
            )
            if variant.without_price:
                h_price_aug = enhanced.h_price
            else:
                price_index = build_item_basket_index(baskets, NodeType.PRICE)
                h_price_aug = augment_embeddings(
                    enhanced.h_price,
                    baskets,
                    price_index,
                    aug_view(params, "price"),
                    NodeType.PRICE,
                )
        item_codes, level_codes = flatten_history(sample, hp.max_seq_len)
        phi_d = interest_embedding(h_id_aug[item_codes], interest_view(params))
        y = tables.z_id @ phi_d
        if not variant.without_price:
            _, phi_p = price_attention(
                h_price_aug[level_codes], attention_view(params), pool=hp.price_pool
            )
            y = y + price_item_rows @ phi_p
        yield sample, y
