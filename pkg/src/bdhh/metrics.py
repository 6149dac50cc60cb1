"""Offline ranking evaluation: NDCG@K, Hit@K (plus recall@K) and a
per-user purchase-frequency baseline for sanity comparisons."""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTruth
from .model import iter_scores

DEFAULT_KS = (5, 10, 15)

# Published reference results for BDHH on the two retail datasets, reported
# alongside measured values so runs can be compared at a glance.
PUBLISHED_RESULTS = {
    "dunnhumby": {
        "ndcg@5": 0.1570, "ndcg@10": 0.1469, "ndcg@15": 0.1428,
        "hit@5": 0.4109, "hit@10": 0.4758, "hit@15": 0.5059,
    },
    "valuedshopper": {
        "ndcg@5": 0.1684, "ndcg@10": 0.1637, "ndcg@15": 0.1655,
        "hit@5": 0.4823, "hit@10": 0.5857, "hit@15": 0.6576,
    },
}


def ndcg_at_k(ranked, truth, k):
    """Binary-relevance NDCG with log2 discounts; ideal DCG truncates at
    min(k, |truth|)."""
    if not truth:
        raise EmptyTruth("ground-truth set is empty")
    if k < 1:
        raise ValueError("k must be positive")
    truth = set(truth)
    dcg = sum(
        1.0 / np.log2(rank + 2)
        for rank, item in enumerate(ranked[:k])
        if item in truth
    )
    ideal = sum(1.0 / np.log2(rank + 2) for rank in range(min(k, len(truth))))
    return dcg / ideal


def hit_at_k(ranked, truth, k):
    """1.0 if any truth item appears in the top k, else 0.0."""
    if not truth:
        raise EmptyTruth("ground-truth set is empty")
    truth = set(truth)
    return 1.0 if any(item in truth for item in ranked[:k]) else 0.0


def recall_at_k(ranked, truth, k):
    """|top-k intersection| / min(k, |truth|)."""
    if not truth:
        raise EmptyTruth("ground-truth set is empty")
    truth = set(truth)
    hits = sum(1 for item in ranked[:k] if item in truth)
    return hits / min(k, len(truth))


def rank_items(scores):
    """Item codes in descending score order, ties broken by ascending code."""
    return np.argsort(-np.asarray(scores), kind="stable")


def frequency_baseline(history_baskets, global_counts=None, n_items=None):
    """Rank all items by how many of the user's baskets contain them; ties
    break by global frequency, then by item code."""
    if not history_baskets:
        raise EmptyTruth("history must contain at least one basket")
    if n_items is None:
        n_items = int(global_counts.shape[0]) if global_counts is not None else (
            max(c for b in history_baskets for c in b.item_codes) + 1
        )
    personal = np.zeros(n_items)
    for basket in history_baskets:
        for code in set(basket.item_codes):
            personal[code] += 1.0
    if global_counts is None:
        global_counts = np.zeros(n_items)
    order = np.lexsort((np.arange(n_items), -global_counts, -personal))
    return order


def basket_frequency_counts(baskets, n_items):
    counts = np.zeros(n_items)
    for basket in baskets:
        for code in set(basket.item_codes):
            counts[code] += 1.0
    return counts


def _accumulate(ranked, truth, ks, sums):
    for k in ks:
        sums[f"ndcg@{k}"] += ndcg_at_k(ranked, truth, k)
        sums[f"hit@{k}"] += hit_at_k(ranked, truth, k)
        sums[f"recall@{k}"] += recall_at_k(ranked, truth, k)


def _finalize(sums, n_users):
    return {name: value / n_users for name, value in sums.items()}


def evaluate_model(params, graph, samples, hp, item_level, ks=DEFAULT_KS):
    """Average each metric over users; deterministic given fixed inputs."""
    if not samples:
        raise EmptyTruth("no samples to evaluate")
    sums = {f"{m}@{k}": 0.0 for k in ks for m in ("ndcg", "hit", "recall")}
    for sample, scores in iter_scores(params, graph, samples, hp, item_level):
        ranked = rank_items(scores)
        _accumulate(ranked, set(sample.target.item_codes), ks, sums)
    return _finalize(sums, len(samples))


def evaluate_frequency_baseline(samples, n_items, train_baskets, ks=DEFAULT_KS):
    if not samples:
        raise EmptyTruth("no samples to evaluate")
    global_counts = basket_frequency_counts(train_baskets, n_items)
    sums = {f"{m}@{k}": 0.0 for k in ks for m in ("ndcg", "hit", "recall")}
    for sample in samples:
        ranked = frequency_baseline(list(sample.inputs), global_counts, n_items)
        _accumulate(ranked, set(sample.target.item_codes), ks, sums)
    return _finalize(sums, len(samples))


@dataclass
class MetricsReport:
    dataset: str
    variant: str
    ks: tuple
    values: dict
    n_users: int
    seed: int
    checkpoint_id: str
    config_hash: str = ""
    reference: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "dataset": self.dataset,
            "variant": self.variant,
            "ks": list(self.ks),
            "values": {k: self.values[k] for k in sorted(self.values)},
            "n_users": self.n_users,
            "seed": self.seed,
            "checkpoint_id": self.checkpoint_id,
            "config_hash": self.config_hash,
            "reference": {k: self.reference[k] for k in sorted(self.reference)},
        }

    def tsv_rows(self):
        rows = [("variant", "k", "ndcg", "hit", "recall")]
        for k in self.ks:
            rows.append(
                (
                    self.variant,
                    str(k),
                    f"{self.values[f'ndcg@{k}']:.6f}",
                    f"{self.values[f'hit@{k}']:.6f}",
                    f"{self.values[f'recall@{k}']:.6f}",
                )
            )
        return rows


def build_report(dataset, variant, values, n_users, seed, checkpoint_id, ks=DEFAULT_KS, config_hash=""):
    return MetricsReport(
        dataset=dataset,
        variant=variant,
        ks=tuple(ks),
        values=values,
        n_users=n_users,
        seed=seed,
        checkpoint_id=checkpoint_id,
        config_hash=config_hash,
        reference=PUBLISHED_RESULTS.get(dataset, {}),
    )
