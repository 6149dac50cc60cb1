"""Shared fixtures and tiny-corpus builders."""

import numpy as np
import pytest

from bdhh.dataio import Basket, BasketSequence, Sample, TransactionRecord, Vocabulary


def make_vocab(item_level, item_category, n_levels, n_categories=None):
    """Vocabulary straight from code arrays (no raw records needed)."""
    item_level = np.asarray(item_level, dtype=np.int64)
    item_category = np.asarray(item_category, dtype=np.int64)
    n_items = item_level.shape[0]
    if n_categories is None:
        n_categories = int(item_category.max()) + 1 if n_items else 0
    item_ids = [f"i{code:04d}" for code in range(n_items)]
    category_labels = [f"c{code:03d}" for code in range(n_categories)]
    return Vocabulary(
        item_index={item: code for code, item in enumerate(item_ids)},
        category_index={label: code for code, label in enumerate(category_labels)},
        n_levels=n_levels,
        item_level=item_level,
        item_category=item_category,
        item_ids=item_ids,
        category_labels=category_labels,
    )


def make_basket(vocab, user, seq_index, item_codes, day=None):
    items = tuple(
        (code, int(vocab.item_level[code]), int(vocab.item_category[code]))
        for code in sorted(set(item_codes))
    )
    return Basket(user=user, seq_index=seq_index, day=seq_index if day is None else day, items=items)


def make_sequence(vocab, user, basket_item_codes):
    baskets = tuple(
        make_basket(vocab, user, i, codes) for i, codes in enumerate(basket_item_codes)
    )
    return BasketSequence(user=user, user_id=f"u{user:03d}", baskets=baskets)


def make_sample(vocab, user, input_codes, target_codes):
    inputs = tuple(make_basket(vocab, user, i, codes) for i, codes in enumerate(input_codes))
    target = make_basket(vocab, user, len(inputs), target_codes)
    return Sample(user=user, inputs=inputs, target=target)


def random_vocab(rng, max_items=8, max_levels=4, max_categories=3):
    n_items = int(rng.integers(1, max_items + 1))
    n_levels = int(rng.integers(1, max_levels + 1))
    n_categories = int(rng.integers(1, max_categories + 1))
    return make_vocab(
        item_level=rng.integers(0, n_levels, size=n_items),
        item_category=rng.integers(0, n_categories, size=n_items),
        n_levels=n_levels,
        n_categories=n_categories,
    )


def random_sequences(rng, vocab, max_users=3, max_baskets=4, max_basket_size=3):
    sequences = []
    for user in range(int(rng.integers(1, max_users + 1))):
        n_baskets = int(rng.integers(2, max_baskets + 1))
        baskets = []
        for _ in range(n_baskets):
            size = int(rng.integers(1, max_basket_size + 1))
            codes = rng.choice(vocab.m_d, size=min(size, vocab.m_d), replace=False)
            baskets.append(sorted(int(c) for c in codes))
        sequences.append(make_sequence(vocab, user, baskets))
    return sequences


def planted_records(n_users=50, n_items=100, set_size=5, n_baskets=20, seed=7):
    """Users who repurchase a fixed personal item set in every basket."""
    rng = np.random.default_rng(seed)
    prices = {f"i{code:04d}": float((code % 20) + 1) for code in range(n_items)}
    categories = {f"i{code:04d}": f"c{code % 5}" for code in range(n_items)}
    records = []
    for user in range(n_users):
        personal = rng.choice(n_items, size=set_size, replace=False)
        for day in range(n_baskets):
            for code in sorted(int(c) for c in personal):
                item = f"i{code:04d}"
                records.append(
                    TransactionRecord(
                        user_id=f"u{user:03d}",
                        day=day,
                        item_id=item,
                        price=prices[item],
                        category=categories[item],
                    )
                )
    return records


def write_generic_csv(path, rows):
    header = "user_id,day,basket_id,item_id,price,category"
    lines = [header] + [",".join(str(field) for field in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def records_to_csv(path, records):
    rows = [
        (r.user_id, r.day, r.basket_key or "", r.item_id, r.price, r.category)
        for r in records
    ]
    return write_generic_csv(path, rows)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_vocab():
    # 6 items, 3 levels, 2 categories
    return make_vocab(
        item_level=[0, 1, 2, 0, 1, 2],
        item_category=[0, 0, 0, 1, 1, 1],
        n_levels=3,
        n_categories=2,
    )
