"""Transaction ingestion, basket construction, price discretization, splits.

The pipeline is deterministic end to end: vocabularies are assigned over
sorted raw identifiers, baskets are sorted by day, items within a basket are
deduplicated and sorted by code, so identical input files produce
byte-identical preprocessed output regardless of row order.
"""

import csv
import datetime
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ArtifactError,
    EmptyInput,
    MalformedRow,
    MissingFile,
    NoPrices,
    SchemaMismatch,
)

DEFAULT_PRICE_LEVELS = 10

# Column roles -> column names (lowercased) per supported input format, plus
# grouping rule and default filters. A user-supplied manifest may override
# any of these fields.
SCHEMAS = {
    "generic": {
        "delimiter": ",",
        "user": "user_id",
        "day": "day",
        "basket": "basket_id",
        "item": "item_id",
        "price": "price",
        "category": "category",
        "day_kind": "int",
        "grouping": "day",
        "min_item_support": 1,
        "min_basket_size": 1,
        "max_baskets_per_user": None,
        "user_sample": None,
    },
    "dunnhumby": {
        "delimiter": ",",
        "user": "household_key",
        "day": "day",
        "basket": "basket_id",
        "item": "product_id",
        "price": "sales_value",
        "category": None,
        "day_kind": "int",
        "grouping": "basket",
        "product_item": "product_id",
        "product_category": "commodity_desc",
        "min_item_support": 30,
        "min_basket_size": 1,
        "max_baskets_per_user": 10,
        "user_sample": None,
    },
    "valuedshopper": {
        "delimiter": ",",
        "user": "id",
        "day": "date",
        "basket": None,
        "item": "product_id",
        "price": "purchaseamount",
        "category": "category",
        "day_kind": "date",
        "grouping": "day",
        "min_item_support": 30,
        "min_basket_size": 1,
        "max_baskets_per_user": 10,
        "user_sample": 10000,
    },
}

UNKNOWN_CATEGORY = "unknown"

DATASET_FORMAT = "bdhh-dataset"
DATASET_VERSION = 1


@dataclass(frozen=True)
class TransactionRecord:
    """One raw transaction line: who bought what, when, at which price."""

    user_id: str
    day: int
    item_id: str
    price: float
    category: str
    basket_key: str | None = None

    def __post_init__(self):
        if not self.user_id or not self.item_id:
            raise ValueError("user_id and item_id must be non-empty")
        if self.day < 0:
            raise ValueError("day must be non-negative")
        if self.price < 0:
            raise ValueError("price must be non-negative")


@dataclass
class Vocabulary:
    """Integer codings for items, price levels and categories.

    ``item_level`` / ``item_category`` map each item code to its price-level
    and category code; the price vocabulary always has exactly ``n_levels``
    entries even when some levels are unused.
    """

    item_index: dict
    category_index: dict
    n_levels: int
    item_level: np.ndarray
    item_category: np.ndarray
    item_ids: list = field(default_factory=list)
    category_labels: list = field(default_factory=list)

    @property
    def m_d(self):
        return len(self.item_index)

    @property
    def m_p(self):
        return self.n_levels

    @property
    def m_c(self):
        return len(self.category_index)

    @property
    def price_index(self):
        return {level: level for level in range(self.n_levels)}


@dataclass(frozen=True)
class Basket:
    """One basket: deduplicated (item, price-level, category) code triples."""

    user: int
    seq_index: int
    day: int
    items: tuple

    @property
    def item_codes(self):
        return tuple(t[0] for t in self.items)


@dataclass(frozen=True)
class BasketSequence:
    user: int
    user_id: str
    baskets: tuple


@dataclass(frozen=True)
class Sample:
    """One supervised example: a basket prefix and the basket to predict."""

    user: int
    inputs: tuple
    target: Basket


@dataclass
class DatasetSplit:
    train_samples: list
    val_samples: list
    test_samples: list


@dataclass
class PreprocessedDataset:
    tag: str
    vocab: Vocabulary
    sequences: list
    n_levels: int
    config_hash: str = ""
    seed: int = 0

    def split(self):
        return split_dataset(self.sequences)


def resolve_schema(fmt, overrides=None):
    if fmt not in SCHEMAS:
        raise SchemaMismatch(f"unknown dataset format {fmt!r}; expected one of {sorted(SCHEMAS)}")
    schema = dict(SCHEMAS[fmt])
    if overrides:
        unknown = set(overrides) - set(SCHEMAS["generic"]) - {"product_item", "product_category"}
        if unknown:
            raise SchemaMismatch(f"unknown schema fields: {sorted(unknown)}")
        schema.update(overrides)
    return schema


def _parse_day(raw, kind, line_number):
    if kind == "date":
        try:
            return datetime.date.fromisoformat(raw.strip()).toordinal()
        except ValueError as exc:
            raise MalformedRow(line_number, f"bad date {raw!r}: {exc}") from None
    try:
        day = int(raw)
    except ValueError:
        raise MalformedRow(line_number, f"bad day index {raw!r}") from None
    return day


def _read_product_categories(path, schema):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise MissingFile(f"product table not found: {path}")
    categories = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema["delimiter"])
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"product table {path} is empty") from None
        cols = {name.strip().lower(): i for i, name in enumerate(header)}
        for role in ("product_item", "product_category"):
            if schema[role] not in cols:
                raise SchemaMismatch(f"product table missing column {schema[role]!r}")
        item_col = cols[schema["product_item"]]
        cat_col = cols[schema["product_category"]]
        for row in reader:
            if len(row) <= max(item_col, cat_col):
                continue
            categories[row[item_col].strip()] = row[cat_col].strip() or UNKNOWN_CATEGORY
    return categories


def load_transactions(path, fmt="generic", products_path=None, schema_overrides=None):
    """Read a delimiter-separated transaction file into records.

    Malformed rows (bad numbers, negative prices, empty identifiers) raise
    :class:`MalformedRow` with the 1-based line number. Rows with an empty
    price field are dropped (missing prices are not imputed).
    """
    schema = resolve_schema(fmt, schema_overrides)
    if not os.path.exists(path):
        raise MissingFile(f"transaction file not found: {path}")
    product_categories = _read_product_categories(products_path, schema) if schema.get("product_item") else {}

    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema["delimiter"])
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path} is empty (no header row)") from None
        cols = {name.strip().lower(): i for i, name in enumerate(header)}
        required = ["user", "day", "item", "price"]
        if schema["category"] is not None:
            required.append("category")
        missing = [schema[r] for r in required if schema[r] not in cols]
        if missing:
            raise SchemaMismatch(f"{path} is missing columns {missing}; found {sorted(cols)}")

        def col(role):
            name = schema[role]
            return cols[name] if name is not None and name in cols else None

        user_col, day_col = col("user"), col("day")
        item_col, price_col = col("item"), col("price")
        cat_col, basket_col = col("category"), col("basket")

        for line_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise MalformedRow(line_number, f"expected {len(header)} fields, got {len(row)}")
            user_id = row[user_col].strip()
            item_id = row[item_col].strip()
            if not user_id or not item_id:
                raise MalformedRow(line_number, "empty user or item identifier")
            day = _parse_day(row[day_col], schema["day_kind"], line_number)
            if day < 0:
                raise MalformedRow(line_number, f"negative day {day}")
            if not row[price_col].strip():
                continue
            try:
                price = float(row[price_col])
            except ValueError:
                raise MalformedRow(line_number, f"bad price {row[price_col]!r}") from None
            if not np.isfinite(price) or price < 0:
                raise MalformedRow(line_number, f"invalid price {price}")
            if cat_col is not None:
                category = row[cat_col].strip() or UNKNOWN_CATEGORY
            else:
                category = product_categories.get(item_id, UNKNOWN_CATEGORY)
            basket_key = row[basket_col].strip() if basket_col is not None else None
            records.append(
                TransactionRecord(
                    user_id=user_id,
                    day=day,
                    item_id=item_id,
                    price=price,
                    category=category,
                    basket_key=basket_key or None,
                )
            )
    return records


def discretize_prices(records, n_levels=DEFAULT_PRICE_LEVELS):
    """Assign each item a relative price level within its category.

    An item's representative price is the median of its observed prices; the
    distinct representative prices inside each category are split into
    equal-frequency bins (items sharing a price share a level), so a category
    with fewer distinct prices than levels simply uses fewer levels.
    """
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    if not records:
        raise EmptyInput("no records to discretize")

    prices = {}
    categories = {}
    for rec in records:
        prices.setdefault(rec.item_id, []).append(rec.price)
        categories.setdefault(rec.item_id, {}).setdefault(rec.category, 0)
        categories[rec.item_id][rec.category] += 1
    if all(not p for p in prices.values()):
        raise NoPrices("no price observations in input")

    item_category = {
        item: min(counts, key=lambda c: (-counts[c], c)) for item, counts in categories.items()
    }
    representative = {item: float(np.median(obs)) for item, obs in prices.items()}

    by_category = {}
    for item, cat in sorted(item_category.items()):
        by_category.setdefault(cat, []).append(item)

    levels = {}
    for items in by_category.values():
        distinct = sorted({representative[i] for i in items})
        rank = {price: r for r, price in enumerate(distinct)}
        n = len(distinct)
        for item in items:
            levels[item] = rank[representative[item]] * n_levels // n
    return levels


def build_vocabulary(records, n_levels=DEFAULT_PRICE_LEVELS, items=None):
    """Integer-code items and categories (sorted identifiers -> codes).

    ``items`` optionally restricts the vocabulary to a subset of item ids
    (e.g. items surviving basket-level filtering); price statistics still use
    every record of those items.
    """
    if not records:
        raise EmptyInput("no records")
    keep = set(items) if items is not None else None
    kept_records = [r for r in records if keep is None or r.item_id in keep]
    if not kept_records:
        raise EmptyInput("no records left after restricting to the item subset")

    levels = discretize_prices(kept_records, n_levels)
    item_ids = sorted({r.item_id for r in kept_records})
    item_index = {item: code for code, item in enumerate(item_ids)}

    cat_counts = {}
    for rec in kept_records:
        cat_counts.setdefault(rec.item_id, {}).setdefault(rec.category, 0)
        cat_counts[rec.item_id][rec.category] += 1
    item_cat_label = {
        item: min(counts, key=lambda c: (-counts[c], c)) for item, counts in cat_counts.items()
    }
    category_labels = sorted(set(item_cat_label.values()))
    category_index = {label: code for code, label in enumerate(category_labels)}

    item_level = np.array([levels[item] for item in item_ids], dtype=np.int64)
    item_category = np.array(
        [category_index[item_cat_label[item]] for item in item_ids], dtype=np.int64
    )
    return Vocabulary(
        item_index=item_index,
        category_index=category_index,
        n_levels=n_levels,
        item_level=item_level,
        item_category=item_category,
        item_ids=item_ids,
        category_labels=category_labels,
    )


def group_baskets_raw(records, grouping="day", min_basket_size=1, max_baskets_per_user=None):
    """Group records into per-user chronological baskets of raw item ids.

    Users with fewer than two baskets are dropped (a target needs history).
    Output is canonical: users sorted by id, baskets by (day, basket key),
    items deduplicated and sorted.
    """
    if not records:
        raise EmptyInput("no records to group")
    if grouping not in ("day", "basket"):
        raise ValueError(f"unknown grouping rule {grouping!r}")

    per_user = {}
    for rec in records:
        if grouping == "basket" and rec.basket_key is not None:
            key = (rec.day, rec.basket_key)
        else:
            key = (rec.day, "")
        per_user.setdefault(rec.user_id, {}).setdefault(key, set()).add(rec.item_id)

    sequences = []
    for user_id in sorted(per_user):
        baskets = []
        for (day, _bkey), items in sorted(per_user[user_id].items()):
            item_list = sorted(items)
            if len(item_list) >= min_basket_size:
                baskets.append((day, item_list))
        if max_baskets_per_user is not None and len(baskets) > max_baskets_per_user:
            baskets = baskets[-max_baskets_per_user:]
        if len(baskets) >= 2:
            sequences.append((user_id, baskets))
    return sequences


def encode_sequences(raw_sequences, vocab):
    """Turn raw (user_id, [(day, [item_id])]) groups into coded sequences."""
    sequences = []
    for user_code, (user_id, raw_baskets) in enumerate(raw_sequences):
        baskets = []
        for seq_index, (day, item_ids) in enumerate(raw_baskets):
            triples = tuple(
                (
                    vocab.item_index[item],
                    int(vocab.item_level[vocab.item_index[item]]),
                    int(vocab.item_category[vocab.item_index[item]]),
                )
                for item in item_ids
                if item in vocab.item_index
            )
            if triples:
                baskets.append(Basket(user=user_code, seq_index=seq_index, day=day, items=triples))
        if len(baskets) >= 2:
            baskets = tuple(
                Basket(user=b.user, seq_index=i, day=b.day, items=b.items)
                for i, b in enumerate(baskets)
            )
            sequences.append(BasketSequence(user=user_code, user_id=user_id, baskets=baskets))
    # Re-number users densely in case encoding dropped someone.
    renumbered = []
    for code, seq in enumerate(sequences):
        baskets = tuple(
            Basket(user=code, seq_index=b.seq_index, day=b.day, items=b.items)
            for b in seq.baskets
        )
        renumbered.append(BasketSequence(user=code, user_id=seq.user_id, baskets=baskets))
    return renumbered


def build_baskets(records, grouping="day", vocab=None, min_basket_size=1, max_baskets_per_user=None):
    """Full basket construction: group, filter, and integer-code records."""
    raw = group_baskets_raw(
        records,
        grouping=grouping,
        min_basket_size=min_basket_size,
        max_baskets_per_user=max_baskets_per_user,
    )
    if vocab is None:
        surviving = sorted({item for _, baskets in raw for _, items in baskets for item in items})
        vocab = build_vocabulary(records, items=surviving)
    return encode_sequences(raw, vocab), vocab


def training_baskets(sequences):
    """Baskets usable for graph construction: everything that is never a
    validation or test target, so target co-occurrence cannot leak in."""
    split = split_dataset(sequences)
    val_targets = {(s.target.user, s.target.seq_index) for s in split.val_samples}
    baskets = []
    for sample in split.test_samples:
        for basket in sample.inputs:
            if (basket.user, basket.seq_index) not in val_targets:
                baskets.append(basket)
    return baskets


def split_dataset(sequences):
    """Leave-last-out test, leave-second-to-last validation, all earlier
    prefix/target pairs as training samples."""
    for seq in sequences:
        if len(seq.baskets) < 2:
            raise ValueError(f"user {seq.user} has fewer than 2 baskets")
    train, val, test = [], [], []
    for seq in sequences:
        baskets = seq.baskets
        n = len(baskets)
        test.append(Sample(user=seq.user, inputs=baskets[: n - 1], target=baskets[n - 1]))
        if n >= 3:
            val.append(Sample(user=seq.user, inputs=baskets[: n - 2], target=baskets[n - 2]))
            for k in range(1, n - 2):
                train.append(Sample(user=seq.user, inputs=baskets[:k], target=baskets[k]))
    return DatasetSplit(train_samples=train, val_samples=val, test_samples=test)


def _sample_users(raw_sequences, user_sample, seed):
    if user_sample is None or len(raw_sequences) <= user_sample:
        return raw_sequences
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(raw_sequences), size=user_sample, replace=False)
    return [raw_sequences[i] for i in sorted(picked.tolist())]


def preprocess(
    records,
    tag="generic",
    grouping="day",
    n_levels=DEFAULT_PRICE_LEVELS,
    min_item_support=1,
    min_basket_size=1,
    max_baskets_per_user=None,
    user_sample=None,
    seed=0,
    config_hash="",
):
    """Records -> filtered, coded, split-ready dataset."""
    if not records:
        raise EmptyInput("no records")
    if min_item_support > 1:
        counts = {}
        for rec in records:
            counts[rec.item_id] = counts.get(rec.item_id, 0) + 1
        records = [r for r in records if counts[r.item_id] >= min_item_support]
        if not records:
            raise EmptyInput(f"no records left with item support >= {min_item_support}")

    raw = group_baskets_raw(
        records,
        grouping=grouping,
        min_basket_size=min_basket_size,
        max_baskets_per_user=max_baskets_per_user,
    )
    raw = _sample_users(raw, user_sample, seed)
    if not raw:
        raise EmptyInput("no users with at least 2 baskets")
    surviving = sorted({item for _, baskets in raw for _, items in baskets for item in items})
    vocab = build_vocabulary(records, n_levels=n_levels, items=surviving)
    sequences = encode_sequences(raw, vocab)
    return PreprocessedDataset(
        tag=tag,
        vocab=vocab,
        sequences=sequences,
        n_levels=n_levels,
        config_hash=config_hash,
        seed=seed,
    )


def _canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def save_dataset(dataset, path):
    """Write the self-describing JSONL dataset file (round-trips exactly)."""
    split = dataset.split()
    val_users = {s.user for s in split.val_samples}
    lines = [
        _canonical_json(
            {
                "format": DATASET_FORMAT,
                "version": DATASET_VERSION,
                "tag": dataset.tag,
                "n_levels": dataset.n_levels,
                "seed": dataset.seed,
                "config_hash": dataset.config_hash,
                "n_users": len(dataset.sequences),
            }
        ),
        _canonical_json(
            {
                "kind": "vocab",
                "items": dataset.vocab.item_ids,
                "categories": dataset.vocab.category_labels,
                "item_level": dataset.vocab.item_level.tolist(),
                "item_category": dataset.vocab.item_category.tolist(),
            }
        ),
    ]
    for seq in dataset.sequences:
        n = len(seq.baskets)
        lines.append(
            _canonical_json(
                {
                    "kind": "user",
                    "user": seq.user,
                    "user_id": seq.user_id,
                    "baskets": [
                        {"day": b.day, "items": list(b.item_codes)} for b in seq.baskets
                    ],
                    "test_target": n - 1,
                    "val_target": n - 2 if seq.user in val_users else None,
                    "train_targets": list(range(1, n - 2)) if n >= 3 else [],
                }
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path):
    if not os.path.exists(path):
        raise MissingFile(f"dataset file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line]
    if not lines:
        raise ArtifactError(f"{path} is empty")
    header = json.loads(lines[0])
    if header.get("format") != DATASET_FORMAT:
        raise ArtifactError(f"{path} is not a {DATASET_FORMAT} file")
    if header.get("version") != DATASET_VERSION:
        raise ArtifactError(f"unsupported dataset version {header.get('version')}")
    vocab_rec = json.loads(lines[1])
    if vocab_rec.get("kind") != "vocab":
        raise ArtifactError("missing vocabulary record")
    item_ids = vocab_rec["items"]
    category_labels = vocab_rec["categories"]
    vocab = Vocabulary(
        item_index={item: code for code, item in enumerate(item_ids)},
        category_index={label: code for code, label in enumerate(category_labels)},
        n_levels=header["n_levels"],
        item_level=np.array(vocab_rec["item_level"], dtype=np.int64),
        item_category=np.array(vocab_rec["item_category"], dtype=np.int64),
        item_ids=item_ids,
        category_labels=category_labels,
    )
    sequences = []
    for line in lines[2:]:
        rec = json.loads(line)
        if rec.get("kind") != "user":
            raise ArtifactError(f"unexpected record kind {rec.get('kind')!r}")
        user = rec["user"]
        baskets = tuple(
            Basket(
                user=user,
                seq_index=i,
                day=b["day"],
                items=tuple(
                    (
                        code,
                        int(vocab.item_level[code]),
                        int(vocab.item_category[code]),
                    )
                    for code in b["items"]
                ),
            )
            for i, b in enumerate(rec["baskets"])
        )
        sequences.append(BasketSequence(user=user, user_id=rec["user_id"], baskets=baskets))
    return PreprocessedDataset(
        tag=header["tag"],
        vocab=vocab,
        sequences=sequences,
        n_levels=header["n_levels"],
        config_hash=header.get("config_hash", ""),
        seed=header.get("seed", 0),
    )
