"""Deterministic on-disk artifacts.

Checkpoints use a purpose-built binary container (magic, canonical-JSON
meta block, raw little-endian float64 tensors in declared order) so that
identical runs produce byte-identical files; zip-based containers embed
timestamps and would not. Reports are canonical JSON plus a TSV table.
"""

import hashlib
import json
import os

import numpy as np
from filelock import FileLock

from .dataio import Vocabulary
from .errors import ArtifactError, MissingFile
from .model import ModelState
from .objective import HyperParams

CHECKPOINT_MAGIC = b"BDHHCKP1"
CHECKPOINT_VERSION = 1


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config_dict):
    return hashlib.sha256(canonical_json(config_dict).encode("utf-8")).hexdigest()


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def locked_write_bytes(path, data):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with FileLock(str(path) + ".lock"):
        with open(path, "wb") as fh:
            fh.write(data)


def locked_write_text(path, text):
    locked_write_bytes(path, text.encode("utf-8"))


def checkpoint_bytes(state, extra_meta=None):
    params = state.params
    names = sorted(params)
    meta = {
        "version": CHECKPOINT_VERSION,
        "hp": {k: getattr(state.hp, k) for k in state.hp.__dataclass_fields__},
        "seed": state.hp.seed,
        "vocab": {
            "items": state.vocab.item_ids,
            "categories": state.vocab.category_labels,
            "item_level": state.vocab.item_level.tolist(),
            "item_category": state.vocab.item_category.tolist(),
            "n_levels": state.vocab.n_levels,
        },
        "tensors": {
            name: {"dtype": "<f8", "shape": list(params[name].shape)} for name in names
        },
        "extra": extra_meta or {},
    }
    meta_blob = canonical_json(meta).encode("utf-8")
    parts = [
        CHECKPOINT_MAGIC,
        len(meta_blob).to_bytes(8, "little"),
        meta_blob,
    ]
    for name in names:
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        parts.append(arr.tobytes())
    return b"".join(parts)


def save_checkpoint(path, state, extra_meta=None):
    locked_write_bytes(path, checkpoint_bytes(state, extra_meta))


def load_checkpoint(path):
    if not os.path.exists(path):
        raise MissingFile(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ArtifactError(f"{path} is not a checkpoint file")
    offset = len(CHECKPOINT_MAGIC)
    meta_len = int.from_bytes(blob[offset : offset + 8], "little")
    offset += 8
    meta = json.loads(blob[offset : offset + meta_len].decode("utf-8"))
    offset += meta_len
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ArtifactError(f"unsupported checkpoint version {meta.get('version')}")

    params = {}
    for name in sorted(meta["tensors"]):
        spec = meta["tensors"][name]
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        arr = np.frombuffer(blob[offset : offset + nbytes], dtype="<f8").reshape(shape)
        params[name] = arr.copy()
        offset += nbytes
    if offset != len(blob):
        raise ArtifactError(f"{path} has trailing bytes; file is corrupt")

    vocab_meta = meta["vocab"]
    vocab = Vocabulary(
        item_index={item: code for code, item in enumerate(vocab_meta["items"])},
        category_index={label: code for code, label in enumerate(vocab_meta["categories"])},
        n_levels=vocab_meta["n_levels"],
        item_level=np.array(vocab_meta["item_level"], dtype=np.int64),
        item_category=np.array(vocab_meta["item_category"], dtype=np.int64),
        item_ids=vocab_meta["items"],
        category_labels=vocab_meta["categories"],
    )
    hp = HyperParams(**meta["hp"])
    return ModelState(params=params, hp=hp, vocab=vocab), meta


def save_report(reports, json_path, tsv_path):
    """Write one or more MetricsReports as canonical JSON + a TSV table."""
    if not isinstance(reports, list):
        reports = [reports]
    payload = {"format": "bdhh-report", "version": 1, "reports": [r.to_dict() for r in reports]}
    locked_write_text(json_path, canonical_json(payload) + "\n")
    lines = []
    header_done = False
    for report in reports:
        rows = report.tsv_rows()
        if header_done:
            rows = rows[1:]
        header_done = True
        lines.extend("\t".join(row) for row in rows)
    locked_write_text(tsv_path, "\n".join(lines) + "\n")


def save_training_log(path, history, meta):
    payload = {"format": "bdhh-train-log", "version": 1, "meta": meta, "history": history}
    locked_write_text(path, canonical_json(payload) + "\n")
