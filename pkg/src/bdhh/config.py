"""Run configuration: JSON text in, validated RunConfig out.

Unknown keys are rejected by name; types are checked per field; model
hyperparameters default to the published settings (d=128, lr=1e-5, L2=1e-3,
4 heads). Schema-dependent preprocessing fields left as null fall back to
the dataset format's manifest defaults.
"""

import json
import os
from dataclasses import dataclass, fields

from .errors import ConfigValueError, UnknownKey
from .objective import HyperParams


@dataclass
class RunConfig:
    # dataset
    transactions: str | None = None
    products: str | None = None
    format: str = "generic"
    tag: str | None = None
    grouping: str | None = None
    n_levels: int = 10
    min_item_support: int | None = None
    min_basket_size: int | None = None
    max_baskets_per_user: int | None = None
    user_sample: int | None = None
    # model / optimization
    d: int = 128
    learning_rate: float = 1e-5
    l2: float = 1e-3
    heads: int = 4
    batch_size: int = 8
    epochs: int = 20
    seed: int = 0
    max_seq_len: int = 50
    encoder_layers: int = 1
    price_pool: str = "last"
    patience: int = 5
    without_augmentation: bool = False
    without_price: bool = False
    # evaluation / output
    ks: tuple = (5, 10, 15)
    output_dir: str | None = None

    def hyperparams(self):
        try:
            return HyperParams(
                d=self.d,
                learning_rate=self.learning_rate,
                l2=self.l2,
                heads=self.heads,
                batch_size=self.batch_size,
                epochs=self.epochs,
                seed=self.seed,
                max_seq_len=self.max_seq_len,
                encoder_layers=self.encoder_layers,
                price_pool=self.price_pool,
                patience=self.patience,
                without_augmentation=self.without_augmentation,
                without_price=self.without_price,
            )
        except ValueError as exc:
            raise ConfigValueError(str(exc)) from None

    def resolved_output_dir(self):
        if self.output_dir is not None:
            return self.output_dir
        return os.environ.get("BDHH_OUTPUT_ROOT", "runs")

    def canonical_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    def hash_dict(self):
        """Fields that define the run; artifact location is excluded so the
        same experiment is byte-reproducible in any directory."""
        out = self.canonical_dict()
        out.pop("output_dir")
        return out


_INT_FIELDS = {
    "n_levels", "d", "heads", "batch_size", "epochs", "seed",
    "max_seq_len", "encoder_layers", "patience",
}
_OPTIONAL_INT_FIELDS = {"min_item_support", "min_basket_size", "max_baskets_per_user", "user_sample"}
_FLOAT_FIELDS = {"learning_rate", "l2"}
_BOOL_FIELDS = {"without_augmentation", "without_price"}
_STR_FIELDS = {"format", "price_pool"}
_OPTIONAL_STR_FIELDS = {"transactions", "products", "tag", "grouping", "output_dir"}


def _check_type(key, value):
    if key in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise ConfigValueError(f"{key} must be a boolean, got {value!r}")
    elif key in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigValueError(f"{key} must be an integer, got {value!r}")
    elif key in _OPTIONAL_INT_FIELDS:
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigValueError(f"{key} must be an integer or null, got {value!r}")
    elif key in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigValueError(f"{key} must be a number, got {value!r}")
    elif key in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigValueError(f"{key} must be a string, got {value!r}")
    elif key in _OPTIONAL_STR_FIELDS:
        if value is not None and not isinstance(value, str):
            raise ConfigValueError(f"{key} must be a string or null, got {value!r}")
    elif key == "ks":
        if (
            not isinstance(value, (list, tuple))
            or not value
            or any(isinstance(k, bool) or not isinstance(k, int) or k < 1 for k in value)
        ):
            raise ConfigValueError(f"ks must be a non-empty list of positive integers, got {value!r}")


def validate_config(raw):
    """Parse and validate structured config text (or an already-parsed dict)."""
    if isinstance(raw, str):
        try:
            data = json.loads(raw) if raw.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigValueError(f"config is not valid JSON: {exc}") from None
    else:
        data = dict(raw)
    if not isinstance(data, dict):
        raise ConfigValueError("config must be a JSON object")

    known = {f.name for f in fields(RunConfig)}
    for key in data:
        if key not in known:
            raise UnknownKey(f"unknown config key {key!r}")
        _check_type(key, data[key])
    if "ks" in data:
        data["ks"] = tuple(data["ks"])
    if "learning_rate" in data:
        data["learning_rate"] = float(data["learning_rate"])
    if "l2" in data:
        data["l2"] = float(data["l2"])

    config = RunConfig(**data)
    config.hyperparams()  # surfaces positivity/divisibility violations
    if config.format not in ("generic", "dunnhumby", "valuedshopper"):
        raise ConfigValueError(f"unknown dataset format {config.format!r}")
    if config.grouping is not None and config.grouping not in ("day", "basket"):
        raise ConfigValueError(f"grouping must be 'day' or 'basket', got {config.grouping!r}")
    if config.n_levels < 1:
        raise ConfigValueError(f"n_levels must be >= 1, got {config.n_levels}")
    for key in ("min_item_support", "min_basket_size", "max_baskets_per_user", "user_sample"):
        value = getattr(config, key)
        if value is not None and value < 1:
            raise ConfigValueError(f"{key} must be >= 1 or null, got {value}")
    return config


def load_config_file(path):
    with open(path, encoding="utf-8") as fh:
        return validate_config(fh.read())
