"""Scoring, loss, hyperparameters and ablation wiring.

Item scores are inner products of the two preference vectors with the BASE
embedding tables (price term indexed through the item -> level map):

    y_i = phi_p . z_price[level(i)] + phi_d . z_id[i]

followed by a softmax over the full vocabulary. The loss is the summed
binary cross-entropy of the softmax probabilities against the multi-hot
next-basket vector, with probabilities clamped at 1e-12.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, UnknownVariant
from .nnops import softmax_rows

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class HyperParams:
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

    def __post_init__(self):
        if self.d < 1 or self.heads < 1:
            raise ValueError("d and heads must be positive")
        if self.d % self.heads != 0:
            raise ValueError(f"d={self.d} must be divisible by heads={self.heads}")
        for name in ("learning_rate", "batch_size", "epochs", "max_seq_len", "encoder_layers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.price_pool not in ("last", "mean"):
            raise ValueError("price_pool must be 'last' or 'mean'")


@dataclass(frozen=True)
class Variant:
    name: str
    without_augmentation: bool = False
    without_price: bool = False


VARIANTS = {
    "bdhh": Variant("bdhh"),
    "no_augmentation": Variant("no_augmentation", without_augmentation=True),
    "no_price": Variant("no_price", without_price=True),
}


def build_variant(hp):
    """Model wiring from the hyperparameter ablation flags."""
    if hp.without_augmentation and hp.without_price:
        return Variant("no_augmentation+no_price", True, True)
    if hp.without_augmentation:
        return VARIANTS["no_augmentation"]
    if hp.without_price:
        return VARIANTS["no_price"]
    return VARIANTS["bdhh"]


def variant_by_name(name):
    if name not in VARIANTS:
        raise UnknownVariant(f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}")
    return VARIANTS[name]


def apply_variant(hp, variant):
    return replace(
        hp,
        without_augmentation=variant.without_augmentation,
        without_price=variant.without_price,
    )


def score_items(phi_p, phi_d, tables, item_level, without_price=False):
    """Scores and softmax probabilities over the full item vocabulary."""
    phi_d = np.asarray(phi_d, dtype=np.float64)
    if phi_d.shape != (tables.z_id.shape[1],):
        raise DimensionMismatch("phi_d width does not match the item table")
    y = tables.z_id @ phi_d
    if not without_price:
        phi_p = np.asarray(phi_p, dtype=np.float64)
        if phi_p.shape != (tables.z_price.shape[1],):
            raise DimensionMismatch("phi_p width does not match the price table")
        y = y + tables.z_price[item_level] @ phi_p
    y_hat = softmax_rows(y[None, :])[0]
    return y, y_hat


def multi_hot(target_items, n_items):
    alpha = np.zeros(n_items, dtype=np.float64)
    alpha[np.asarray(sorted(target_items), dtype=np.int64)] = 1.0
    return alpha


def nbr_loss(y_hat, alpha):
    """Summed BCE of the item probabilities against the multi-hot target."""
    if y_hat.shape != alpha.shape:
        raise DimensionMismatch("probability and target vectors differ in length")
    clamped = np.clip(y_hat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-(alpha * np.log(clamped) + (1.0 - alpha) * np.log1p(-clamped)).sum())


def nbr_loss_grad_scores(y_hat, alpha):
    """d(loss)/d(scores) through the clamp and the softmax."""
    clamped = np.clip(y_hat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    grad_p = -alpha / clamped + (1.0 - alpha) / (1.0 - clamped)
    grad_p[(y_hat < PROB_CLAMP) | (y_hat > 1.0 - PROB_CLAMP)] = 0.0
    return y_hat * (grad_p - grad_p @ y_hat)
