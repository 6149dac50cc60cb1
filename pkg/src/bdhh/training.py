"""Mini-batch Adam training with validation-NDCG@10 checkpointing.

Fully deterministic: one seeded generator drives initialization and the
per-epoch shuffles, batches are visited in shuffle order, and gradient
accumulation order inside a batch is fixed. L2 regularization is decoupled
weight decay applied at the optimizer step to every parameter tensor.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, NonFiniteLoss
from .metrics import evaluate_model
from .model import ModelState, backward_batch, forward_batch, init_params, zero_grads

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0


def init_adam(params):
    return AdamState(m=zero_grads(params), v=zero_grads(params))


def adam_step(params, grads, state, lr, weight_decay):
    state.t += 1
    bc1 = 1.0 - ADAM_BETA1**state.t
    bc2 = 1.0 - ADAM_BETA2**state.t
    for name, p in params.items():
        g = grads[name]
        state.m[name] = ADAM_BETA1 * state.m[name] + (1.0 - ADAM_BETA1) * g
        state.v[name] = ADAM_BETA2 * state.v[name] + (1.0 - ADAM_BETA2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p -= lr * (m_hat / (np.sqrt(v_hat) + ADAM_EPS) + weight_decay * p)


@dataclass
class TrainResult:
    state: ModelState
    history: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_ndcg: float = float("nan")


def _batches(order, batch_size):
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


def train(split, graph, hp, vocab, log=None):
    """Optimize the full pipeline on the training samples.

    Keeps the parameter snapshot with the best validation NDCG@10 and stops
    early after ``hp.patience`` epochs without improvement; without
    validation samples the final epoch's parameters are kept.
    """
    train_samples = list(split.train_samples)
    if not train_samples:
        raise EmptyInput("no training samples")
    rng = np.random.default_rng(hp.seed)
    params = init_params(hp, vocab, rng)
    adam = init_adam(params)
    item_level = vocab.item_level

    best_params = None
    best_val = -np.inf
    best_epoch = -1
    stale = 0
    history = []
    order = np.arange(len(train_samples))
    for epoch in range(hp.epochs):
        rng.shuffle(order)
        losses = []
        for batch_idx in _batches(order, hp.batch_size):
            batch = [train_samples[i] for i in batch_idx]
            loss, _, cache = forward_batch(
                params, graph, batch, hp, item_level, with_cache=True
            )
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"loss became non-finite at epoch {epoch}, step {adam.t}: {loss}"
                )
            grads = backward_batch(cache)
            adam_step(params, grads, adam, hp.learning_rate, hp.l2)
            losses.append(loss)

        record = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if split.val_samples:
            val = evaluate_model(params, graph, split.val_samples, hp, item_level, ks=(10,))
            record["val_ndcg@10"] = val["ndcg@10"]
            if val["ndcg@10"] > best_val:
                best_val = val["ndcg@10"]
                best_epoch = epoch
                best_params = {name: arr.copy() for name, arr in params.items()}
                stale = 0
            else:
                stale += 1
        history.append(record)
        if log is not None:
            log(record)
        if split.val_samples and stale >= hp.patience:
            break

    final = best_params if best_params is not None else params
    return TrainResult(
        state=ModelState(params=final, hp=hp, vocab=vocab),
        history=history,
        best_epoch=best_epoch,
        best_val_ndcg=best_val if np.isfinite(best_val) else float("nan"),
    )
