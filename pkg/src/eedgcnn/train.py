"""Optimisers and the training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig, derive_rng
from .tensor import Tape, Tensor

log = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"loss became {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class Adam:
    def __init__(self, params: list[Tensor], lr: float = 6e-5, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            tmp = np.multiply(g, 1.0 - b1)
            m *= b1
            m += tmp
            np.multiply(g, g, out=tmp)
            tmp *= 1.0 - b2
            v *= b2
            v += tmp
            # lr * (m / c1) / (sqrt(v / c2) + eps), without temporaries per term
            np.sqrt(v, out=tmp)
            tmp *= 1.0 / np.sqrt(c2)
            tmp += self.eps
            np.divide(m, tmp, out=tmp)
            tmp *= self.lr / c1
            p.data -= tmp

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


class SGD:
    def __init__(self, params: list[Tensor], lr: float):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            if p.grad is not None:
                p.data -= self.lr * p.grad

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def make_optimizer(params, config: TrainConfig):
    if config.optimizer == "sgd":
        return SGD(params, config.learning_rate)
    return Adam(params, config.learning_rate, config.beta1, config.beta2, config.eps)


@dataclass
class TrainResult:
    model: object
    losses: list[float] = field(default_factory=list)      # summed train loss per epoch
    val_scores: list[float] = field(default_factory=list)  # validation F1 per epoch, if any
    best_epoch: int = -1
    epochs_run: int = 0


def _snapshot(params):
    return [p.data.copy() for p in params]


def train(model, sentences, config: TrainConfig, val_sentences=None, score_fn=None, on_epoch=None) -> TrainResult:
    """Minimise summed cross-entropy over the model's training queries.

    With ``val_sentences`` the parameters with the best ``score_fn`` value
    (default: classification F1 for argument models, trigger F1 otherwise)
    are restored at the end, and ``config.patience`` enables early stopping.
    """
    config.validate()
    queries = model.queries_for(sentences)
    if not queries:
        raise ValueError("training corpus yields no queries")
    params = model.params()
    opt = make_optimizer(params, config)
    order_rng = derive_rng(config.seed, "shuffle")
    result = TrainResult(model)
    if val_sentences is not None and score_fn is None:
        from .evaluate import default_score
        score_fn = default_score
    best, best_state, stale = -np.inf, None, 0
    for epoch in range(config.epochs):
        order = order_rng.permutation(len(queries))
        total = 0.0
        for bi, lo in enumerate(range(0, len(order), config.batch_size)):
            batch = [queries[i] for i in order[lo:lo + config.batch_size]]
            tape = Tape(seed=derive_rng(config.seed, "dropout", epoch, bi).integers(2**63), training=True)
            loss, _ = model.loss(tape, batch, reduction=config.loss_reduction)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(epoch, bi, value)
            opt.zero_grad()
            tape.backward(loss)
            opt.step()
            total += value
        result.losses.append(total)
        result.epochs_run = epoch + 1
        msg = f"epoch {epoch + 1}/{config.epochs} loss {total:.6f}"
        if val_sentences is not None:
            score = score_fn(model, val_sentences)
            result.val_scores.append(score)
            msg += f" val {score:.4f}"
            if score > best:
                best, best_state, stale = score, _snapshot(params), 0
                result.best_epoch = epoch
            else:
                stale += 1
        log.info(msg)
        if on_epoch is not None and on_epoch(epoch, result) is False:
            break
        if val_sentences is not None and config.patience and stale >= config.patience:
            log.info("early stop after %d stale epochs", stale)
            break
    opt.zero_grad()
    if best_state is not None:
        for p, data in zip(params, best_state):
            p.data = data
    return result
