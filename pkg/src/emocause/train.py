"""Multi-task loss, Adam optimization loop, and teacher-forced statistics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .model import ForwardPass, ResponseModel
from .nn import Tensor, no_grad, ops, save_checkpoint

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


def compute_losses(fp: ForwardPass, ex, loss_weight: float) -> tuple[Tensor, Tensor, Tensor]:
    """Emotion cross-entropy, generation NLL (teacher forced), weighted sum."""
    if len(ex.target_ids) == 0:
        raise ValueError(f"conversation {ex.id}: empty target")
    q = ops.reshape(fp.emotion_probs, (1, -1))
    l_e = ops.sum_all(ops.neg(ops.log(ops.pick(
        q, np.array([0]), np.array([ex.emotion_label])))))
    t = len(ex.target_ids)
    picked = ops.pick(fp.mix.mixed, np.arange(t), ex.target_ids)
    l_g = ops.neg(ops.sum_all(ops.log(picked)))
    total = ops.add(l_g, ops.scale(l_e, loss_weight))
    return l_e, l_g, total


def learning_rate(cfg: RunConfig, step: int) -> float:
    if cfg.lr_decay >= 1.0:
        return cfg.lr
    lr = cfg.lr * (cfg.lr_decay ** (step // cfg.lr_decay_interval))
    return max(lr, cfg.lr_floor)


class Adam:
    def __init__(self, registry, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.registry = registry
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {p.name: np.zeros_like(p.data) for p in registry.trainable()}
        self.v = {p.name: np.zeros_like(p.data) for p in registry.trainable()}

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for p in self.registry.trainable():
            g = p.tensor.grad
            if g is None:
                continue
            m = self.m[p.name]
            v = self.v[p.name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= (lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)


@dataclass
class TrainResult:
    steps: int
    history: list[tuple[int, float, float, float, float]] = field(default_factory=list)
    # (step, total, l_g, l_e, lr)
    stopped_early: bool = False
    best_val_ppl: float = math.inf


def teacher_forced_stats(model: ResponseModel, examples) -> dict:
    """Aggregate NLL, per-word perplexity, token and emotion accuracy."""
    nll = 0.0
    tokens = 0
    correct = 0
    emo_correct = 0
    with no_grad():
        for ex in examples:
            fp = model.forward(ex)
            t = len(ex.target_ids)
            probs = fp.mix.mixed.data[np.arange(t), ex.target_ids]
            with np.errstate(divide="ignore"):
                nll -= float(np.log(probs.astype(np.float64)).sum())
            tokens += t
            correct += int((fp.mix.mixed.data.argmax(axis=1) == ex.target_ids).sum())
            emo_correct += int(int(fp.emotion_probs.data.argmax()) == ex.emotion_label)
    ppl = math.exp(nll / tokens) if tokens else math.inf
    return {
        "nll": nll,
        "tokens": tokens,
        "ppl": ppl,
        "token_accuracy": correct / tokens if tokens else 0.0,
        "emotion_accuracy": emo_correct / len(examples) if examples else 0.0,
    }


def train(model: ResponseModel, examples, cfg: RunConfig, valid_examples=None,
          checkpoint_path=None, log_stream=None) -> TrainResult:
    """Seeded-shuffle Adam loop with periodic validation and early stopping.

    Per (seed, config) on a fixed platform the loss sequence is
    deterministic.  A non-finite loss aborts after writing the last good
    parameter state to ``checkpoint_path``.
    """
    if not examples:
        raise ValueError("no training examples")
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(model.registry)
    result = TrainResult(steps=0)
    last_good = model.registry.state()
    best_val = math.inf
    bad_validations = 0
    order: list[int] = []

    def log_line(text):
        if log_stream is not None:
            log_stream.write(text + "\n")

    log_line("step, total, L_g, L_e, lr")
    for step in range(1, cfg.max_steps + 1):
        batch: list[int] = []
        while len(batch) < min(cfg.batch_size, len(examples)):
            if not order:
                order = list(rng.permutation(len(examples)))
            batch.append(order.pop())
        model.registry.zero_grads()
        tot = lg = le = 0.0
        inv = 1.0 / len(batch)
        for idx in batch:
            fp = model.forward(examples[idx])
            l_e, l_g, total = compute_losses(fp, examples[idx], cfg.loss_weight)
            ops.scale(total, inv).backward()
            tot += total.item() * inv
            lg += l_g.item() * inv
            le += l_e.item() * inv
        if not math.isfinite(tot):
            if checkpoint_path:
                model.registry.load_state(last_good)
                save_checkpoint(checkpoint_path, model.registry)
            raise TrainingDiverged(
                f"non-finite loss {tot} at step {step}; last good state saved"
            )
        lr = learning_rate(cfg, step)
        optimizer.step(lr)
        result.steps = step
        result.history.append((step, tot, lg, le, lr))
        log_line(f"{step}, {tot:.6f}, {lg:.6f}, {le:.6f}, {lr:.6g}")

        if cfg.validate_every and step % cfg.validate_every == 0:
            last_good = model.registry.state()
            if valid_examples:
                val = teacher_forced_stats(model, valid_examples)
                log_line(f"# validation step={step} ppl={val['ppl']:.6f}")
                if val["ppl"] < best_val - 1e-9:
                    best_val = val["ppl"]
                    bad_validations = 0
                else:
                    bad_validations += 1
                    if bad_validations >= cfg.patience:
                        result.stopped_early = True
                        break
            if cfg.accuracy_stop > 0:
                stats = teacher_forced_stats(model, examples)
                log_line(
                    f"# train-check step={step} ppl={stats['ppl']:.6f} "
                    f"acc={stats['token_accuracy']:.4f}"
                )
                if (stats["token_accuracy"] >= cfg.accuracy_stop
                        and stats["ppl"] <= 1.2):
                    result.stopped_early = True
                    break
    result.best_val_ppl = best_val
    if checkpoint_path:
        save_checkpoint(checkpoint_path, model.registry)
    return result
