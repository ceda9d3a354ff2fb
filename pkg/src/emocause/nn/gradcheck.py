"""Finite-difference verification of analytic gradients.

The loss closure is evaluated in double precision; every trainable
parameter is checked either exhaustively or on a deterministic random
sample of at least 32 scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autograd import no_grad
from .params import ParamRegistry


@dataclass
class ParamCheck:
    name: str
    max_rel_err: float
    worst_index: tuple
    n_checked: int
    passed: bool


@dataclass
class GradientCheckReport:
    tolerance: float
    epsilon: float
    per_param: dict[str, ParamCheck] = field(default_factory=dict)

    @property
    def max_rel_err(self) -> float:
        return max((c.max_rel_err for c in self.per_param.values()), default=0.0)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.per_param.values())

    def summary(self) -> str:
        lines = [f"gradient check (eps={self.epsilon:g}, tol={self.tolerance:g})"]
        for c in sorted(self.per_param.values(), key=lambda c: -c.max_rel_err):
            status = "ok" if c.passed else "FAIL"
            lines.append(
                f"  {status:4s} {c.name:40s} max_rel_err={c.max_rel_err:.3e} "
                f"at {c.worst_index} ({c.n_checked} checked)"
            )
        return "\n".join(lines)


def gradient_check(
    loss_fn,
    registry: ParamRegistry,
    epsilon: float = 1e-4,
    tolerance: float = 1e-3,
    samples_per_param: int = 32,
    seed: int = 0,
) -> GradientCheckReport:
    """Compare tape gradients of ``loss_fn()`` against central differences."""
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in [1e-6, 1e-3], got {epsilon}")
    if samples_per_param < 32:
        raise ValueError("samples_per_param must be at least 32")
    for p in registry.trainable():
        if p.data.dtype != np.float64:
            raise ValueError(
                f"gradient_check requires float64 parameters; {p.name} is "
                f"{p.data.dtype}"
            )

    registry.zero_grads()
    loss = loss_fn()
    value = loss.item()
    if not math.isfinite(value):
        raise ValueError(f"loss is not finite: {value}")
    loss.backward()

    rng = np.random.default_rng(seed)
    report = GradientCheckReport(tolerance=tolerance, epsilon=epsilon)
    for p in registry.trainable():
        grad = p.tensor.grad
        analytic = np.zeros_like(p.data) if grad is None else grad
        flat = p.data.reshape(-1)
        size = flat.shape[0]
        if size <= samples_per_param:
            idx = np.arange(size)
        else:
            idx = np.sort(rng.choice(size, size=samples_per_param, replace=False))
        worst = 0.0
        worst_index: tuple = ()
        for i in idx:
            orig = flat[i]
            flat[i] = orig + epsilon
            with no_grad():
                lp = loss_fn().item()
            flat[i] = orig - epsilon
            with no_grad():
                lm = loss_fn().item()
            flat[i] = orig
            if not (math.isfinite(lp) and math.isfinite(lm)):
                raise ValueError(f"loss is not finite while perturbing {p.name}")
            numeric = (lp - lm) / (2.0 * epsilon)
            a = float(analytic.reshape(-1)[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel
                worst_index = np.unravel_index(i, p.data.shape)
        report.per_param[p.name] = ParamCheck(
            name=p.name,
            max_rel_err=worst,
            worst_index=tuple(int(x) for x in worst_index),
            n_checked=len(idx),
            passed=worst < tolerance,
        )
    return report
