"""Dense numeric kernels: stable softmax, cross-entropy, Adam, gradient checking.

All arrays are plain C-order (row-major) numpy ndarrays: float32 in
production, float64 when checking gradients. Every function is pure;
`adam_step` returns a fresh state instead of mutating the one passed in.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np


def softmax(scores: np.ndarray) -> np.ndarray:
    """Normalized exponentials of `scores`, shifted by the max so huge
    scores cannot overflow."""
    s = np.asarray(scores)
    if s.size == 0:
        raise ValueError("softmax needs at least one score")
    if not np.all(np.isfinite(s)):
        raise ValueError("softmax input must be finite")
    e = np.exp(s - s.max())
    return e / e.sum()


def cross_entropy_with_grad(scores: np.ndarray, gold: int) -> tuple[float, np.ndarray]:
    """Cross-entropy of softmax(scores) against the gold class index.

    Returns (loss, grad) with grad = softmax(scores) - onehot(gold). The
    loss goes through logsumexp so a confidently wrong prediction gives a
    large finite value instead of -log(0).
    """
    s = np.asarray(scores)
    if s.ndim != 1:
        raise ValueError(f"scores must be a vector, got shape {s.shape}")
    if not 0 <= gold < s.shape[0]:
        raise IndexError(f"gold class {gold} out of range for {s.shape[0]} scores")
    shifted = s - s.max()
    loss = float(np.log(np.exp(shifted).sum()) - shifted[gold])
    grad = softmax(s)
    grad[gold] -= 1.0
    return loss, grad


@dataclass
class AdamState:
    """Adam moment estimates for one parameter array.

    The moment arrays always mirror the tracked parameter's shape and the
    step counter advances by exactly one per `adam_step`.
    """

    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: np.ndarray, lr: float = 1e-3, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros_like(param), np.zeros_like(param), 0, lr, beta1, beta2, eps)


def adam_step(params: np.ndarray, grads: np.ndarray,
              state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns (new_params, new_state)."""
    if params.shape != grads.shape or params.shape != state.first_moment.shape:
        raise ValueError(
            f"adam_step shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"moments {state.first_moment.shape}")
    t = state.step + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * (grads * grads)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, first_moment=m, second_moment=v, step=t)


LossAndGradFn = Callable[[Sequence[np.ndarray]], tuple[float, Sequence[np.ndarray]]]


def finite_difference_gradcheck(loss_and_grad: LossAndGradFn,
                                params: Sequence[np.ndarray],
                                step: float = 1e-5) -> float:
    """Worst relative disagreement between analytic and central-difference
    gradients, over every scalar parameter.

    `loss_and_grad(params)` must return (loss, grads) with grads shaped
    like params. Parameters are copied to float64 first; the relative
    error per scalar is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    work = [np.array(p, dtype=np.float64) for p in params]
    _, analytic = loss_and_grad(work)
    worst = 0.0
    for p, g in zip(work, analytic):
        g = np.asarray(g, dtype=np.float64)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = p[ix]
            h = step * max(1.0, abs(orig))
            p[ix] = orig + h
            up, _ = loss_and_grad(work)
            p[ix] = orig - h
            down, _ = loss_and_grad(work)
            p[ix] = orig
            numeric = (up - down) / (2.0 * h)
            err = abs(float(g[ix]) - numeric) / max(1e-8, abs(float(g[ix])) + abs(numeric))
            worst = max(worst, err)
    return worst
