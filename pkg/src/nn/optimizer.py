"""
Mridangam Stroke Transcriber - Adam Optimizer
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from src.nn.layers import NetworkError


@dataclass
class AdamState:
    """First and second moment estimates, one pair per parameter array."""

    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(
    params: List[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float = 0.0002,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    t: int = 1,
) -> Tuple[List[np.ndarray], AdamState]:
    """
    One bias-corrected Adam update, applied to `params` in place.

    Args:
        params: Parameter arrays (updated in place)
        grads: Gradients matching `params`
        state: Moment estimates (updated in place; created if empty)
        t: 1-based step count used for bias correction

    Returns:
        (params, state)

    Raises:
        NetworkError: If t < 1 or shapes differ
    """
    if t < 1:
        raise NetworkError(f"Adam step count must be >= 1, got {t}")
    if len(params) != len(grads):
        raise NetworkError(f"{len(params)} parameter arrays but {len(grads)} gradients")
    if state.m and len(state.m) != len(params):
        raise NetworkError(f"Adam state holds {len(state.m)} arrays for {len(params)} parameters")
    for p, g, m in zip(params, grads, state.m or params):
        if p.shape != g.shape or p.shape != m.shape:
            raise NetworkError(f"Shape mismatch: parameter {p.shape}, gradient {g.shape}, moment {m.shape}")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]

    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t

    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype, copy=False)

    return params, state
