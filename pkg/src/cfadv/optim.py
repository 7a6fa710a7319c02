from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # multiplicative learning-rate decay applied after every step
    decay: float = 1.0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")


class Adam:
    """Adam over a list of arrays, updated in place.

    Works unchanged on a batch of independent problems stacked along the first
    axis, since every update is elementwise.
    """

    def __init__(self, params: list[np.ndarray], cfg: AdamConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0
        self.lr = cfg.lr

    def step(self, grads: list[np.ndarray], mask: np.ndarray | None = None) -> None:
        """Apply one update. ``mask`` (rows) freezes rows of batched parameters."""
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            upd = self.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
            if mask is not None:
                upd = upd * mask.reshape((-1,) + (1,) * (upd.ndim - 1))
            p -= upd
        self.lr *= cfg.decay
