"""White-box FGSM and PGD against a :class:`~qaepp.vqc.VQCClassifier`."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class AttackConfig:
    """Attack settings in pixel units.

    ``pgd_alpha`` defaults to ``2.5 * epsilon / pgd_steps``. With ``targeted``
    the attack descends the loss of ``target`` instead of ascending the loss of
    the true label.
    """

    kind: str = "fgsm"
    epsilon: float = 0.1
    pgd_steps: int = 10
    pgd_alpha: Optional[float] = None
    targeted: bool = False
    target: Optional[int] = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("fgsm", "pgd"):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.pgd_steps < 1:
            raise ValueError("pgd_steps must be >= 1")
        if self.pgd_alpha is not None and not self.pgd_alpha > 0:
            raise ValueError("pgd_alpha must be > 0")
        if self.targeted and self.target is None:
            raise ValueError("targeted attacks need a target label")

    @property
    def alpha(self) -> float:
        if self.pgd_alpha is not None:
            return self.pgd_alpha
        return 2.5 * self.epsilon / self.pgd_steps

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "epsilon": self.epsilon,
            "pgd_steps": self.pgd_steps if self.kind == "pgd" else None,
            "pgd_alpha": self.alpha if self.kind == "pgd" else None,
            "targeted": self.targeted,
            "target": self.target,
        }


def input_gradient(model, X, y) -> np.ndarray:
    """Gradient of the classifier's cross-entropy with respect to the raw pixels."""
    return model.input_gradient(np.atleast_2d(X), np.atleast_1d(y))


def _signed_step(model, X, y, config: AttackConfig) -> np.ndarray:
    if config.targeted:
        return -np.sign(input_gradient(model, X, np.full(len(X), config.target)))
    return np.sign(input_gradient(model, X, y))


def fgsm(model, X, y, epsilon: float, *, targeted=False, target=None) -> np.ndarray:
    """``clip(x + eps * sign(grad_x loss), 0, 1)`` row-wise."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if epsilon == 0:
        return X.copy()
    cfg = AttackConfig("fgsm", epsilon, targeted=targeted, target=target)
    return np.clip(X + epsilon * _signed_step(model, X, y, cfg), 0.0, 1.0)


def pgd(model, X, y, config: AttackConfig) -> np.ndarray:
    """Iterated signed steps of size ``alpha`` projected onto the eps-ball around ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    eps = config.epsilon
    if eps == 0:
        return X.copy()
    lo, hi = np.clip(X - eps, 0.0, 1.0), np.clip(X + eps, 0.0, 1.0)
    adv = X.copy()
    for _ in range(config.pgd_steps):
        adv = adv + config.alpha * _signed_step(model, adv, y, config)
        adv = np.minimum(np.maximum(adv, lo), hi)
    return adv


def attack(model, X, y, config: AttackConfig) -> np.ndarray:
    if config.kind == "fgsm":
        return fgsm(model, X, y, config.epsilon, targeted=config.targeted, target=config.target)
    return pgd(model, X, y, config)


def fgsm_sweep(model, X, y, epsilons) -> dict[float, np.ndarray]:
    """FGSM at several budgets sharing one gradient evaluation."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    signs = np.sign(input_gradient(model, X, y))
    return {float(e): np.clip(X + e * signs, 0.0, 1.0) if e else X.copy() for e in epsilons}


def with_epsilon(config: AttackConfig, epsilon: float) -> AttackConfig:
    return replace(config, epsilon=epsilon)
