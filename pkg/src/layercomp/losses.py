"""Adversarial and cycle-reconstruction objectives as pure functions.

Critic networks appear only through their scores; expectations are
arithmetic means over the supplied batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import MaskMap

__all__ = [
    "CriticScores",
    "CycleConfig",
    "wgan_critic_loss",
    "wgan_generator_loss",
    "attentional_cycle_loss",
    "combined_generator_loss",
]


def _score_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} scores must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} scores contain non-finite values")
    return arr


@dataclass(frozen=True)
class CriticScores:
    """Critic outputs on generated (fake) and reference (real) samples."""

    fake: np.ndarray
    real: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "fake", _score_vector(self.fake, "fake"))
        object.__setattr__(self, "real", _score_vector(self.real, "real"))


@dataclass(frozen=True)
class CycleConfig:
    """Weights for the cycle-reconstruction objective.

    ``fg_weight`` scales the foreground (masked) residual; ``cycle_lambda``
    weights the cycle term against the adversarial generator term.
    ``reduction`` selects mean (default) or sum over elements.
    """

    fg_weight: float = 10.0
    cycle_lambda: float = 10.0
    reduction: str = "mean"

    def __post_init__(self):
        if not (self.fg_weight >= 1.0):
            raise ValueError(f"fg_weight must be >= 1, got {self.fg_weight}")
        if not (self.cycle_lambda >= 0.0):
            raise ValueError(
                f"cycle_lambda must be nonnegative, got {self.cycle_lambda}"
            )
        if self.reduction not in ("mean", "sum"):
            raise ValueError(f"reduction must be 'mean' or 'sum', got {self.reduction!r}")


def wgan_critic_loss(scores: CriticScores) -> float:
    """Wasserstein critic objective: mean(fake) - mean(real)."""
    return float(scores.fake.mean() - scores.real.mean())


def wgan_generator_loss(fake_scores) -> float:
    """Wasserstein generator objective: -mean(fake)."""
    return float(-_score_vector(fake_scores, "fake").mean())


def attentional_cycle_loss(recovered, original, mask, cfg: CycleConfig = CycleConfig()) -> float:
    """Mask-weighted L1 reconstruction penalty.

    The absolute residual between the recovered and original stacks is
    split by the attention mask (broadcast over channels): the foreground
    part is scaled by cfg.fg_weight, the background part enters as is.
    """
    recovered = np.asarray(recovered, dtype=np.float64)
    original = np.asarray(original, dtype=np.float64)
    if recovered.shape != original.shape:
        raise ValueError(
            f"recovered shape {recovered.shape} does not match "
            f"original shape {original.shape}"
        )
    if isinstance(mask, MaskMap):
        mask = mask.data
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != recovered.shape[:2]:
        raise ValueError(
            f"mask shape {mask.shape} does not match "
            f"raster dimensions {recovered.shape[:2]}"
        )
    if recovered.ndim == 3:
        mask = mask[:, :, None]
    elif recovered.ndim != 2:
        raise ValueError(f"rasters must be 2-D or 3-D, got shape {recovered.shape}")
    residual = np.abs(recovered - original)
    reduce = np.mean if cfg.reduction == "mean" else np.sum
    return float(
        cfg.fg_weight * reduce(residual * mask) + reduce(residual * (1.0 - mask))
    )


def combined_generator_loss(
    fake_scores, recovered, original, mask, cfg: CycleConfig = CycleConfig()
) -> float:
    """Adversarial generator term plus lambda-weighted cycle term."""
    return wgan_generator_loss(fake_scores) + cfg.cycle_lambda * attentional_cycle_loss(
        recovered, original, mask, cfg
    )
