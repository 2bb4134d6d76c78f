"""Scalar training losses built from autodiff primitives."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import autodiff as ad
from .autodiff import Tensor


def cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Mean negative log-likelihood of integer targets under the logits.

    logits: (..., V); targets: integer array of the leading shape; mask, if
    given, weights positions (0 excludes them from both sum and mean).
    """
    targets = np.asarray(targets)
    if targets.shape != logits.shape[:-1]:
        raise ShapeError(f"target shape {targets.shape} != {logits.shape[:-1]}")
    logp = ad.log_softmax_last(logits)
    picked = ad.gather_last(logp, targets)
    if mask is None:
        return -ad.tmean(picked)
    m = np.asarray(mask, dtype=logits.data.dtype)
    if m.shape != targets.shape:
        raise ShapeError(f"mask shape {m.shape} != {targets.shape}")
    total = float(m.sum())
    if total == 0:
        raise ShapeError("cross_entropy mask excludes every position")
    return -ad.tsum(picked * ad.constant(m)) * (1.0 / total)


def binary_cross_entropy_logits(logits: Tensor, targets: np.ndarray,
                                mask: np.ndarray | None = None) -> Tensor:
    """Mean BCE against {0,1} targets, computed from raw logits.

    Uses the softplus identity so both saturation tails stay finite.
    """
    t = ad.constant(np.asarray(targets, dtype=logits.data.dtype))
    if t.shape != logits.shape:
        raise ShapeError(f"target shape {t.shape} != {logits.shape}")
    per = ad.softplus(logits) - logits * t
    if mask is None:
        return ad.tmean(per)
    m = np.asarray(mask, dtype=logits.data.dtype)
    total = float(m.sum())
    if total == 0:
        raise ShapeError("bce mask excludes every position")
    return ad.tsum(per * ad.constant(m)) * (1.0 / total)


def hinge_terms(deltas: Tensor, signs: np.ndarray) -> Tensor:
    """Elementwise max(0, 1 - sign * delta); caller reduces as needed."""
    s = ad.constant(np.asarray(signs, dtype=deltas.data.dtype))
    return ad.relu(1.0 - deltas * s)
