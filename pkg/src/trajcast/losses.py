"""Multi-task loss assembly.

Three components, combined with unit weights:

* point loss    - mean over pedestrians of the summed *squared* Euclidean
                  errors of the per-step predictions.
* KL loss       - mean over pedestrians of the summed closed-form KL of the
                  per-step posteriors against the standard normal.
* regression    - mean over pedestrians of the summed *unsquared* Euclidean
                  errors of the refined trajectory (raw + offsets).

The squared/unsquared asymmetry between the point and regression terms is
deliberate and load-bearing for training behavior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, mul, reduce_sum, reshape, row_norms, square, sub
from .errors import UsageError
from .heads import RawPrediction
from .nn import LatentGaussian, kl_standard_normal


@dataclass(frozen=True)
class LossReport:
    l_ap: float
    l_kld: float
    l_r: float
    total: float

    @classmethod
    def from_components(cls, l_ap: float, l_kld: float, l_r: float) -> "LossReport":
        return cls(l_ap=l_ap, l_kld=l_kld, l_r=l_r, total=l_ap + l_kld + l_r)

    def finite(self) -> bool:
        return all(np.isfinite(v) for v in (self.l_ap, self.l_kld, self.l_r, self.total))


def loss_ap(gt_future: np.ndarray, raw: RawPrediction) -> Tensor:
    """(1/n) * sum over pedestrians and steps of squared point errors."""
    gt_future = np.asarray(gt_future, dtype=np.float64)
    n, delta = gt_future.shape[0], gt_future.shape[1]
    if len(raw.steps) != delta:
        raise UsageError(f"prediction has {len(raw.steps)} steps, ground truth {delta}")
    total = None
    for k, step in enumerate(raw.steps):
        if step.data.shape != (n, 2):
            raise UsageError(f"step {k} has shape {step.data.shape}, expected ({n}, 2)")
        term = reduce_sum(square(sub(step, Tensor(gt_future[:, k, :]))))
        total = term if total is None else add(total, term)
    return mul(total, 1.0 / n)


def loss_kld(posteriors: list[LatentGaussian], n_peds: int) -> Tensor:
    """(1/n) * sum over pedestrians and steps of closed-form KL terms."""
    if not posteriors:
        raise UsageError("KL loss needs at least one posterior (train-mode rollout)")
    total = None
    for post in posteriors:
        term = reduce_sum(kl_standard_normal(post))
        total = term if total is None else add(total, term)
    return mul(total, 1.0 / n_peds)


def loss_r(gt_future: np.ndarray, raw_flat: Tensor, offsets: Tensor) -> Tensor:
    """(1/n) * sum over pedestrians and steps of unsquared refined errors.

    Pass a detached raw_flat to keep this loss from training the point
    predictors (the default wiring).
    """
    gt_future = np.asarray(gt_future, dtype=np.float64)
    n, delta = gt_future.shape[0], gt_future.shape[1]
    flat_gt = Tensor(gt_future.reshape(n, 2 * delta))
    if raw_flat.data.shape != (n, 2 * delta) or offsets.data.shape != (n, 2 * delta):
        raise UsageError(
            f"raw {raw_flat.data.shape} and offsets {offsets.data.shape}"
            f" must both be ({n}, {2 * delta})"
        )
    residual = sub(sub(flat_gt, raw_flat), offsets)
    norms = row_norms(reshape(residual, (n * delta, 2)))
    return mul(reduce_sum(norms), 1.0 / n)
