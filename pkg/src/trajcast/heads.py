"""Trajectory heads: baseline, cascaded, and sliding-window point predictors.

All three decompose a delta-step forecast into per-step CVAE point
predictions over a stack of pedestrians (rows). They differ only in how the
per-step history input is assembled:

* baseline   - every step sees the original observed past.
* cascaded   - step k sees the observed past plus all k points predicted so
               far, through its own unit (input widths grow with k).
* slide      - one shared unit sees a fixed-length window that starts on the
               observed past and slides onto the predictions: while
               predictions are scarce it holds the most recent
               (alpha - k) observed plus all k predicted points, and once
               k >= alpha it holds the last alpha predicted points only.

Predicted points (never ground truth, unless teacher forcing is explicitly
requested) are fed forward in both train and infer modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arch import ArchConfig
from .autodiff import Tensor, concat, narrow
from .cvae import CvaeUnit, StepPrediction
from .errors import UsageError
from .nn import LatentGaussian, ParamStore

HEAD_KINDS = ("baseline", "cascaded", "slide")


@dataclass
class RawPrediction:
    """Per-step predicted points for a stack of pedestrians."""

    steps: list[Tensor]  # delta tensors of shape [n, 2]
    posteriors: list[LatentGaussian] | None = None
    step_inputs: list[np.ndarray] | None = None

    def stacked(self) -> np.ndarray:
        """Points as an [n, delta, 2] array."""
        return np.stack([s.data for s in self.steps], axis=1)

    def flat(self) -> Tensor:
        """Points as a graph-connected [n, 2*delta] tensor."""
        return concat(self.steps, axis=1)


class _Head:
    kind = ""

    def __init__(self, tau: int, delta: int, arch: ArchConfig):
        if tau < 1 or delta < 1:
            raise UsageError(f"horizons must be positive, got tau={tau} delta={delta}")
        self.tau = tau
        self.delta = delta
        self.arch = arch
        self.units: list[CvaeUnit] = []

    def unit_for_step(self, k: int) -> CvaeUnit:
        raise NotImplementedError

    def step_input(self, past_flat: Tensor, fed: list[Tensor], k: int) -> Tensor:
        raise NotImplementedError

    def param_count(self) -> int:
        return sum(u.param_count() for u in self.units)

    def rollout(
        self,
        past: np.ndarray,
        mode: str,
        noise: np.ndarray,
        gt_future: np.ndarray | None = None,
        teacher_forcing: bool = False,
        detach_fed: bool = False,
        record_inputs: bool = False,
    ) -> RawPrediction:
        """Predict delta points for every row of `past` ([n, tau, 2]).

        `noise` is [delta, n, latent_dim]; injecting it explicitly keeps
        rollouts deterministic and testable. Train mode additionally needs
        gt_future [n, delta, 2] and returns the per-step posteriors.
        With detach_fed the points appended to the growing history are
        treated as constants (pseudo-labels), so no gradient flows back
        through the recursion; forward values are unchanged.
        """
        past = np.asarray(past, dtype=np.float64)
        if past.ndim != 3 or past.shape[1] != self.tau or past.shape[2] != 2:
            raise UsageError(f"past must be [n, {self.tau}, 2], got {past.shape}")
        n = past.shape[0]
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != (self.delta, n, self.arch.latent_dim):
            raise UsageError(
                f"noise must be [{self.delta}, {n}, {self.arch.latent_dim}], got {noise.shape}"
            )
        if mode not in ("train", "infer"):
            raise UsageError(f"mode must be 'train' or 'infer', got {mode!r}")
        if mode == "train":
            gt_future = np.asarray(gt_future, dtype=np.float64) if gt_future is not None else None
            if gt_future is None or gt_future.shape != (n, self.delta, 2):
                raise UsageError(f"train mode needs gt_future [n={n}, {self.delta}, 2]")

        past_flat = Tensor(past.reshape(n, 2 * self.tau))
        steps: list[Tensor] = []
        fed: list[Tensor] = []
        posteriors: list[LatentGaussian] = []
        inputs: list[np.ndarray] = []
        for k in range(self.delta):
            inp = self.step_input(past_flat, fed, k)
            if record_inputs:
                inputs.append(inp.data.copy())
            unit = self.unit_for_step(k)
            if mode == "train":
                gt_point = Tensor(gt_future[:, k, :])
                pred: StepPrediction = unit.train_forward(inp, gt_point, noise[k])
                posteriors.append(pred.posterior)
                fed_point = gt_point if teacher_forcing else pred.point
            else:
                pred = unit.infer_forward(inp, noise[k])
                fed_point = pred.point
            fed.append(fed_point.detach() if detach_fed else fed_point)
            steps.append(pred.point)
        return RawPrediction(
            steps=steps,
            posteriors=posteriors if mode == "train" else None,
            step_inputs=inputs if record_inputs else None,
        )


class BaselineHead(_Head):
    """delta independent units, each mapping the original past to one point."""

    kind = "baseline"

    def __init__(self, store: ParamStore, tau: int, delta: int, arch: ArchConfig, rng, prefix="head"):
        super().__init__(tau, delta, arch)
        self.units = [
            CvaeUnit(store, f"{prefix}.u{k:02d}", tau, arch, rng) for k in range(delta)
        ]

    def unit_for_step(self, k: int) -> CvaeUnit:
        return self.units[k]

    def step_input(self, past_flat: Tensor, fed: list[Tensor], k: int) -> Tensor:
        return past_flat


class CascadedHead(_Head):
    """delta unshared units on growing pasts: step k consumes tau + k points."""

    kind = "cascaded"

    def __init__(self, store: ParamStore, tau: int, delta: int, arch: ArchConfig, rng, prefix="head"):
        super().__init__(tau, delta, arch)
        self.units = [
            CvaeUnit(store, f"{prefix}.u{k:02d}", tau + k, arch, rng) for k in range(delta)
        ]

    def unit_for_step(self, k: int) -> CvaeUnit:
        return self.units[k]

    def step_input(self, past_flat: Tensor, fed: list[Tensor], k: int) -> Tensor:
        if k == 0:
            return past_flat
        return concat([past_flat, *fed[:k]], axis=1)


class SlideHead(_Head):
    """One shared unit on a fixed-length window of alpha points."""

    kind = "slide"

    def __init__(
        self,
        store: ParamStore,
        tau: int,
        delta: int,
        alpha: int,
        arch: ArchConfig,
        rng,
        prefix="head",
    ):
        super().__init__(tau, delta, arch)
        if alpha < 1 or alpha > tau:
            raise UsageError(f"alpha must satisfy 1 <= alpha <= tau, got alpha={alpha} tau={tau}")
        self.alpha = alpha
        self.units = [CvaeUnit(store, f"{prefix}.shared", alpha, arch, rng)]

    def unit_for_step(self, k: int) -> CvaeUnit:
        return self.units[0]

    def step_input(self, past_flat: Tensor, fed: list[Tensor], k: int) -> Tensor:
        a = self.alpha
        if k >= a:
            return concat(fed[k - a : k], axis=1)
        observed = a - k
        obs = narrow(past_flat, 1, 2 * (self.tau - observed), 2 * self.tau)
        if k == 0:
            return obs
        return concat([obs, *fed[:k]], axis=1)


def build_head(
    kind: str,
    store: ParamStore,
    tau: int,
    delta: int,
    alpha: int,
    arch: ArchConfig,
    rng,
    prefix: str = "head",
) -> _Head:
    if kind == "baseline":
        return BaselineHead(store, tau, delta, arch, rng, prefix)
    if kind == "cascaded":
        return CascadedHead(store, tau, delta, arch, rng, prefix)
    if kind == "slide":
        return SlideHead(store, tau, delta, alpha, arch, rng, prefix)
    raise UsageError(f"unknown head kind {kind!r}; expected one of {HEAD_KINDS}")


def count_parameters(head: _Head) -> int:
    """Exact trainable-scalar count of a head, biases included."""
    return head.param_count()
