"""The full forecaster: one trajectory head plus an optional social refiner."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .arch import ArchConfig
from .autodiff import Tensor, add, backward, concat, no_grad
from .datasets import SceneWindow
from .errors import UsageError
from .heads import HEAD_KINDS, RawPrediction, build_head
from .losses import LossReport, loss_ap, loss_kld, loss_r
from .nn import ParamStore
from .social import SocialRefiner, build_mask


@dataclass(frozen=True)
class ModelConfig:
    head: str = "cascaded"
    refiner: bool = True
    tau: int = 8
    delta: int = 12
    alpha: int = 8
    width_scale: int = 1
    latent_dim: int = 0  # 0: use the width table's value for this scale
    mask_radius: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.head not in HEAD_KINDS:
            raise UsageError(f"unknown head kind {self.head!r}; expected one of {HEAD_KINDS}")
        for name in ("tau", "delta", "alpha", "width_scale"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.latent_dim < 0:
            raise UsageError(f"latent_dim must be >= 0, got {self.latent_dim}")
        if self.mask_radius <= 0:
            raise UsageError(f"mask_radius must be positive, got {self.mask_radius}")

    def with_seed(self, seed: int) -> "ModelConfig":
        return replace(self, seed=seed)

    def arch_config(self) -> ArchConfig:
        arch = ArchConfig.narrowed(self.width_scale)
        if self.latent_dim:
            arch = replace(arch, latent_dim=self.latent_dim)
        return arch


@dataclass
class WindowPrediction:
    raw: np.ndarray  # [n, delta, 2]
    refined: np.ndarray  # [n, delta, 2] (== raw when no refiner)
    offsets: np.ndarray  # [n, delta, 2] (zeros when no refiner)


class ForecastModel:
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.arch = cfg.arch_config()
        self.store = ParamStore()
        root = np.random.SeedSequence(cfg.seed)
        head_rng, refiner_rng = (np.random.default_rng(s) for s in root.spawn(2))
        self.head = build_head(
            cfg.head, self.store, cfg.tau, cfg.delta, cfg.alpha, self.arch, head_rng
        )
        self.refiner = (
            SocialRefiner(self.store, cfg.tau, cfg.delta, self.arch, refiner_rng, cfg.mask_radius)
            if cfg.refiner
            else None
        )

    def param_count(self) -> int:
        return self.head.param_count() + (self.refiner.param_count() if self.refiner else 0)

    # ------------------------------------------------------------------
    # forward passes

    def forward_batch(
        self,
        windows: list[SceneWindow],
        mode: str,
        noise: np.ndarray,
        teacher_forcing: bool = False,
        detach_raw: bool = True,
        detach_fed: bool = False,
    ) -> tuple[RawPrediction, Tensor | None, np.ndarray, np.ndarray]:
        """Rollout + refinement over stacked pedestrians of several windows.

        Returns (raw, offsets tensor or None, stacked past, stacked future).
        Social pooling stays inside each window: pedestrians never attend
        across windows.
        """
        past = np.concatenate([w.past for w in windows], axis=0)
        future = np.concatenate([w.future for w in windows], axis=0)
        raw = self.head.rollout(
            past,
            mode,
            noise,
            gt_future=future if mode == "train" else None,
            teacher_forcing=teacher_forcing,
            detach_fed=detach_fed,
        )
        offsets = None
        if self.refiner is not None:
            spans = []
            masks = []
            row = 0
            for w in windows:
                spans.append((row, row + w.n_peds))
                masks.append(build_mask(w.anchor, self.refiner.mask_radius))
                row += w.n_peds
            flat = raw.flat()
            if detach_raw:
                flat = flat.detach()
            offsets = self.refiner.offsets(past, flat, masks, spans)
        return raw, offsets, past, future

    def batch_losses(
        self,
        windows: list[SceneWindow],
        noise: np.ndarray,
        teacher_forcing: bool = False,
        detach_raw: bool = True,
        detach_fed: bool = False,
    ) -> tuple[Tensor, LossReport]:
        """Total training loss tensor and the matching per-component report."""
        raw, offsets, _, future = self.forward_batch(
            windows, "train", noise, teacher_forcing, detach_raw, detach_fed
        )
        n = future.shape[0]
        ap = loss_ap(future, raw)
        kld = loss_kld(raw.posteriors, n)
        total = add(ap, kld)
        if offsets is not None:
            flat = raw.flat()
            if detach_raw:
                flat = flat.detach()
            reg = loss_r(future, flat, offsets)
            total = add(total, reg)
            report = LossReport.from_components(ap.item(), kld.item(), reg.item())
        else:
            report = LossReport.from_components(ap.item(), kld.item(), 0.0)
        return total, report

    def predict_window(self, window: SceneWindow, noise: np.ndarray) -> WindowPrediction:
        """Inference on one window with explicit noise [delta, n, latent_dim]."""
        with no_grad():
            raw, offsets, _, _ = self.forward_batch([window], "infer", noise)
        raw_pts = raw.stacked()
        if offsets is None:
            zeros = np.zeros_like(raw_pts)
            return WindowPrediction(raw=raw_pts, refined=raw_pts.copy(), offsets=zeros)
        offs = offsets.data.reshape(raw_pts.shape)
        return WindowPrediction(raw=raw_pts, refined=raw_pts + offs, offsets=offs)


def backward_total(total: Tensor) -> None:
    """Backpropagate a batch loss into the parameter store."""
    backward(total)


__all__ = ["ModelConfig", "ForecastModel", "WindowPrediction", "backward_total", "concat"]
