"""Seeded training loop over scene windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import SceneWindow
from .errors import DataError, NumericError
from .losses import LossReport
from .model import ForecastModel, backward_total
from .nn import adam_step


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-4
    epochs: int = 600
    batch_size: int = 512
    seed: int = 0
    teacher_forcing: bool = False
    detach_raw: bool = True  # keep the regression loss out of the point predictors
    detach_fed: bool = False  # treat fed-forward predictions as constants (pseudo-labels)


def train_model(
    model: ForecastModel,
    windows: list[SceneWindow],
    cfg: TrainConfig,
    on_epoch=None,
) -> list[LossReport]:
    """Train in place; returns one LossReport per epoch.

    Windows are shuffled each epoch with a seeded generator and batched by
    window count; all noise comes from the same generator, so a fixed
    (model, windows, cfg) triple reproduces the exact same parameters.
    Non-finite losses abort with the offending epoch/batch index.
    """
    if not windows:
        raise DataError("training needs a non-empty window set")
    delta = model.cfg.delta
    latent = model.arch.latent_dim
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(7,)))
    history: list[LossReport] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(windows))
        sums = np.zeros(3)
        total_peds = 0
        for bi in range(0, len(order), cfg.batch_size):
            batch = [windows[i] for i in order[bi : bi + cfg.batch_size]]
            n = sum(w.n_peds for w in batch)
            noise = rng.standard_normal((delta, n, latent))
            total, report = model.batch_losses(
                batch,
                noise,
                teacher_forcing=cfg.teacher_forcing,
                detach_raw=cfg.detach_raw,
                detach_fed=cfg.detach_fed,
            )
            if not report.finite():
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {bi // cfg.batch_size}"
                )
            backward_total(total)
            adam_step(model.store, lr=cfg.lr)
            sums += np.array([report.l_ap, report.l_kld, report.l_r]) * n
            total_peds += n
        mean = sums / total_peds
        epoch_report = LossReport.from_components(float(mean[0]), float(mean[1]), float(mean[2]))
        history.append(epoch_report)
        if on_epoch is not None:
            on_epoch(epoch, epoch_report)
    return history


def write_loss_csv(history: list[LossReport], path) -> None:
    lines = ["epoch,l_ap,l_kld,l_r,total"]
    for i, r in enumerate(history):
        lines.append(f"{i},{r.l_ap!r},{r.l_kld!r},{r.l_r!r},{r.total!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
