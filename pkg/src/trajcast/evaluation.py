"""Best-of-K evaluation, displacement metrics, and efficiency timing.

Average displacement error (ADE) is the mean Euclidean point error over all
future steps; final displacement error (FDE) looks at the last step only.
Best-of-K draws K futures per pedestrian from nested, seeded noise streams
and keeps each pedestrian's minimum ADE and minimum FDE, so both metrics
are monotone non-increasing in K for a fixed seed. The per-frame curve is
taken from the ADE-best sample, which makes its mean equal the reported
ADE exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .autodiff import no_grad
from .datasets import SceneWindow
from .errors import UsageError
from .model import ForecastModel
from .social import build_mask


def displacement_errors(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Per-pedestrian per-step Euclidean errors, shape [n, delta]."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise UsageError(f"prediction shape {pred.shape} != ground truth {gt.shape}")
    diff = pred - gt
    return np.sqrt((diff * diff).sum(axis=-1))


def ade(pred: np.ndarray, gt: np.ndarray) -> float:
    return float(displacement_errors(pred, gt).mean())


def fde(pred: np.ndarray, gt: np.ndarray) -> float:
    return float(displacement_errors(pred, gt)[..., -1].mean())


def noise_stream(seed: int, window_index: int, sample_index: int, delta: int, n: int, latent: int) -> np.ndarray:
    """Deterministic unit-normal noise keyed by (seed, window, sample).

    The stream for a sample never depends on how many samples are drawn,
    which is what makes best-of-K nested across K.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(window_index, sample_index))
    return np.random.default_rng(ss).standard_normal((delta, n, latent))


@dataclass
class EvalReport:
    ade: float
    fde: float
    k: int
    n_peds: int
    per_scene: dict[str, tuple[float, float, int]]  # scene -> (ade, fde, ped count)
    per_frame: np.ndarray  # [delta] mean per-future-frame error of ADE-best samples


def evaluate_model(
    model: ForecastModel,
    windows: list[SceneWindow],
    k: int = 20,
    seed: int = 0,
) -> EvalReport:
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    if not windows:
        raise UsageError("evaluation needs at least one window")
    delta = model.cfg.delta
    latent = model.arch.latent_dim
    sum_ade = 0.0
    sum_fde = 0.0
    total = 0
    frame_sum = np.zeros(delta)
    scene_acc: dict[str, list[float]] = {}
    for wi, w in enumerate(windows):
        n = w.n_peds
        noise = np.concatenate(
            [noise_stream(seed, wi, s, delta, n, latent) for s in range(k)], axis=1
        )
        past_rep = np.tile(w.past, (k, 1, 1))
        with no_grad():
            raw = model.head.rollout(past_rep, "infer", noise)
            points = raw.stacked()
            if model.refiner is not None:
                mask = build_mask(w.anchor, model.refiner.mask_radius)
                offs = model.refiner.offsets(
                    past_rep,
                    raw.flat(),
                    [mask] * k,
                    [(s * n, (s + 1) * n) for s in range(k)],
                )
                points = points + offs.data.reshape(points.shape)
        err = displacement_errors(points, np.tile(w.future, (k, 1, 1)))
        err = err.reshape(k, n, delta)
        ade_per = err.mean(axis=2)  # [k, n]
        best_idx = ade_per.argmin(axis=0)
        best_ade = ade_per[best_idx, np.arange(n)]
        best_fde = err[:, :, -1].min(axis=0)
        frame_sum += err[best_idx, np.arange(n), :].sum(axis=0)
        sum_ade += best_ade.sum()
        sum_fde += best_fde.sum()
        total += n
        acc = scene_acc.setdefault(w.scene_id, [0.0, 0.0, 0])
        acc[0] += best_ade.sum()
        acc[1] += best_fde.sum()
        acc[2] += n
    per_scene = {
        sid: (float(s_ade / cnt), float(s_fde / cnt), cnt)
        for sid, (s_ade, s_fde, cnt) in scene_acc.items()
    }
    return EvalReport(
        ade=float(sum_ade / total),
        fde=float(sum_fde / total),
        k=k,
        n_peds=total,
        per_scene=per_scene,
        per_frame=frame_sum / total,
    )


@dataclass
class EfficiencyStats:
    param_count: int
    seconds_per_batch: float
    batch_windows: int
    timed_batches: int


def efficiency_report(
    model: ForecastModel,
    windows: list[SceneWindow],
    batch_windows: int = 16,
    timed_batches: int = 20,
    warmup: int = 3,
) -> EfficiencyStats:
    """Exact parameter count plus timed inference throughput.

    Runs `warmup` untimed batches, then averages wall time over at least
    `timed_batches` full forward passes (rollout + refinement).
    """
    if not windows:
        raise UsageError("efficiency timing needs at least one window")
    batch = (windows * ((batch_windows // len(windows)) + 1))[:batch_windows]
    delta = model.cfg.delta
    latent = model.arch.latent_dim
    n = sum(w.n_peds for w in batch)
    rng = np.random.default_rng(0)

    def run_once():
        noise = rng.standard_normal((delta, n, latent))
        with no_grad():
            model.forward_batch(batch, "infer", noise)

    for _ in range(warmup):
        run_once()
    start = time.perf_counter()
    for _ in range(timed_batches):
        run_once()
    elapsed = time.perf_counter() - start
    return EfficiencyStats(
        param_count=model.param_count(),
        seconds_per_batch=elapsed / timed_batches,
        batch_windows=batch_windows,
        timed_batches=timed_batches,
    )


def write_metrics_csv(report: EvalReport, path) -> None:
    lines = ["k,ade,fde,scene"]
    lines.append(f"{report.k},{report.ade!r},{report.fde!r},ALL")
    for sid in sorted(report.per_scene):
        s_ade, s_fde, _ = report.per_scene[sid]
        lines.append(f"{report.k},{s_ade!r},{s_fde!r},{sid}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_frame_curve_csv(report: EvalReport, path) -> None:
    lines = ["frame,ade"]
    for i, value in enumerate(report.per_frame, start=1):
        lines.append(f"{i},{float(value)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
