"""Socially-aware offset regression.

Encodes each pedestrian's observed past and predicted future, mixes the
pedestrians of one scene window through a masked attention pool, and decodes
per-pedestrian trajectory offsets that nudge the raw predictions toward
socially consistent ones.

The pool splits the 2F-wide concatenated feature into its past half and its
future half, runs single-layer query/key/value maps over the future half,
applies distance-masked scaled dot-product attention, adds the pooled result
back onto the future half, and re-concatenates, so the output width stays 2F
and an isolated pedestrian (mask row = self only) is untouched by others.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arch import ArchConfig
from .autodiff import Tensor, add, concat, exact_matmul, matmul, mul, narrow, transpose
from .errors import UsageError
from .heads import RawPrediction
from .nn import Mlp, ParamStore, softmax_rows


def build_mask(anchors: np.ndarray, radius: float) -> np.ndarray:
    """Binary adjacency from pairwise distances at the last observed frame.

    Uses absolute (unanchored) positions; symmetric with a unit diagonal.
    """
    if radius <= 0:
        raise UsageError(f"mask radius must be positive, got {radius}")
    anchors = np.asarray(anchors, dtype=np.float64)
    diff = anchors[:, None, :] - anchors[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    mask = (dist <= radius).astype(np.float64)
    np.fill_diagonal(mask, 1.0)
    return mask


@dataclass
class RefinedPrediction:
    offsets: np.ndarray  # [n, delta, 2]
    refined: np.ndarray  # [n, delta, 2] == raw + offsets
    offsets_t: Tensor  # [n, 2*delta], graph-connected for the regression loss


class SocialRefiner:
    def __init__(
        self,
        store: ParamStore,
        tau: int,
        delta: int,
        arch: ArchConfig,
        rng: np.random.Generator,
        mask_radius: float = 2.0,
        prefix: str = "refiner",
    ):
        if mask_radius <= 0:
            raise UsageError(f"mask radius must be positive, got {mask_radius}")
        self.tau = tau
        self.delta = delta
        self.arch = arch
        self.mask_radius = mask_radius
        self.e_opast = Mlp(store, f"{prefix}.e_opast", arch.opast_spec(tau), rng)
        self.e_pfuture = Mlp(store, f"{prefix}.e_pfuture", arch.pfuture_spec(delta), rng)
        self.query = Mlp(store, f"{prefix}.query", arch.qkv_spec(), rng)
        self.key = Mlp(store, f"{prefix}.key", arch.qkv_spec(), rng)
        self.value = Mlp(store, f"{prefix}.value", arch.qkv_spec(), rng)
        self.d_offsets = Mlp(store, f"{prefix}.d_offsets", arch.offsets_spec(delta), rng)

    def param_count(self) -> int:
        return sum(
            m.param_count()
            for m in (self.e_opast, self.e_pfuture, self.query, self.key, self.value, self.d_offsets)
        )

    def social_pool(self, features: Tensor, mask: np.ndarray) -> Tensor:
        """Mix rows of a [n, 2F] feature block under a binary [n, n] mask."""
        fw = self.arch.feature_width
        if features.data.ndim != 2 or features.data.shape[1] != 2 * fw:
            raise UsageError(f"features must be [n, {2 * fw}], got {features.data.shape}")
        n = features.data.shape[0]
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != (n, n):
            raise UsageError(f"mask must be [{n}, {n}], got {mask.shape}")
        own = narrow(features, 1, 0, fw)
        soc = narrow(features, 1, fw, 2 * fw)
        q = self.query(soc)
        k = self.key(soc)
        v = self.value(soc)
        logits = mul(matmul(q, transpose(k)), 1.0 / np.sqrt(fw))
        attention = softmax_rows(logits, mask)
        pooled = exact_matmul(attention, v)
        return concat([own, add(soc, pooled)], axis=1)

    def offsets(
        self,
        past: np.ndarray,
        future_flat: Tensor,
        masks: list[np.ndarray],
        spans: list[tuple[int, int]],
    ) -> Tensor:
        """Offsets [n, 2*delta] for stacked pedestrians grouped into windows.

        `spans` gives the (start, stop) row range of each window in the
        stack and `masks` the matching adjacency; pooling never crosses
        window boundaries.
        """
        past = np.asarray(past, dtype=np.float64)
        n = past.shape[0]
        if past.shape != (n, self.tau, 2):
            raise UsageError(f"past must be [n, {self.tau}, 2], got {past.shape}")
        if future_flat.data.shape != (n, 2 * self.delta):
            raise UsageError(
                f"future must be [n, {2 * self.delta}], got {future_flat.data.shape}"
            )
        if len(masks) != len(spans):
            raise UsageError("masks and spans must pair up")
        f_opast = self.e_opast(Tensor(past.reshape(n, 2 * self.tau)))
        f_pfuture = self.e_pfuture(future_flat)
        features = concat([f_opast, f_pfuture], axis=1)
        pooled_blocks = []
        for (start, stop), mask in zip(spans, masks):
            block = narrow(features, 0, start, stop)
            pooled_blocks.append(self.social_pool(block, mask))
        mixed = pooled_blocks[0] if len(pooled_blocks) == 1 else concat(pooled_blocks, axis=0)
        return self.d_offsets(mixed)


def refine(
    refiner: SocialRefiner,
    window,
    raw: RawPrediction,
    detach_raw: bool = True,
) -> RefinedPrediction:
    """Apply the refiner to one window's raw prediction.

    With detach_raw (the training default) the regression stage treats the
    raw points as constants, so its loss trains only the refiner.
    """
    n = window.past.shape[0]
    mask = build_mask(window.anchor, refiner.mask_radius)
    future_flat = raw.flat()
    if detach_raw:
        future_flat = future_flat.detach()
    offsets_t = refiner.offsets(window.past, future_flat, [mask], [(0, n)])
    offsets = offsets_t.data.reshape(n, refiner.delta, 2)
    return RefinedPrediction(
        offsets=offsets,
        refined=raw.stacked() + offsets,
        offsets_t=offsets_t,
    )
