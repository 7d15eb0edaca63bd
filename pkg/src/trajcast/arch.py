"""Sub-network width configuration.

The full-size widths follow the published architecture table; `narrowed`
shrinks every free width by an integer factor (minimum 2) while keeping the
structurally-determined widths intact: encoder inputs are fixed by the
trajectory lengths, the latent encoder input is twice the feature width, its
output twice the latent dim, the point decoder input is latent + feature,
and the offset decoder output is twice the prediction horizon.
"""

from __future__ import annotations

from dataclasses import dataclass

from .nn import MlpSpec


def _shrink(widths: tuple[int, ...], divisor: int) -> tuple[int, ...]:
    return tuple(max(2, w // divisor) for w in widths)


@dataclass(frozen=True)
class ArchConfig:
    feature_width: int = 16
    latent_dim: int = 16
    upast_hidden: tuple[int, ...] = (512, 256)
    point_hidden: tuple[int, ...] = (8, 16)
    latent_hidden: tuple[int, ...] = (8, 50)
    decoder_hidden: tuple[int, ...] = (1024, 512, 1024)
    opast_hidden: tuple[int, ...] = (512, 256)
    pfuture_hidden: tuple[int, ...] = (512, 256)
    offsets_hidden: tuple[int, ...] = (1024, 512, 1024)

    @classmethod
    def paper_scale(cls) -> "ArchConfig":
        return cls()

    @classmethod
    def narrowed(cls, divisor: int) -> "ArchConfig":
        if divisor < 1:
            raise ValueError(f"width divisor must be >= 1, got {divisor}")
        base = cls()
        if divisor == 1:
            return base
        return cls(
            feature_width=max(2, base.feature_width // divisor),
            latent_dim=max(2, base.latent_dim // divisor),
            upast_hidden=_shrink(base.upast_hidden, divisor),
            point_hidden=_shrink(base.point_hidden, divisor),
            latent_hidden=_shrink(base.latent_hidden, divisor),
            decoder_hidden=_shrink(base.decoder_hidden, divisor),
            opast_hidden=_shrink(base.opast_hidden, divisor),
            pfuture_hidden=_shrink(base.pfuture_hidden, divisor),
            offsets_hidden=_shrink(base.offsets_hidden, divisor),
        )

    # MLP specs for one point-prediction unit whose history input holds
    # `hist_len` points.
    def upast_spec(self, hist_len: int) -> MlpSpec:
        return MlpSpec((2 * hist_len, *self.upast_hidden, self.feature_width))

    def point_spec(self) -> MlpSpec:
        return MlpSpec((2, *self.point_hidden, self.feature_width))

    def latent_spec(self) -> MlpSpec:
        return MlpSpec((2 * self.feature_width, *self.latent_hidden, 2 * self.latent_dim))

    def decoder_spec(self) -> MlpSpec:
        return MlpSpec((self.latent_dim + self.feature_width, *self.decoder_hidden, 2))

    # MLP specs for the social offset-regression stage.
    def opast_spec(self, tau: int) -> MlpSpec:
        return MlpSpec((2 * tau, *self.opast_hidden, self.feature_width))

    def pfuture_spec(self, delta: int) -> MlpSpec:
        return MlpSpec((2 * delta, *self.pfuture_hidden, self.feature_width))

    def qkv_spec(self) -> MlpSpec:
        return MlpSpec((self.feature_width, self.feature_width))

    def offsets_spec(self, delta: int) -> MlpSpec:
        return MlpSpec((2 * self.feature_width, *self.offsets_hidden, 2 * delta))
