"""One conditional-VAE point predictor.

Training encodes the history ("updated past") and the ground-truth next
point, infers a latent Gaussian posterior, samples it with the
reparameterization trick, and decodes the latent together with the history
feature back to a 2-D point. Inference skips the point/latent encoders and
feeds a standard-normal latent straight to the decoder, so multimodality
comes from the injected noise alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arch import ArchConfig
from .autodiff import Tensor, concat, narrow
from .errors import UsageError
from .nn import LatentGaussian, Mlp, ParamStore, kl_standard_normal, sample_reparameterized


@dataclass
class StepPrediction:
    point: Tensor  # [n, 2]
    z: Tensor  # [n, latent_dim]
    posterior: LatentGaussian | None = None


class CvaeUnit:
    """CVAE predicting the next point from a history of `hist_len` points."""

    def __init__(
        self,
        store: ParamStore,
        prefix: str,
        hist_len: int,
        arch: ArchConfig,
        rng: np.random.Generator,
    ):
        self.hist_len = hist_len
        self.arch = arch
        self.e_upast = Mlp(store, f"{prefix}.e_upast", arch.upast_spec(hist_len), rng)
        self.e_point = Mlp(store, f"{prefix}.e_point", arch.point_spec(), rng)
        self.e_latent = Mlp(store, f"{prefix}.e_latent", arch.latent_spec(), rng)
        self.d_latent = Mlp(store, f"{prefix}.d_latent", arch.decoder_spec(), rng)

    @property
    def latent_dim(self) -> int:
        return self.arch.latent_dim

    def param_count(self) -> int:
        return sum(
            m.param_count() for m in (self.e_upast, self.e_point, self.e_latent, self.d_latent)
        )

    def _check_noise(self, noise: np.ndarray, n: int) -> np.ndarray:
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != (n, self.latent_dim):
            raise UsageError(
                f"noise shape {noise.shape} != ({n}, {self.latent_dim})"
            )
        return noise

    def posterior(self, upast: Tensor, gt_point: Tensor) -> tuple[Tensor, LatentGaussian]:
        """History feature plus the latent Gaussian inferred from (history, point)."""
        f_upast = self.e_upast(upast)
        f_point = self.e_point(gt_point)
        stats = self.e_latent(concat([f_upast, f_point], axis=1))
        mu = narrow(stats, 1, 0, self.latent_dim)
        log_var = narrow(stats, 1, self.latent_dim, 2 * self.latent_dim)
        return f_upast, LatentGaussian(mu, log_var)

    def train_forward(self, upast: Tensor, gt_point: Tensor, noise: np.ndarray) -> StepPrediction:
        noise = self._check_noise(noise, upast.shape[0])
        f_upast, post = self.posterior(upast, gt_point)
        z = sample_reparameterized(post, noise)
        point = self.d_latent(concat([z, f_upast], axis=1))
        return StepPrediction(point=point, z=z, posterior=post)

    def infer_forward(self, upast: Tensor, noise: np.ndarray) -> StepPrediction:
        noise = self._check_noise(noise, upast.shape[0])
        f_upast = self.e_upast(upast)
        z = Tensor(noise)
        point = self.d_latent(concat([z, f_upast], axis=1))
        return StepPrediction(point=point, z=z)


def unit_kl(pred: StepPrediction) -> Tensor:
    """Per-row KL of a training-mode step against the standard normal prior."""
    if pred.posterior is None:
        raise UsageError("KL needs a training-mode prediction with a posterior")
    return kl_standard_normal(pred.posterior)
