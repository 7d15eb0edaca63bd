"""MLP layers, the trainable-parameter store, Adam, and Gaussian-latent ops."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    add,
    backward,
    concat,
    exp,
    linear,
    masked_softmax_rows,
    mul,
    reduce_sum,
    square,
)
from .errors import UsageError


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths of a plain MLP: ReLU between hidden layers, identity last."""

    layer_widths: tuple[int, ...]

    def __post_init__(self):
        if len(self.layer_widths) < 2:
            raise UsageError(f"an MLP needs at least two widths, got {self.layer_widths}")
        if any(w <= 0 for w in self.layer_widths):
            raise UsageError(f"layer widths must be positive, got {self.layer_widths}")

    @property
    def in_width(self) -> int:
        return self.layer_widths[0]

    @property
    def out_width(self) -> int:
        return self.layer_widths[-1]

    def param_count(self) -> int:
        ws = self.layer_widths
        return sum(a * b + b for a, b in zip(ws[:-1], ws[1:]))


class ParamStore:
    """Named parameter tensors plus their gradient and Adam state.

    Moments are zero-initialized lazily and the shared step counter starts
    at 0. Gradients accumulate across backward calls until cleared.
    """

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise UsageError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self.params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def names(self) -> list[str]:
        return list(self.params)

    def n_params(self) -> int:
        return sum(t.size for t in self.params.values())

    def clear_grads(self) -> None:
        for t in self.params.values():
            t.grad = None

    def grads_finite(self) -> bool:
        return all(t.grad is None or np.isfinite(t.grad).all() for t in self.params.values())


def adam_step(
    store: ParamStore,
    lr: float = 3e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update over every parameter in the store.

    Missing gradients count as zero. Gradients are cleared afterwards and
    the step counter advances.
    """
    store.step += 1
    t = store.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in store.params.items():
        g = p.grad if p.grad is not None else np.zeros(p.data.shape, dtype=np.float64)
        m = store._m.get(name)
        v = store._v.get(name)
        if m is None:
            m = np.zeros(p.data.shape, dtype=np.float64)
            v = np.zeros(p.data.shape, dtype=np.float64)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        store._m[name] = m
        store._v[name] = v
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    store.clear_grads()


class Mlp:
    """An MLP bound to named parameters in a ParamStore.

    Weights and biases are initialized uniformly in +-sqrt(1/fan_in).
    """

    def __init__(self, store: ParamStore, prefix: str, spec: MlpSpec, rng: np.random.Generator):
        self.spec = spec
        self.prefix = prefix
        self.layers: list[tuple[Tensor, Tensor]] = []
        ws = spec.layer_widths
        for i, (fan_in, fan_out) in enumerate(zip(ws[:-1], ws[1:])):
            bound = np.sqrt(1.0 / fan_in)
            w = store.add(f"{prefix}.w{i}", rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            b = store.add(f"{prefix}.b{i}", rng.uniform(-bound, bound, size=(fan_out,)))
            self.layers.append((w, b))

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.spec.in_width:
            raise UsageError(
                f"{self.prefix}: expected input [*, {self.spec.in_width}], got {x.data.shape}"
            )
        h = x
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            h = linear(h, w, b, activate=i != last)
        return h

    def param_count(self) -> int:
        return self.spec.param_count()


def softmax_rows(logits: Tensor, mask: np.ndarray) -> Tensor:
    """Masked row softmax; see autodiff.masked_softmax_rows for semantics."""
    return masked_softmax_rows(logits, mask)


@dataclass
class LatentGaussian:
    """Diagonal Gaussian batch: mu and log-variance, both [n, latent_dim]."""

    mu: Tensor
    log_var: Tensor

    def __post_init__(self):
        if self.mu.shape != self.log_var.shape:
            raise UsageError(
                f"mu shape {self.mu.shape} != log_var shape {self.log_var.shape}"
            )

    @property
    def latent_dim(self) -> int:
        return self.mu.shape[-1]


def sample_reparameterized(g: LatentGaussian, noise: np.ndarray) -> Tensor:
    """mu + exp(0.5 * log_var) * noise, differentiable in mu and log_var."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != g.mu.shape:
        raise UsageError(f"noise shape {noise.shape} != mu shape {g.mu.shape}")
    return add(g.mu, mul(exp(mul(g.log_var, 0.5)), Tensor(noise)))


def kl_standard_normal(g: LatentGaussian) -> Tensor:
    """Per-row KL(N(mu, sigma) || N(0, I)) in closed form, shape [n, 1].

    0.5 * sum_d(mu_d^2 + exp(log_var_d) - 1 - log_var_d), always >= 0.
    """
    inner = add(square(g.mu), exp(g.log_var))
    inner = add(inner, mul(add(g.log_var, 1.0), -1.0))
    return mul(reduce_sum(inner, axis=1, keepdims=True), 0.5)


__all__ = [
    "MlpSpec",
    "ParamStore",
    "Mlp",
    "LatentGaussian",
    "adam_step",
    "softmax_rows",
    "sample_reparameterized",
    "kl_standard_normal",
    "backward",
    "concat",
]
