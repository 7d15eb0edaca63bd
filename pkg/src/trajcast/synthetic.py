"""Synthetic scene generation for desk-scale experiments.

Four archetypes cover the interaction cases the model cares about:
straight constant-velocity walkers, smooth turners, crossing pairs that
pass within the social-mask radius, and head-on pairs that curve around
each other. Every archetype instance becomes its own scene spanning
`steps` samples, so each instance yields clean windows whose pedestrians
are co-present throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .datasets import TrajectoryScene
from .errors import UsageError


@dataclass(frozen=True)
class SynthConfig:
    walkers: int = 0
    turners: int = 0
    crossing_pairs: int = 0
    avoidance_pairs: int = 0
    steps: int = 20
    speed_min: float = 0.2
    speed_max: float = 1.0
    noise_sigma: float = 0.0
    mask_radius: float = 2.0
    spread: float = 10.0  # half-width of the start-position box

    def __post_init__(self):
        counts = (self.walkers, self.turners, self.crossing_pairs, self.avoidance_pairs)
        if any(c < 0 for c in counts):
            raise UsageError(f"archetype counts must be non-negative, got {counts}")
        if sum(counts) == 0:
            raise UsageError("at least one archetype count must be positive")
        if self.steps < 2:
            raise UsageError(f"steps must be >= 2, got {self.steps}")
        if not (0 < self.speed_min <= self.speed_max):
            raise UsageError(
                f"need 0 < speed_min <= speed_max, got {self.speed_min}, {self.speed_max}"
            )
        if self.noise_sigma < 0:
            raise UsageError(f"noise sigma must be >= 0, got {self.noise_sigma}")
        if self.mask_radius <= 0:
            raise UsageError(f"mask radius must be positive, got {self.mask_radius}")

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "SynthConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            if key not in known:
                raise UsageError(f"unknown generator config key {key!r}")
            kwargs[key] = int(raw) if known[key] == "int" else float(raw)
        return cls(**kwargs)


def _speed(cfg: SynthConfig, rng: np.random.Generator) -> float:
    return float(rng.uniform(cfg.speed_min, cfg.speed_max))


def _start(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-cfg.spread, cfg.spread, size=2)


def _walker_track(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * np.pi)
    v = _speed(cfg, rng) * np.array([np.cos(theta), np.sin(theta)])
    t = np.arange(cfg.steps, dtype=np.float64)[:, None]
    return _start(cfg, rng)[None, :] + t * v[None, :]


def _turner_track(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Straight walk that starts turning at a random onset step.

    The onset is drawn across the whole track, so for many instances the
    observed prefix looks like a plain walker and the turn direction and
    timing stay genuinely ambiguous: the multimodal case best-of-K
    sampling is supposed to handle.
    """
    theta = rng.uniform(0.0, 2.0 * np.pi)
    omega = rng.choice([-1.0, 1.0]) * rng.uniform(0.12, 0.30)
    onset = int(rng.integers(2, cfg.steps - 3))
    speed = _speed(cfg, rng)
    pos = _start(cfg, rng).copy()
    track = np.empty((cfg.steps, 2), dtype=np.float64)
    track[0] = pos
    for t in range(1, cfg.steps):
        heading = theta + omega * max(0, (t - 1) - onset)
        pos = pos + speed * np.array([np.cos(heading), np.sin(heading)])
        track[t] = pos
    return track


def _crossing_tracks(cfg: SynthConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two straight tracks meeting near a common point mid-sequence.

    A small lateral offset (well inside the mask radius) keeps the minimum
    separation positive but guarantees the pair interacts.
    """
    center = _start(cfg, rng)
    t_meet = cfg.steps // 2
    theta_a = rng.uniform(0.0, 2.0 * np.pi)
    theta_b = theta_a + rng.uniform(np.pi / 3, 2 * np.pi / 3)
    gap = 0.3 * cfg.mask_radius
    t = np.arange(cfg.steps, dtype=np.float64)[:, None]
    tracks = []
    for theta, side in ((theta_a, -0.5), (theta_b, 0.5)):
        v = _speed(cfg, rng) * np.array([np.cos(theta), np.sin(theta)])
        normal = np.array([-np.sin(theta), np.cos(theta)])
        through = center + side * gap * normal
        tracks.append(through[None, :] + (t - t_meet) * v[None, :])
    return tracks[0], tracks[1]


def _avoidance_tracks(cfg: SynthConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Head-on pair that bows out laterally around the meeting point."""
    center = _start(cfg, rng)
    theta = rng.uniform(0.0, 2.0 * np.pi)
    u = np.array([np.cos(theta), np.sin(theta)])
    normal = np.array([-np.sin(theta), np.cos(theta)])
    speed = _speed(cfg, rng)
    t_meet = cfg.steps // 2
    bulge = 0.4 * cfg.mask_radius
    width = cfg.steps / 6.0
    t = np.arange(cfg.steps, dtype=np.float64)
    swell = np.exp(-(((t - t_meet) / width) ** 2))[:, None] * normal[None, :]
    rel = (t - t_meet)[:, None] * speed
    track_a = center[None, :] + rel * u[None, :] + bulge * swell
    track_b = center[None, :] - rel * u[None, :] - bulge * swell
    return track_a, track_b


def _to_scene(scene_id: str, tracks: list[np.ndarray], cfg: SynthConfig, rng: np.random.Generator) -> TrajectoryScene:
    records = []
    for ped, track in enumerate(tracks, start=1):
        noisy = track + rng.normal(0.0, cfg.noise_sigma, size=track.shape) if cfg.noise_sigma > 0 else track
        for frame in range(cfg.steps):
            records.append((frame, ped, float(noisy[frame, 0]), float(noisy[frame, 1])))
    return TrajectoryScene(scene_id=scene_id, records=records, frame_step=1)


def synth_scenes(cfg: SynthConfig, seed: int) -> list[TrajectoryScene]:
    """Generate scenes deterministically: same (cfg, seed) -> identical scenes."""
    plan = (
        [("walk", _walker_track, 1)] * cfg.walkers
        + [("turn", _turner_track, 1)] * cfg.turners
        + [("cross", _crossing_tracks, 2)] * cfg.crossing_pairs
        + [("avoid", _avoidance_tracks, 2)] * cfg.avoidance_pairs
    )
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(plan))
    scenes = []
    for idx, ((name, builder, arity), child) in enumerate(zip(plan, children)):
        rng = np.random.default_rng(child)
        built = builder(cfg, rng)
        tracks = [built] if arity == 1 else list(built)
        scenes.append(_to_scene(f"{name}{idx:04d}", tracks, cfg, rng))
    return scenes
