import numpy as np
import pytest

from trajcast.datasets import SceneWindow


def make_window(rng, n_peds, tau=8, delta=12, scene_id="w", start=0, spread=5.0):
    """Random window with valid anchoring invariants."""
    absolute_past = rng.normal(scale=spread, size=(n_peds, tau, 2))
    anchor = absolute_past[:, -1, :].copy()
    past = absolute_past - anchor[:, None, :]
    future = rng.normal(size=(n_peds, delta, 2))
    return SceneWindow(
        scene_id=scene_id,
        start_frame=start,
        peds=tuple(range(1, n_peds + 1)),
        past=past,
        future=future,
        anchor=anchor,
        absolute_past=absolute_past,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
