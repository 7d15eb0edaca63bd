import re

import numpy as np
import numpy.testing as npt

from conftest import make_window
from trajcast.model import WindowPrediction
from trajcast.svgplot import invert_transform, render_window_svg


def fake_prediction(rng, n, delta, identical=False):
    raw = rng.normal(size=(n, delta, 2))
    refined = raw.copy() if identical else raw + rng.normal(scale=0.1, size=raw.shape)
    offsets = refined - raw
    return WindowPrediction(raw=raw, refined=refined, offsets=offsets)


def test_single_pedestrian_has_four_polylines(rng):
    window = make_window(rng, 1, tau=4, delta=3)
    svg = render_window_svg(window, fake_prediction(rng, 1, 3))
    assert svg.count("<polyline") == 4
    for role in ("past", "gt", "raw", "refined"):
        assert f'class="{role}"' in svg


def test_polyline_count_scales_with_pedestrians(rng):
    window = make_window(rng, 3, tau=4, delta=3)
    svg = render_window_svg(window, fake_prediction(rng, 3, 3))
    assert svg.count("<polyline") == 12


def test_refiner_off_draws_coincident_raw_and_refined(rng):
    window = make_window(rng, 2, tau=4, delta=3)
    svg = render_window_svg(window, fake_prediction(rng, 2, 3, identical=True))
    raws = re.findall(r'class="raw"[^>]*points="([^"]*)"', svg)
    refineds = re.findall(r'class="refined"[^>]*points="([^"]*)"', svg)
    assert raws == refineds


def test_windows_without_predictions_render(rng):
    window = make_window(rng, 2, tau=4, delta=3)
    svg = render_window_svg(window)
    assert svg.count("<polyline") == 4  # past + gt per pedestrian


def test_transform_inverts_to_world_coordinates(rng):
    window = make_window(rng, 2, tau=4, delta=3)
    pred = fake_prediction(rng, 2, 3)
    svg = render_window_svg(window, pred)
    blocks = re.findall(r'class="(\w+)"[^>]*points="([^"]*)"', svg)
    expected = {
        "past": [window.absolute_past[i] for i in range(2)],
        "gt": [window.future[i] + window.anchor[i] for i in range(2)],
        "raw": [pred.raw[i] + window.anchor[i] for i in range(2)],
        "refined": [pred.refined[i] + window.anchor[i] for i in range(2)],
    }
    seen = {role: 0 for role in expected}
    for role, points in blocks:
        idx = seen[role]
        seen[role] += 1
        world = expected[role][idx]
        coords = [tuple(float(v) for v in p.split(",")) for p in points.split()]
        recovered = np.array([invert_transform(svg, c) for c in coords])
        npt.assert_allclose(recovered, world, rtol=0, atol=1e-9)
    assert all(v == 2 for v in seen.values())


def test_svg_deterministic(rng):
    window = make_window(rng, 1, tau=4, delta=3)
    pred = fake_prediction(rng, 1, 3)
    assert render_window_svg(window, pred) == render_window_svg(window, pred)
