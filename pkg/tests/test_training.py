import numpy as np
import numpy.testing as npt
import pytest

from conftest import make_window
from trajcast.checkpoint import load_checkpoint, save_checkpoint
from trajcast.errors import DataError, NumericError
from trajcast.evaluation import evaluate_model, noise_stream
from trajcast.model import ForecastModel, ModelConfig
from trajcast.training import TrainConfig, train_model, write_loss_csv

TINY_CFG = dict(tau=4, delta=3, alpha=4, width_scale=16, seed=3)


def tiny_model(head="cascaded", refiner=True, seed=3):
    return ForecastModel(ModelConfig(head=head, refiner=refiner, **{**TINY_CFG, "seed": seed}))


def tiny_windows(rng, count=6):
    return [make_window(rng, int(rng.integers(1, 4)), tau=4, delta=3, scene_id=f"s{i % 2}")
            for i in range(count)]


def test_training_is_deterministic(rng):
    windows = tiny_windows(rng)
    tcfg = TrainConfig(lr=1e-3, epochs=3, batch_size=4, seed=11)

    def run():
        model = tiny_model()
        history = train_model(model, windows, tcfg)
        return model, history

    m1, h1 = run()
    m2, h2 = run()
    for name in m1.store.names():
        npt.assert_array_equal(m1.store[name].data, m2.store[name].data)
    assert [r.total for r in h1] == [r.total for r in h2]


def test_training_reports_additive_totals(rng):
    windows = tiny_windows(rng)
    model = tiny_model()
    history = train_model(model, windows, TrainConfig(lr=1e-3, epochs=2, batch_size=3, seed=0))
    assert len(history) == 2
    for r in history:
        assert r.total == r.l_ap + r.l_kld + r.l_r
        assert r.l_ap >= 0 and r.l_kld >= 0 and r.l_r >= 0


def test_empty_dataset_rejected():
    with pytest.raises(DataError):
        train_model(tiny_model(), [], TrainConfig(epochs=1))


def test_divergence_aborts_with_batch_index(rng):
    windows = tiny_windows(rng)
    model = tiny_model()
    name = model.store.names()[0]
    model.store[name].data[:] = np.nan
    with pytest.raises(NumericError, match="epoch 0, batch 0"):
        train_model(model, windows, TrainConfig(epochs=1, batch_size=16, seed=0))


def test_training_without_refiner_reports_zero_regression(rng):
    windows = tiny_windows(rng)
    model = tiny_model(refiner=False)
    history = train_model(model, windows, TrainConfig(lr=1e-3, epochs=1, batch_size=4, seed=2))
    assert history[0].l_r == 0.0


def test_loss_csv_round_trip(tmp_path, rng):
    windows = tiny_windows(rng)
    model = tiny_model()
    history = train_model(model, windows, TrainConfig(lr=1e-3, epochs=2, batch_size=4, seed=1))
    path = tmp_path / "loss.csv"
    write_loss_csv(history, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,l_ap,l_kld,l_r,total"
    for i, line in enumerate(lines[1:]):
        epoch, ap, kld, r, total = line.split(",")
        assert int(epoch) == i
        assert float(ap) == history[i].l_ap
        assert float(total) == history[i].total


# checkpointing --------------------------------------------------------------


def test_checkpoint_round_trip_bit_identical(tmp_path, rng):
    windows = tiny_windows(rng)
    model = tiny_model()
    train_model(model, windows, TrainConfig(lr=1e-3, epochs=2, batch_size=4, seed=5))
    save_checkpoint(model, tmp_path / "ck")
    loaded = load_checkpoint(tmp_path / "ck")
    assert loaded.cfg == model.cfg
    assert loaded.store.step == model.store.step
    for name in model.store.names():
        npt.assert_array_equal(loaded.store[name].data, model.store[name].data)
    window = windows[0]
    noise = noise_stream(0, 0, 0, 3, window.n_peds, model.arch.latent_dim)
    a = model.predict_window(window, noise)
    b = loaded.predict_window(window, noise)
    npt.assert_array_equal(a.refined, b.refined)


def test_checkpoint_reproduces_eval_report(tmp_path, rng):
    windows = tiny_windows(rng)
    model = tiny_model()
    train_model(model, windows, TrainConfig(lr=1e-3, epochs=1, batch_size=4, seed=5))
    save_checkpoint(model, tmp_path / "ck")
    loaded = load_checkpoint(tmp_path / "ck")
    r1 = evaluate_model(model, windows, k=4, seed=9)
    r2 = evaluate_model(loaded, windows, k=4, seed=9)
    assert r1.ade == r2.ade
    assert r1.fde == r2.fde
    npt.assert_array_equal(r1.per_frame, r2.per_frame)


def test_checkpoint_rejects_garbage_dir(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "missing")
    (tmp_path / "bad").mkdir()
    (tmp_path / "bad" / "manifest.txt").write_text("something else\n")
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "bad")
