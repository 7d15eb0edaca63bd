import numpy as np
import numpy.testing as npt
import pytest

from trajcast.cli import OPTIONS, load_windows, main
from trajcast.datasets import parse_scene


def run(*args):
    return main(list(args))


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "scenes"
    code = run(
        "synth", "--out", str(out), "--walkers", "6", "--turners", "2",
        "--crossing-pairs", "2", "--seed", "7",
    )
    assert code == 0
    return out


def desk_train(synth_dir, tmp_path, name="run", **overrides):
    out = tmp_path / name
    args = {
        "--data": str(synth_dir),
        "--out": str(out),
        "--head": "cascaded",
        "--width-scale": "16",
        "--epochs": "2",
        "--batch": "8",
        "--lr": "1e-3",
        "--seed": "1",
    }
    args.update(overrides)
    flat = [x for kv in args.items() for x in kv]
    assert run("train", *flat) == 0
    return out


# exit codes and validation ------------------------------------------------------


def test_unknown_command_is_usage_error(capsys):
    assert run("frobnicate") == 1


def test_missing_required_flag_is_usage_error():
    assert run("synth") == 1


def test_zero_archetypes_rejected(tmp_path):
    assert run("synth", "--out", str(tmp_path / "x"), "--seed", "1") == 1


def test_alpha_above_tau_rejected(synth_dir, tmp_path):
    code = run(
        "train", "--data", str(synth_dir), "--out", str(tmp_path / "t"),
        "--head", "slide", "--alpha", "9", "--tau", "8", "--epochs", "1",
        "--width-scale", "16",
    )
    assert code == 1


def test_missing_data_is_data_error(tmp_path):
    code = run(
        "train", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "t"),
        "--epochs", "1",
    )
    assert code == 2


def test_eval_missing_checkpoint_is_data_error(synth_dir, tmp_path):
    code = run(
        "eval", "--checkpoint", str(tmp_path / "none"), "--data", str(synth_dir),
        "--out", str(tmp_path / "e"),
    )
    assert code == 2


def test_train_defaults_echo_published_settings():
    opts = {o.dest: o.default for o in OPTIONS["train"]}
    assert opts["lr"] == 3e-4
    assert opts["epochs"] == 600
    assert opts["batch"] == 512


# synth --------------------------------------------------------------------------


def test_synth_deterministic_and_reparsable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["--walkers", "3", "--crossing-pairs", "1", "--noise-sigma", "0.05", "--seed", "3"]
    assert run("synth", "--out", str(a), *args) == 0
    assert run("synth", "--out", str(b), *args) == 0
    files_a = sorted(p.name for p in a.glob("*.tsv"))
    files_b = sorted(p.name for p in b.glob("*.tsv"))
    assert files_a == files_b and files_a
    for name in files_a:
        assert (a / name).read_bytes() == (b / name).read_bytes()
        scene = parse_scene(a / name)
        assert scene.records  # parses back into a scene


def test_synth_files_round_trip_generating_scene(tmp_path):
    from trajcast.synthetic import SynthConfig, synth_scenes

    out = tmp_path / "s"
    assert run("synth", "--out", str(out), "--walkers", "2", "--seed", "11") == 0
    expected = synth_scenes(SynthConfig(walkers=2), seed=11)
    for scene in expected:
        parsed = parse_scene(out / f"{scene.scene_id}.tsv")
        assert parsed.records == scene.records


# config files ----------------------------------------------------------------------


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "gen.cfg"
    cfg.write_text("walkers=4\nseed=5\nnoise-sigma=0.1\n")
    out = tmp_path / "out"
    # CLI flag overrides the file's walkers=4.
    assert run("synth", "--config", str(cfg), "--out", str(out), "--walkers", "2") == 0
    resolved = dict(
        line.split("=", 1) for line in (out / "run_config.txt").read_text().splitlines()
    )
    assert resolved["walkers"] == "2"
    assert resolved["seed"] == "5"
    assert resolved["noise-sigma"] == "0.1"
    assert len(list(out.glob("walk*.tsv"))) == 2


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus=1\n")
    assert run("synth", "--config", str(cfg), "--out", str(tmp_path / "o")) == 1


# train/eval/plot/report pipeline ----------------------------------------------------


def test_full_pipeline(synth_dir, tmp_path):
    train_out = desk_train(synth_dir, tmp_path)
    ck = train_out / "checkpoint"
    assert (ck / "manifest.txt").is_file()
    loss_lines = (train_out / "loss.csv").read_text().splitlines()
    assert loss_lines[0] == "epoch,l_ap,l_kld,l_r,total"
    assert len(loss_lines) == 3

    eval_out = tmp_path / "eval"
    assert run(
        "eval", "--checkpoint", str(ck), "--data", str(synth_dir),
        "--out", str(eval_out), "--k", "3", "--seed", "2",
    ) == 0
    metrics = (eval_out / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "k,ade,fde,scene"
    k, a, f, scene = metrics[1].split(",")
    assert scene == "ALL" and int(k) == 3
    frame_lines = (eval_out / "frame_ade.csv").read_text().splitlines()
    per_frame = [float(r.split(",")[1]) for r in frame_lines[1:]]
    npt.assert_allclose(np.mean(per_frame), float(a), rtol=1e-12)

    plot_out = tmp_path / "plots"
    assert run(
        "plot", "--checkpoint", str(ck), "--data", str(synth_dir),
        "--out", str(plot_out), "--max-windows", "2",
    ) == 0
    svgs = sorted(plot_out.glob("*.svg"))
    assert len(svgs) == 2
    assert svgs[0].read_text().count("<polyline") >= 4

    report_out = tmp_path / "report"
    assert run("report", "--out", str(report_out), str(ck)) == 0
    table = (report_out / "report.csv").read_text().splitlines()
    assert table[0].startswith("head,refiner,params")
    assert table[1].split(",")[0] == "cascaded"


def test_eval_checkpoint_mismatch(synth_dir, tmp_path):
    train_out = desk_train(synth_dir, tmp_path)
    code = run(
        "eval", "--checkpoint", str(train_out / "checkpoint"), "--data", str(synth_dir),
        "--out", str(tmp_path / "e2"), "--tau", "6",
    )
    assert code == 2


def test_eval_nested_k_dominates(synth_dir, tmp_path):
    train_out = desk_train(synth_dir, tmp_path)
    ades = {}
    for k in (5, 20):
        out = tmp_path / f"eval{k}"
        assert run(
            "eval", "--checkpoint", str(train_out / "checkpoint"), "--data", str(synth_dir),
            "--out", str(out), "--k", str(k), "--seed", "3",
        ) == 0
        row = (out / "metrics.csv").read_text().splitlines()[1].split(",")
        ades[k] = (float(row[1]), float(row[2]))
    assert ades[20][0] <= ades[5][0]
    assert ades[20][1] <= ades[5][1]


def test_train_deterministic_checkpoints(synth_dir, tmp_path):
    out1 = desk_train(synth_dir, tmp_path, name="r1")
    out2 = desk_train(synth_dir, tmp_path, name="r2")
    m1 = (out1 / "checkpoint" / "manifest.txt").read_text()
    m2 = (out2 / "checkpoint" / "manifest.txt").read_text()
    assert m1 == m2
    for line in m1.splitlines():
        if line.startswith("param "):
            fname = line.split()[-1]
            b1 = (out1 / "checkpoint" / fname).read_bytes()
            b2 = (out2 / "checkpoint" / fname).read_bytes()
            assert b1 == b2


def test_load_windows_reads_directories(synth_dir):
    windows = load_windows(str(synth_dir), tau=8, delta=12)
    assert windows
    assert all(w.past.shape[1] == 8 and w.future.shape[1] == 12 for w in windows)


def test_training_loss_trends_down(synth_dir, tmp_path):
    out = desk_train(synth_dir, tmp_path, name="trend", **{"--epochs": "25", "--lr": "3e-3"})
    rows = (out / "loss.csv").read_text().splitlines()[1:]
    totals = [float(r.split(",")[-1]) for r in rows]
    head = np.mean(totals[:5])
    tail = np.mean(totals[-5:])
    assert tail < head


def test_plot_refiner_off_draws_coincident_lines(synth_dir, tmp_path):
    import re

    out = desk_train(synth_dir, tmp_path, name="noref", **{"--refiner": "off", "--epochs": "1"})
    plot_out = tmp_path / "noref_plots"
    assert run(
        "plot", "--checkpoint", str(out / "checkpoint"), "--data", str(synth_dir),
        "--out", str(plot_out), "--max-windows", "1",
    ) == 0
    svg = next(plot_out.glob("*.svg")).read_text()
    raws = re.findall(r'class="raw"[^>]*points="([^"]*)"', svg)
    refineds = re.findall(r'class="refined"[^>]*points="([^"]*)"', svg)
    assert raws and raws == refineds


@pytest.mark.slow
def test_report_two_checkpoints_with_paper_width_reduction(tmp_path):
    from trajcast.checkpoint import save_checkpoint
    from trajcast.model import ForecastModel, ModelConfig

    for kind in ("cascaded", "slide"):
        model = ForecastModel(ModelConfig(head=kind, refiner=True, width_scale=1, seed=0))
        save_checkpoint(model, tmp_path / kind)
    out = tmp_path / "report"
    assert run("report", "--out", str(out), str(tmp_path / "cascaded"), str(tmp_path / "slide")) == 0
    rows = (out / "report.csv").read_text().splitlines()
    assert len(rows) == 3  # header + one row per checkpoint
    by_head = {r.split(",")[0]: r.split(",") for r in rows[1:]}
    reduction = float(by_head["slide"][4].rstrip("%"))
    assert reduction >= 80.0
    assert float(by_head["slide"][2]) < float(by_head["cascaded"][2])
    md = (out / "report.md").read_text()
    assert md.count("\n") >= 4 and "| head |" in md
