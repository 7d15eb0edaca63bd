"""Command-line surface: synth, train, eval, plot, report.

Configuration precedence is flags > config file > built-in defaults; the
resolved configuration is persisted as run_config.txt beside every
command's outputs. Config files are plain text, one kebab-case key per
line: ``key=value`` (blank lines and ``#`` comments ignored).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .datasets import SceneWindow, extract_windows, parse_scene, write_scene
from .errors import DataError, NumericError, UsageError
from .evaluation import (
    efficiency_report,
    evaluate_model,
    noise_stream,
    write_frame_curve_csv,
    write_metrics_csv,
)
from .model import ForecastModel, ModelConfig
from .svgplot import render_window_svg
from .synthetic import SynthConfig, synth_scenes
from .training import TrainConfig, train_model, write_loss_csv


@dataclass(frozen=True)
class Opt:
    flag: str
    type: type
    default: object = None
    required: bool = False
    choices: tuple | None = None
    help: str = ""

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


_COMMON_SYNTH = [
    Opt("--walkers", int, 0, help="straight constant-velocity pedestrians"),
    Opt("--turners", int, 0, help="pedestrians on smooth arcs"),
    Opt("--crossing-pairs", int, 0, help="pairs whose paths cross inside the mask radius"),
    Opt("--avoidance-pairs", int, 0, help="head-on pairs that curve around each other"),
    Opt("--steps", int, 20, help="samples per generated pedestrian"),
    Opt("--speed-min", float, 0.2),
    Opt("--speed-max", float, 1.0),
    Opt("--noise-sigma", float, 0.0),
    Opt("--mask-radius", float, 2.0),
    Opt("--spread", float, 10.0),
]

OPTIONS: dict[str, list[Opt]] = {
    "synth": [
        Opt("--out", str, required=True, help="directory for generated scene files"),
        Opt("--seed", int, 0),
        *_COMMON_SYNTH,
    ],
    "train": [
        Opt("--data", str, required=True, help="scene file or directory of scene files"),
        Opt("--out", str, required=True, help="output directory (checkpoint + loss curve)"),
        Opt("--head", str, "cascaded", choices=("baseline", "cascaded", "slide")),
        Opt("--refiner", str, "on", choices=("on", "off")),
        Opt("--tau", int, 8, help="observed past length in samples"),
        Opt("--delta", int, 12, help="prediction horizon in samples"),
        Opt("--alpha", int, 8, help="slide window length (must not exceed tau)"),
        Opt("--width-scale", int, 1, help="divide every free layer width by this factor"),
        Opt("--latent-dim", int, 0, help="override the latent width (0: width table value)"),
        Opt("--mask-radius", float, 2.0),
        Opt("--lr", float, 3e-4),
        Opt("--epochs", int, 600),
        Opt("--batch", int, 512),
        Opt("--stride", int, 1, help="window stride when slicing scenes"),
        Opt("--seed", int, 0),
        Opt("--teacher-forcing", str, "off", choices=("on", "off")),
        Opt("--preset", str, "paper", choices=("paper", "desk")),
    ],
    "eval": [
        Opt("--checkpoint", str, required=True),
        Opt("--data", str, required=True),
        Opt("--out", str, required=True),
        Opt("--k", int, 20, help="samples per pedestrian for best-of-K"),
        Opt("--seed", int, 0),
        Opt("--stride", int, 1),
        Opt("--tau", int, None, help="optional consistency check against the checkpoint"),
        Opt("--delta", int, None, help="optional consistency check against the checkpoint"),
        Opt("--alpha", int, None, help="optional consistency check against the checkpoint"),
    ],
    "plot": [
        Opt("--checkpoint", str, required=True),
        Opt("--data", str, required=True),
        Opt("--out", str, required=True),
        Opt("--max-windows", int, 8),
        Opt("--seed", int, 0),
        Opt("--stride", int, 1),
    ],
    "report": [
        Opt("--out", str, required=True),
    ],
}

# The desk preset trades the full-scale defaults for a configuration that
# trains in minutes on one CPU core.
DESK_PRESET = {"width_scale": 4, "latent_dim": 2, "epochs": 200, "batch": 32, "lr": 1e-3}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="trajcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    for command, opts in OPTIONS.items():
        p = sub.add_parser(command, add_help=True)
        p.error = parser.error  # type: ignore[method-assign]
        for opt in opts:
            kwargs = {"dest": opt.dest, "type": opt.type, "default": argparse.SUPPRESS,
                      "help": opt.help}
            if opt.choices:
                kwargs["choices"] = opt.choices
            p.add_argument(opt.flag, **kwargs)
        if command == "report":
            p.add_argument("checkpoints", nargs="+", help="checkpoint directories")
        p.add_argument("--config", dest="config", default=argparse.SUPPRESS,
                       help="key=value config file (flags override it)")
    return parser


def _read_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"config file not found: {p}")
    pairs = {}
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{p}:{lineno}: expected key=value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def _resolve(command: str, cli_args: dict) -> dict:
    opts = {o.dest: o for o in OPTIONS[command]}
    merged = {o.dest: o.default for o in OPTIONS[command]}
    if command == "train" and cli_args.get("preset", merged.get("preset")) == "desk":
        merged.update(DESK_PRESET)
    if "config" in cli_args:
        for key, raw in _read_config_file(cli_args.pop("config")).items():
            dest = key.replace("-", "_")
            if dest not in opts:
                raise UsageError(f"unknown config key {key!r} for command {command!r}")
            try:
                merged[dest] = opts[dest].type(raw)
            except ValueError:
                raise UsageError(f"config key {key!r}: cannot parse {raw!r}") from None
    for dest, value in cli_args.items():
        if dest in ("command", "checkpoints"):
            continue
        merged[dest] = value
    for o in OPTIONS[command]:
        if o.required and merged.get(o.dest) is None:
            raise UsageError(f"{command}: missing required flag {o.flag}")
    return merged


def _persist_config(command: str, cfg: dict, out_dir: Path, extra: dict | None = None) -> None:
    lines = [f"command={command}"]
    for dest in sorted(cfg):
        value = cfg[dest]
        if value is None:
            continue
        lines.append(f"{dest.replace('_', '-')}={value}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}={value}")
    (out_dir / "run_config.txt").write_text("\n".join(lines) + "\n")


def load_windows(data: str, tau: int, delta: int, stride: int = 1) -> list[SceneWindow]:
    """Parse one file or every scene file in a directory and slice windows."""
    path = Path(data)
    if path.is_dir():
        files = sorted(
            p
            for p in path.iterdir()
            if p.suffix in (".tsv", ".csv", ".txt") and p.name != "run_config.txt"
        )
    elif path.is_file():
        files = [path]
    else:
        raise DataError(f"no such data path: {path}")
    if not files:
        raise DataError(f"no scene files (*.tsv, *.csv, *.txt) in {path}")
    windows: list[SceneWindow] = []
    for f in files:
        fmt = "csv-sdd" if f.suffix == ".csv" else "tsv-frame-ped-xy"
        scene = parse_scene(f, fmt)
        windows.extend(extract_windows(scene, tau=tau, delta=delta, stride=stride))
    if not windows:
        raise DataError(
            f"{path}: no window of {tau}+{delta} co-present samples in the data"
        )
    return windows


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(cfg: dict) -> int:
    gen = SynthConfig(
        walkers=cfg["walkers"],
        turners=cfg["turners"],
        crossing_pairs=cfg["crossing_pairs"],
        avoidance_pairs=cfg["avoidance_pairs"],
        steps=cfg["steps"],
        speed_min=cfg["speed_min"],
        speed_max=cfg["speed_max"],
        noise_sigma=cfg["noise_sigma"],
        mask_radius=cfg["mask_radius"],
        spread=cfg["spread"],
    )
    scenes = synth_scenes(gen, cfg["seed"])
    out = _out_dir(cfg)
    for scene in scenes:
        write_scene(scene, out / f"{scene.scene_id}.tsv")
    _persist_config("synth", cfg, out, {"scenes": len(scenes)})
    print(f"wrote {len(scenes)} scene files to {out}")
    return 0


def cmd_train(cfg: dict) -> int:
    windows = load_windows(cfg["data"], cfg["tau"], cfg["delta"], cfg["stride"])
    model = ForecastModel(
        ModelConfig(
            head=cfg["head"],
            refiner=cfg["refiner"] == "on",
            tau=cfg["tau"],
            delta=cfg["delta"],
            alpha=cfg["alpha"],
            width_scale=cfg["width_scale"],
            latent_dim=cfg["latent_dim"],
            mask_radius=cfg["mask_radius"],
            seed=cfg["seed"],
        )
    )
    tcfg = TrainConfig(
        lr=cfg["lr"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch"],
        seed=cfg["seed"],
        teacher_forcing=cfg["teacher_forcing"] == "on",
    )
    history = train_model(model, windows, tcfg)
    out = _out_dir(cfg)
    save_checkpoint(model, out / "checkpoint")
    write_loss_csv(history, out / "loss.csv")
    _persist_config("train", cfg, out, {"windows": len(windows), "params": model.param_count()})
    final = history[-1]
    print(
        f"trained {cfg['head']} head on {len(windows)} windows for {cfg['epochs']} epochs;"
        f" final loss {final.total:.6f} (ap {final.l_ap:.6f}, kld {final.l_kld:.6f},"
        f" r {final.l_r:.6f})"
    )
    print(f"checkpoint: {out / 'checkpoint'}")
    return 0


def _check_matches_checkpoint(cfg: dict, model_cfg: ModelConfig) -> None:
    for key in ("tau", "delta", "alpha"):
        wanted = cfg.get(key)
        if wanted is not None and wanted != getattr(model_cfg, key):
            raise DataError(
                f"--{key} {wanted} disagrees with the checkpoint ({getattr(model_cfg, key)})"
            )


def cmd_eval(cfg: dict) -> int:
    model = load_checkpoint(cfg["checkpoint"])
    _check_matches_checkpoint(cfg, model.cfg)
    windows = load_windows(cfg["data"], model.cfg.tau, model.cfg.delta, cfg["stride"])
    report = evaluate_model(model, windows, k=cfg["k"], seed=cfg["seed"])
    out = _out_dir(cfg)
    write_metrics_csv(report, out / "metrics.csv")
    write_frame_curve_csv(report, out / "frame_ade.csv")
    _persist_config("eval", cfg, out, {"windows": len(windows), "peds": report.n_peds})
    print(f"ade {report.ade:.6f}  fde {report.fde:.6f}  (best of {report.k}, {report.n_peds} peds)")
    return 0


def cmd_plot(cfg: dict) -> int:
    model = load_checkpoint(cfg["checkpoint"])
    windows = load_windows(cfg["data"], model.cfg.tau, model.cfg.delta, cfg["stride"])
    chosen = windows[: cfg["max_windows"]]
    if not chosen:
        raise DataError("nothing to plot: the data yields no windows")
    out = _out_dir(cfg)
    for wi, window in enumerate(chosen):
        noise = noise_stream(
            cfg["seed"], wi, 0, model.cfg.delta, window.n_peds, model.arch.latent_dim
        )
        prediction = model.predict_window(window, noise)
        (out / f"window_{wi:03d}.svg").write_text(render_window_svg(window, prediction))
    _persist_config("plot", cfg, out, {"windows": len(chosen)})
    print(f"wrote {len(chosen)} SVG files to {out}")
    return 0


def cmd_report(cfg: dict, checkpoints: list[str]) -> int:
    from .synthetic import SynthConfig as _SC

    rows = []
    for ck in checkpoints:
        model = load_checkpoint(ck)
        scenes = synth_scenes(_SC(walkers=4, steps=model.cfg.tau + model.cfg.delta), seed=0)
        timing_windows = [
            w for s in scenes for w in extract_windows(s, model.cfg.tau, model.cfg.delta)
        ]
        stats = efficiency_report(model, timing_windows)
        rows.append(
            {
                "checkpoint": ck,
                "head": model.cfg.head,
                "refiner": "on" if model.cfg.refiner else "off",
                "params": stats.param_count,
                "sec_per_batch": stats.seconds_per_batch,
            }
        )
    cascaded = next((r["params"] for r in rows if r["head"] == "cascaded"), None)
    for r in rows:
        r["reduction_vs_cascaded"] = (
            "" if cascaded is None else f"{(1.0 - r['params'] / cascaded) * 100.0:.1f}%"
        )
    out = _out_dir(cfg)
    header = ["head", "refiner", "params", "sec_per_batch", "reduction_vs_cascaded"]
    md = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    csv_lines = [",".join(header)]
    for r in rows:
        md.append("| " + " | ".join(str(r[h]) for h in header) + " |")
        csv_lines.append(",".join(str(r[h]) for h in header))
    (out / "report.md").write_text("\n".join(md) + "\n")
    (out / "report.csv").write_text("\n".join(csv_lines) + "\n")
    _persist_config("report", cfg, out, {"checkpoints": len(rows)})
    print("\n".join(md))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        cli_args = vars(ns)
        command = cli_args.get("command")
        if command is None:
            raise UsageError("missing command (expected one of: " + ", ".join(OPTIONS) + ")")
        checkpoints = cli_args.pop("checkpoints", None)
        cfg = _resolve(command, cli_args)
        if command == "synth":
            return cmd_synth(cfg)
        if command == "train":
            return cmd_train(cfg)
        if command == "eval":
            return cmd_eval(cfg)
        if command == "plot":
            return cmd_plot(cfg)
        return cmd_report(cfg, checkpoints)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
