"""Command-line entry point.

Subcommands: gen, train, eval, sweep-d, multipulse, gradcheck, summary.
Configuration precedence is flag > config file > default; the fully
resolved configuration (plus the toolkit version) is echoed into a
provenance JSON next to every artifact.  Artifacts themselves carry no
timestamps, so identical flags and seeds reproduce identical bytes.

Exit codes: 0 success, 1 runtime failure, 2 usage/validation error.
"""
import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, seeding
from .augment import AugmentSpec
from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import DatasetManifest, build_dataset, load_dataset
from .gradcheck import TOLERANCES, grad_check
from .metrics import (
    MetricsReport,
    multipulse_curve,
    write_curve_csv,
    write_scatter_csv,
)
from .resnet import ModelConfig, build_resnet, count_parameters, summarize
from .scenes import SceneConfig
from .training import (
    TrainConfig,
    evaluate,
    evaluate_multilabel,
    sweep_input_length,
    train,
    train_multipulse,
    write_sweep_csv,
)
from .waveforms import default_classes


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _provenance(out_dir, name, run_config, extra=None):
    payload = {"toolkit_version": __version__, "run_config": run_config}
    if extra:
        payload.update(extra)
    _write_json(Path(out_dir) / name, payload)


def _args_dict(args):
    return {k: v for k, v in vars(args).items() if k != "func"}


def _load_config_file(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file not found: {path}", 2)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON in {path}: {exc}", 2)


def _merge(defaults, file_section, flag_values):
    """flag > file > default; flags use None as the 'not given' sentinel."""
    merged = dict(defaults)
    merged.update({k: v for k, v in (file_section or {}).items()})
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    return merged


def _model_flags(sub):
    sub.add_argument("--arithmetic", choices=["complex", "iq-2ch", "real-1ch"])
    sub.add_argument("--depth", type=int)
    sub.add_argument("--width", type=int, dest="base_width")
    sub.add_argument("--kernel", type=int, dest="first_kernel")
    sub.add_argument("--input-len", type=int, dest="input_length")
    sub.add_argument("--head", choices=["softmax-ce", "sigmoid-bce"])


def _train_flags(sub):
    sub.add_argument("--batch-size", type=int)
    sub.add_argument("--lr", type=float, dest="learning_rate")
    sub.add_argument("--epochs", type=int, dest="max_epochs")
    sub.add_argument("--patience", type=int)
    sub.add_argument("--optimizer", choices=["adam", "sgd"])
    sub.add_argument("--loss", choices=["ce", "bce"])
    sub.add_argument("--seed", type=int)


def _aug_flags(sub):
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--sync", action="store_true", default=None)
    group.add_argument("--async", action="store_true", default=None, dest="asynchronous")
    sub.add_argument("--eval-repeats", type=int)


def _resolve_model(file_cfg, args, defaults):
    flags = {
        k: getattr(args, k, None)
        for k in ("arithmetic", "depth", "base_width", "first_kernel", "input_length", "head")
    }
    merged = _merge(defaults, file_cfg.get("model"), flags)
    try:
        return ModelConfig.from_dict(merged)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid model config: {exc}", 2)


def _resolve_train(file_cfg, args, defaults):
    flags = {
        k: getattr(args, k, None)
        for k in (
            "batch_size",
            "learning_rate",
            "max_epochs",
            "patience",
            "optimizer",
            "loss",
            "seed",
        )
    }
    merged = _merge(defaults, file_cfg.get("train"), flags)
    try:
        return TrainConfig.from_dict(merged)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid train config: {exc}", 2)


def _resolve_aug(file_cfg, args, d, default_mode="asynchronous"):
    section = dict(file_cfg.get("augment") or {})
    mode = section.get("mode", default_mode)
    if getattr(args, "sync", None):
        mode = "synchronous"
    if getattr(args, "asynchronous", None):
        mode = "asynchronous"
    rerandomize = bool(section.get("rerandomize", True))
    try:
        return AugmentSpec(d=d, mode=mode, rerandomize=rerandomize).validate()
    except ValueError as exc:
        raise CliError(f"invalid augment config: {exc}", 2)


def _history_artifact(history):
    d = history.to_dict()
    d.pop("wall_time_s")  # kept in run.json; artifacts stay byte-reproducible
    return d


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    manifest = DatasetManifest(
        K=args.classes,
        per_class_count=args.per_class,
        snr_range_db=(args.snr_lo, args.snr_hi),
        pulse_width_range=(args.nmin, args.nmax),
        split_fraction=args.split,
        master_seed=args.seed,
    )
    try:
        manifest.validate()
    except ValueError as exc:
        raise CliError(f"invalid manifest: {exc}", 2)
    records, mpath = build_dataset(manifest, args.out)
    _provenance(args.out, "run.json", {"command": "gen", **_args_dict(args)})
    total = manifest.K * manifest.per_class_count
    print(f"wrote {total} records to {records} (manifest: {mpath})")
    return 0


def cmd_train(args):
    file_cfg = _load_config_file(args.config)
    data = _load_data(args.data)
    model_cfg = _resolve_model(
        file_cfg,
        args,
        defaults=dict(
            arithmetic="complex",
            depth=30,
            base_width=8,
            first_kernel=9,
            input_length=1024,
            num_classes=data.manifest.K,
            head="softmax-ce",
        ),
    )
    if model_cfg.num_classes != data.manifest.K:
        raise CliError(
            f"model num_classes {model_cfg.num_classes} != dataset K {data.manifest.K}", 2
        )
    train_cfg = _resolve_train(file_cfg, args, defaults=dict())
    aug = _resolve_aug(file_cfg, args, d=model_cfg.input_length)
    repeats = args.eval_repeats if args.eval_repeats is not None else int(file_cfg.get("eval_repeats", 10))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = build_resnet(model_cfg, seed=train_cfg.seed)
    log = None
    if not args.quiet:
        def log(epoch, h):
            print(
                f"epoch {epoch:3d}  train {h.train_loss[-1]:.4f}  "
                f"test {h.test_loss[-1]:.4f}  err {h.test_error[-1]:.4f}",
                file=sys.stderr,
            )

    history = train(model, data, aug, train_cfg, log=log)
    save_checkpoint(model, out / "best.ckpt")
    _write_json(out / "history.json", _history_artifact(history))
    report = evaluate(model, data.test_pulses, aug, repeats=repeats,
                      seed=seeding.child_seed(train_cfg.seed, seeding.EVAL, 1))
    _write_json(out / "report.json", report.to_dict())
    write_scatter_csv(report, out / "scatter.csv")
    run_config = {
        "command": "train",
        "model": model_cfg.to_dict(),
        "train": train_cfg.to_dict(),
        "augment": aug.to_dict(),
        "eval_repeats": repeats,
        "data": str(args.data),
        "parameters": count_parameters(model),
    }
    _provenance(out, "run.json", run_config, extra={"wall_time_s": history.wall_time_s})
    err = report.top1_error if report.top1_error is not None else report.e_sub
    print(f"best epoch {history.best_epoch}, stopped at {history.stop_epoch}, test error {err:.4f}")
    return 0


def _load_data(path):
    p = Path(path)
    if not p.exists():
        raise CliError(f"dataset directory not found: {path}", 1)
    try:
        return load_dataset(p)
    except FileNotFoundError as exc:
        raise CliError(f"dataset incomplete: {exc}", 1)


def cmd_eval(args):
    ckpt = Path(args.ckpt)
    if not ckpt.exists():
        raise CliError(f"checkpoint not found: {args.ckpt}", 1)
    model = load_checkpoint(ckpt)
    data = _load_data(args.data)
    mode = "synchronous" if args.sync else "asynchronous"
    aug = AugmentSpec(d=model.cfg.input_length, mode=mode)
    report = evaluate(model, data.test_pulses, aug, repeats=args.repeats, seed=args.seed)
    payload = report.to_dict()
    payload["run_config"] = {
        "command": "eval",
        "ckpt": str(args.ckpt),
        "data": str(args.data),
        "repeats": args.repeats,
        "seed": args.seed,
        "augment": aug.to_dict(),
        "model": model.cfg.to_dict(),
    }
    payload["toolkit_version"] = __version__
    _write_json(args.report, payload)
    if args.scatter:
        write_scatter_csv(report, args.scatter)
    err = report.top1_error if report.top1_error is not None else report.e_sub
    print(f"test error {err:.4f} over {report.n_records} records")
    return 0


def cmd_sweep_d(args):
    file_cfg = _load_config_file(args.config)
    data = _load_data(args.data)
    d_values = [int(v) for v in args.d_values.split(",")]
    model_cfg = _resolve_model(
        file_cfg,
        args,
        defaults=dict(
            arithmetic="complex",
            depth=22,
            base_width=8,
            first_kernel=9,
            input_length=d_values[0],
            num_classes=data.manifest.K,
            head="softmax-ce",
        ),
    )
    train_cfg = _resolve_train(file_cfg, args, defaults=dict())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = sweep_input_length(
        d_values,
        data,
        model_cfg,
        train_cfg,
        repeats=args.eval_repeats or 10,
        eval_seed=seeding.child_seed(train_cfg.seed, seeding.EVAL, 2),
        build_seed=train_cfg.seed,
        jobs=args.jobs,
    )
    write_sweep_csv(rows, out / "sweep.csv")
    _provenance(
        out,
        "sweep.meta.json",
        {
            "command": "sweep-d",
            "d_values": d_values,
            "model": model_cfg.to_dict(),
            "train": train_cfg.to_dict(),
            "jobs": args.jobs,
            "data": str(args.data),
        },
    )
    for row in rows:
        print(row)
    return 0


def cmd_multipulse(args):
    specs = default_classes(args.classes)
    scene_cfg = SceneConfig(
        d=args.input_len,
        l_values=tuple(int(v) for v in args.l_values.split(",")),
        pulse_width_range=(args.nmin, min(args.nmax, args.input_len)),
        snr_range_db=(args.snr_lo, args.snr_hi),
    )
    model_cfg = ModelConfig(
        arithmetic=args.arithmetic or "complex",
        depth=args.depth or 22,
        base_width=args.base_width or 8,
        first_kernel=args.first_kernel or 9,
        input_length=args.input_len,
        num_classes=args.classes,
        head="sigmoid-bce",
    )
    train_cfg = TrainConfig(
        batch_size=args.batch_size or 128,
        learning_rate=args.learning_rate or 1e-3,
        max_epochs=args.max_epochs or 20,
        patience=args.patience or 8,
        loss="bce",
        seed=args.seed or 0,
    )
    try:
        scene_cfg.validate()
        model_cfg.validate()
        train_cfg.validate()
    except ValueError as exc:
        raise CliError(str(exc), 2)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = build_resnet(model_cfg, seed=train_cfg.seed)
    log = None
    if not args.quiet:
        def log(epoch, h):
            print(
                f"epoch {epoch:3d}  train {h.train_loss[-1]:.4f}  "
                f"test {h.test_loss[-1]:.4f}  subset-err {h.test_error[-1]:.4f}",
                file=sys.stderr,
            )

    history = train_multipulse(
        model, scene_cfg, specs, train_cfg, scenes_per_epoch=args.scenes_per_epoch, log=log
    )
    save_checkpoint(model, out / "best.ckpt")
    _write_json(out / "history.json", _history_artifact(history))
    reports = {}
    for l in scene_cfg.l_values:
        reports[l] = evaluate_multilabel(
            model,
            scene_cfg,
            specs,
            l,
            repeats=args.eval_repeats or 4,
            scenes_per_repeat=args.eval_scenes or 128,
            seed=seeding.child_seed(train_cfg.seed, seeding.EVAL, 3),
        )
        _write_json(out / f"report_l{l}.json", reports[l].to_dict())
    rows = multipulse_curve(reports)
    write_curve_csv(rows, out / "multipulse.csv")
    _provenance(
        out,
        "run.json",
        {
            "command": "multipulse",
            "model": model_cfg.to_dict(),
            "train": train_cfg.to_dict(),
            "scenes": scene_cfg.to_dict(),
            "scenes_per_epoch": args.scenes_per_epoch,
        },
        extra={"wall_time_s": history.wall_time_s},
    )
    for row in rows:
        print(f"L={row[0]}  e_abs={row[1]:.4f}  e_sub={row[2]:.4f}  K*e_abs={row[3]:.4f}")
    return 0


def cmd_gradcheck(args):
    dtype = np.float64 if args.precision == "double" else np.float32
    tol = TOLERANCES[np.dtype(dtype)]
    report = grad_check(trials=args.trials, dtype=dtype, seed=args.seed or 0)
    failed = []
    for name, entry in sorted(report.items()):
        status = "ok" if entry["max_rel_err"] <= tol else "FAIL"
        print(f"{name:<18} max_rel_err {entry['max_rel_err']:.3e}  ({entry['trials']} trials)  {status}")
        if entry["max_rel_err"] > tol:
            failed.append(name)
    print(f"tolerance {tol:g} ({args.precision})")
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_summary(args):
    file_cfg = _load_config_file(args.config)
    section = file_cfg.get("model", file_cfg)
    try:
        cfg = ModelConfig.from_dict(section)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid model config: {exc}", 2)
    s = summarize(cfg)
    model = build_resnet(cfg)
    runtime = count_parameters(model)
    print(s.format())
    if runtime != s.real_parameter_count:
        raise CliError(
            f"parameter count mismatch: runtime {runtime} vs closed form "
            f"{s.real_parameter_count}",
            1,
        )
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pulsenet",
        description="Complex-valued 1D ResNets for radar pulse classification",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic labeled pulse dataset")
    p.add_argument("--classes", type=int, default=17)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--snr-lo", type=float, default=-12.0)
    p.add_argument("--snr-hi", type=float, default=12.0)
    p.add_argument("--nmin", type=int, default=100)
    p.add_argument("--nmax", type=int, default=10000)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a classifier on a generated dataset")
    p.add_argument("--config", help="JSON with model/train/augment sections")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    _model_flags(p)
    _train_flags(p)
    _aug_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint with randomized repeats")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sync", action="store_true")
    p.add_argument("--report", required=True)
    p.add_argument("--scatter")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-d", help="train/evaluate across input lengths")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--d-values", required=True, help="comma-separated input lengths")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    _model_flags(p)
    _train_flags(p)
    p.add_argument("--eval-repeats", type=int)
    p.set_defaults(func=cmd_sweep_d)

    p = sub.add_parser("multipulse", help="train/evaluate the multi-label scene classifier")
    p.add_argument("--classes", type=int, default=17)
    p.add_argument("--input-len", type=int, default=1024)
    p.add_argument("--l-values", default="1,2,3,4")
    p.add_argument("--nmin", type=int, default=100)
    p.add_argument("--nmax", type=int, default=1024)
    p.add_argument("--snr-lo", type=float, default=-6.0)
    p.add_argument("--snr-hi", type=float, default=12.0)
    p.add_argument("--scenes-per-epoch", type=int, default=2048)
    p.add_argument("--eval-scenes", type=int)
    p.add_argument("--eval-repeats", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--arithmetic", choices=["complex", "iq-2ch", "real-1ch"])
    p.add_argument("--depth", type=int)
    p.add_argument("--width", type=int, dest="base_width")
    p.add_argument("--kernel", type=int, dest="first_kernel")
    _train_flags(p)
    p.set_defaults(func=cmd_multipulse)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    p.add_argument("--precision", choices=["double", "single"], default="double")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("summary", help="print the layer table and parameter count")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_summary)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
