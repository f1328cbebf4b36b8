"""Command-line interface: train, evaluate, predict, report.

Configuration precedence, highest first: CLI flags, the CXRNET_DATA_ROOT
environment variable (dataset root only), the JSON config file, built-in
defaults. Config files use a strict schema; unknown keys are rejected.

Every failure exits with a category-specific code and prints one line to
stderr of the form ``cxrnet: error category=<category>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import PIL

from . import __version__
from .datapipe import AugmentConfig, preprocess_image, scan_dataset
from .errors import (ConfigError, CxrnetError, DecodeError, FormatError,
                     InputError, LayoutError, NumericError)
from .metrics import evaluate_scores, report_to_dict, write_report
from .trainer import (TrainConfig, build_model, evaluate, load_checkpoint,
                      save_checkpoint, train, write_history_csv)

ENV_DATA_ROOT = "CXRNET_DATA_ROOT"

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_LAYOUT = 3
EXIT_DECODE = 4
EXIT_FORMAT = 5
EXIT_NUMERIC = 6

_ERROR_CATEGORIES = [
    (ConfigError, "config", EXIT_CONFIG),
    (LayoutError, "layout", EXIT_LAYOUT),
    (DecodeError, "decode", EXIT_DECODE),
    (FormatError, "format", EXIT_FORMAT),
    (NumericError, "numeric", EXIT_NUMERIC),
    (CxrnetError, "input", EXIT_OTHER),
]

_AUGMENT_KEYS = {"rotation_max_deg", "zoom_max_frac",
                 "horizontal_flip_prob", "shift_max_frac"}
_PLATEAU_KEYS = {"factor", "patience", "min_lr"}
_TOP_KEYS = {"data_root", "out_dir", "epochs", "batch_size", "seed",
             "learning_rate", "augment", "plateau", "cache_images"}


@dataclass
class RunConfig:
    """Validated run settings; defaults reproduce the reference protocol."""
    data_root: str | None = None
    out_dir: str = "runs/default"
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    learning_rate: float = 1e-3
    augment: AugmentConfig | None = field(default_factory=AugmentConfig)
    plateau_factor: float = 0.1
    plateau_patience: int = 3
    min_lr: float = 1e-5
    cache_images: bool = True

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, seed=self.seed,
                           batch_size=self.batch_size, initial_lr=self.learning_rate,
                           augment=self.augment, plateau_factor=self.plateau_factor,
                           plateau_patience=self.plateau_patience, min_lr=self.min_lr,
                           cache_images=self.cache_images)

    def to_dict(self) -> dict:
        aug = None
        if self.augment is not None:
            aug = {"rotation_max_deg": self.augment.rotation_max_deg,
                   "zoom_max_frac": self.augment.zoom_max_frac,
                   "horizontal_flip_prob": self.augment.horizontal_flip_prob,
                   "shift_max_frac": self.augment.shift_max_frac}
        return {"data_root": self.data_root, "out_dir": self.out_dir,
                "epochs": self.epochs, "batch_size": self.batch_size,
                "seed": self.seed, "learning_rate": self.learning_rate,
                "augment": aug,
                "plateau": {"factor": self.plateau_factor,
                            "patience": self.plateau_patience,
                            "min_lr": self.min_lr},
                "cache_images": self.cache_images}


def _require_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def load_run_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _require_keys(raw, _TOP_KEYS, "config")
    try:
        if "augment" in raw:
            aug = raw.pop("augment")
            if aug is None:
                cfg.augment = None
            else:
                _require_keys(aug, _AUGMENT_KEYS, "augment")
                cfg.augment = AugmentConfig(**aug)
        if "plateau" in raw:
            plateau = raw.pop("plateau")
            _require_keys(plateau, _PLATEAU_KEYS, "plateau")
            cfg.plateau_factor = float(plateau.get("factor", cfg.plateau_factor))
            cfg.plateau_patience = int(plateau.get("patience", cfg.plateau_patience))
            cfg.min_lr = float(plateau.get("min_lr", cfg.min_lr))
        for key, value in raw.items():
            setattr(cfg, key, value)
        cfg.epochs = int(cfg.epochs)
        cfg.batch_size = int(cfg.batch_size)
        cfg.seed = int(cfg.seed)
        cfg.learning_rate = float(cfg.learning_rate)
        cfg.out_dir = str(cfg.out_dir)
        cfg.cache_images = bool(cfg.cache_images)
        if cfg.data_root is not None:
            cfg.data_root = str(cfg.data_root)
    except (TypeError, ValueError, InputError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    return cfg


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    env_root = os.environ.get(ENV_DATA_ROOT)
    if env_root:
        cfg.data_root = env_root
    if getattr(args, "data", None):
        cfg.data_root = args.data
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "epochs", None) is not None:
        cfg.epochs = args.epochs
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    return cfg


def _config_sha256(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args)
    if cfg.data_root is None:
        raise ConfigError("no dataset root (use --data, config data_root, "
                          f"or ${ENV_DATA_ROOT})")
    splits = scan_dataset(cfg.data_root)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg.seed)
    best_val = float("inf")

    def epoch_end(net, adam, record, plateau):
        nonlocal best_val
        save_checkpoint(out / "last.ckpt", net, adam, record.epoch, cfg.seed)
        if record.val_loss < best_val:
            best_val = record.val_loss
            save_checkpoint(out / "best.ckpt", net, adam, record.epoch, cfg.seed)
        print(f"epoch {record.epoch}/{cfg.epochs} "
              f"train_loss={record.train_loss:.4f} train_acc={record.train_accuracy:.4f} "
              f"val_loss={record.val_loss:.4f} val_acc={record.val_accuracy:.4f} "
              f"lr={record.learning_rate:g}")

    model, history = train(model, splits, cfg.train_config(), epoch_end=epoch_end)
    write_history_csv(history, out / "history.csv")
    manifest = {"seed": cfg.seed, "config_sha256": _config_sha256(cfg),
                "config": cfg.to_dict(),
                "versions": {"cxrnet": __version__, "numpy": np.__version__,
                             "pillow": PIL.__version__}}
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {out / 'history.csv'}")
    return EXIT_OK


def _write_scores_csv(path: Path, paths, labels, scores) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["path", "label", "score"])
        for p, y, s in zip(paths, labels, scores):
            writer.writerow([str(p), int(y), repr(float(s))])


def _emit_report(scores, labels, out_dir: Path) -> int:
    report = evaluate_scores(scores, labels)
    paths = write_report(report, out_dir)
    print(f"accuracy={report.accuracy:.4f} roc_auc={report.roc_auc:.4f} "
          f"pr_auc={report.pr_auc:.4f}")
    print(f"wrote {paths['report']}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args)
    if cfg.data_root is None:
        raise ConfigError("no dataset root (use --data, config data_root, "
                          f"or ${ENV_DATA_ROOT})")
    model, _, _, _ = load_checkpoint(args.checkpoint)
    splits = scan_dataset(cfg.data_root)
    ds = splits[args.split]
    scores, labels = evaluate(model, ds, batch_size=cfg.batch_size)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_scores_csv(out / "scores.csv", [p for p, _ in ds.items], labels, scores)
    return _emit_report(scores, labels, out)


def cmd_predict(args: argparse.Namespace) -> int:
    model, _, _, _ = load_checkpoint(args.checkpoint)
    img = preprocess_image(args.image)
    probs, _ = model.forward(img[None, None, :, :])
    prob = float(probs[0, 0])
    label = "PNEUMONIA" if prob >= 0.5 else "NORMAL"
    print(f"{prob!r} {label}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.scores)
    if not path.is_file():
        raise InputError(f"scores file not found: {path}")
    labels = []
    scores = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"label", "score"} <= set(reader.fieldnames):
            raise InputError("scores CSV must have 'label' and 'score' columns")
        for row in reader:
            labels.append(int(row["label"]))
            scores.append(float(row["score"]))
    out = Path(args.out) if args.out else path.parent
    out.mkdir(parents=True, exist_ok=True)
    return _emit_report(np.array(scores), np.array(labels), out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cxrnet",
        description="Train and evaluate the chest X-ray Normal/Pneumonia CNN.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write run artifacts")
    p_train.add_argument("--config", help="JSON run config")
    p_train.add_argument("--data", help="dataset root directory")
    p_train.add_argument("--out", help="output directory")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--epochs", type=int)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--split", default="test", choices=["train", "val", "test"])
    p_eval.add_argument("--config", help="JSON run config")
    p_eval.add_argument("--data", help="dataset root directory")
    p_eval.add_argument("--out", help="output directory")
    p_eval.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    p_eval.set_defaults(func=cmd_evaluate)

    p_pred = sub.add_parser("predict", help="classify one image")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--image", required=True)
    p_pred.set_defaults(func=cmd_predict)

    p_rep = sub.add_parser("report", help="re-derive report files from saved scores")
    p_rep.add_argument("--scores", required=True, help="scores.csv from evaluate")
    p_rep.add_argument("--out", help="output directory (default: alongside scores)")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CxrnetError as exc:
        for err_cls, category, code in _ERROR_CATEGORIES:
            if isinstance(exc, err_cls):
                message = " ".join(str(exc).split())
                print(f"cxrnet: error category={category}: {message}", file=sys.stderr)
                return code
        raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
