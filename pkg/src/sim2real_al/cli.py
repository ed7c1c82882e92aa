"""Command-line entry point: run experiments, sweep strategies, report.

Subcommands
-----------
run     execute one experiment config (one strategy, one or more seeds)
        and write curve.csv + manifest.txt into a fresh directory
sweep   run >= 2 strategies on identical seeds and dataset draws, one
        run directory per (strategy, seed) cell, plus a comparison
        report of mean metrics and gap bridging
report  recompute gap reports from stored run directories
score   ingest an anchor-sample interchange file, run cluster-and-fuse
        plus entropy acquisition, and print ranked image scores

Config files are flat `key = value` text with dotted section prefixes
(see the schema tables below); `config_version = 1` is required.  Two
presets ship with the package: digits-analog and detection-analog.
The default output root comes from $SIM2REAL_AL_OUTPUT_ROOT.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from . import loop as al
from .acquisition import AcquisitionConfig
from .learner import TrainConfig
from .sampling import SelectionConfig

OUTPUT_ROOT_ENV = "SIM2REAL_AL_OUTPUT_ROOT"

_BOOL = "bool"
_INT = "int"
_FLOAT = "float"
_STR = "str"
_INTS = "int_list"
_STRS = "str_list"

COMMON_SCHEMA = {
    "config_version": (_INT, None),
    "track": (_STR, None),
    "name": (_STR, ""),
    "seeds": (_INTS, [0]),
    "strategies": (_STRS, []),
    "dataset.seed": (_INT, 100),
    "dataset.n_classes": (_INT, None),
    "acquisition.comb": (_STR, "sum"),
    "acquisition.agg": (_STR, "avg"),
    "acquisition.w_cls": (_FLOAT, 1.0),
    "acquisition.w_reg": (_FLOAT, 0.01),
    "acquisition.empty_image_score": (_FLOAT, 0.0),
    "selection.strategy": (_STR, "subsample_topn"),
    "selection.batch_size": (_INT, 20),
    "selection.subsample_fraction": (_FLOAT, 0.5),
    "selection.mc_count": (_INT, 100),
    "selection.seed": (_INT, 0),
    "loop.iterations": (_INT, 10),
    "loop.level": (_FLOAT, 0.95),
    "loop.replay": (_BOOL, True),
    "loop.mc_passes": (_INT, 10),
    "loop.iou_threshold": (_FLOAT, 0.5),
    "loop.cls_bayesian": (_BOOL, False),
}

CLASSIFICATION_SCHEMA = {
    "dataset.dim": (_INT, 8),
    "dataset.sim_size": (_INT, 500),
    "dataset.pool_size": (_INT, 2000),
    "dataset.test_size": (_INT, 1000),
    "dataset.class_separation": (_FLOAT, 4.0),
    "dataset.cov_scale": (_FLOAT, 1.0),
    "dataset.mean_shift": (_FLOAT, 5.5),
    "dataset.label_skew": (_FLOAT, 2.5),
    "dataset.hidden_dim": (_INT, 64),
    "dataset.dropout_rate": (_FLOAT, 0.1),
    "train.epochs": (_INT, 60),
    "train.learning_rate": (_FLOAT, 0.15),
    "train.batch_size": (_INT, 32),
    "train.fine_tune": (_BOOL, True),
}

DETECTION_SCHEMA = {
    "dataset.width": (_FLOAT, 128.0),
    "dataset.height": (_FLOAT, 128.0),
    "dataset.objects_min": (_INT, 1),
    "dataset.objects_max": (_INT, 3),
    "dataset.box_min": (_FLOAT, 24.0),
    "dataset.box_max": (_FLOAT, 48.0),
    "dataset.anchors_per_object": (_INT, 3),
    "dataset.mc_samples": (_INT, 10),
    "dataset.sim_scenes": (_INT, 100),
    "dataset.pool_scenes": (_INT, 400),
    "dataset.test_scenes": (_INT, 160),
    "dataset.label_skew": (_FLOAT, 1.5),
    "surrogate.kappa": (_FLOAT, 40.0),
    "surrogate.sim_weight": (_FLOAT, 0.15),
}

TRACKS = ("classification", "detection")


class ConfigError(Exception):
    """Config problem with a file/line anchor where available."""


def _convert(kind, raw, key, lineno, path):
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _BOOL:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == _INTS:
            return [int(v) for v in raw.split(",") if v.strip() != ""]
        if kind == _STRS:
            return [v.strip() for v in raw.split(",") if v.strip() != ""]
        return raw
    except ValueError:
        raise ConfigError(f"{path}:{lineno}: key {key!r} expects {kind}, "
                          f"got {raw!r}") from None


def parse_config_text(text: str, path: str = "<config>") -> dict:
    """Flat key = value lines into a raw {key: (value, lineno)} mapping."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {stripped!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = (value, lineno)
    return raw


@dataclass
class ExperimentConfig:
    track: str
    name: str
    seeds: list[int]
    strategies: list[str]
    dataset_spec: object           # ClassificationExperimentSpec | DetectionExperimentSpec
    al: al.ALRunConfig
    resolved: dict                 # every schema key -> final value (for manifests)


def load_config(path_or_preset: str, track_override: str = None) -> ExperimentConfig:
    text, label = resolve_config_text(path_or_preset)
    raw = parse_config_text(text, label)
    return build_experiment_config(raw, label, track_override)


def resolve_config_text(path_or_preset: str) -> tuple[str, str]:
    """Config text plus a display label, from a file or a shipped preset."""
    p = Path(path_or_preset)
    if p.exists():
        return p.read_text(), str(p)
    name = path_or_preset if path_or_preset.endswith(".cfg") else path_or_preset + ".cfg"
    packaged = resources.files("sim2real_al").joinpath("presets").joinpath(name)
    if packaged.is_file():
        return packaged.read_text(), f"preset:{path_or_preset}"
    raise ConfigError(f"config {path_or_preset!r} is neither a file nor a "
                      f"shipped preset")


def build_experiment_config(raw: dict, path: str,
                            track_override: str = None) -> ExperimentConfig:
    version_entry = raw.get("config_version")
    if version_entry is None:
        raise ConfigError(f"{path}:1: missing required key 'config_version'")
    if _convert(_INT, version_entry[0], "config_version",
                version_entry[1], path) != 1:
        raise ConfigError(f"{path}:{version_entry[1]}: unsupported "
                          f"config_version {version_entry[0]!r}")

    track = track_override or (raw.get("track", ("", 0))[0])
    if track not in TRACKS:
        lineno = raw.get("track", ("", 1))[1]
        raise ConfigError(f"{path}:{lineno}: track must be one of {TRACKS}, "
                          f"got {track!r}")

    schema = dict(COMMON_SCHEMA)
    schema.update(CLASSIFICATION_SCHEMA if track == "classification"
                  else DETECTION_SCHEMA)
    if schema["dataset.n_classes"][1] is None:
        schema["dataset.n_classes"] = (_INT, 8 if track == "classification" else 3)

    values = {"track": track}
    for key, (value, lineno) in raw.items():
        if key == "track":
            continue
        if key not in schema:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _convert(schema[key][0], value, key, lineno, path)
    for key, (kind, default) in schema.items():
        if key in values or key in ("config_version", "track"):
            continue
        if default is None:
            raise ConfigError(f"{path}: missing required key {key!r}")
        values[key] = default

    try:
        selection = SelectionConfig(
            strategy=values["selection.strategy"],
            batch_size=values["selection.batch_size"],
            subsample_fraction=values["selection.subsample_fraction"],
            mc_count=values["selection.mc_count"])
    except ValueError as exc:
        raise ConfigError(f"{path}: selection.strategy/batch_size: {exc}") from None
    try:
        acquisition = AcquisitionConfig(
            comb=values["acquisition.comb"], agg=values["acquisition.agg"],
            w_cls=values["acquisition.w_cls"], w_reg=values["acquisition.w_reg"],
            empty_image_score=values["acquisition.empty_image_score"])
    except ValueError as exc:
        raise ConfigError(f"{path}: acquisition.*: {exc}") from None

    if track == "classification":
        train = TrainConfig(epochs=values["train.epochs"],
                            learning_rate=values["train.learning_rate"],
                            batch_size=values["train.batch_size"],
                            fine_tune=values["train.fine_tune"])
        dataset_spec = al.ClassificationExperimentSpec(
            n_classes=values["dataset.n_classes"], dim=values["dataset.dim"],
            sim_size=values["dataset.sim_size"],
            pool_size=values["dataset.pool_size"],
            test_size=values["dataset.test_size"],
            class_separation=values["dataset.class_separation"],
            cov_scale=values["dataset.cov_scale"],
            mean_shift=values["dataset.mean_shift"],
            label_skew=values["dataset.label_skew"],
            hidden_dim=values["dataset.hidden_dim"],
            dropout_rate=values["dataset.dropout_rate"],
            seed=values["dataset.seed"])
    else:
        train = TrainConfig()
        dataset_spec = al.DetectionExperimentSpec(
            n_classes=values["dataset.n_classes"],
            width=values["dataset.width"], height=values["dataset.height"],
            objects_min=values["dataset.objects_min"],
            objects_max=values["dataset.objects_max"],
            box_min=values["dataset.box_min"], box_max=values["dataset.box_max"],
            anchors_per_object=values["dataset.anchors_per_object"],
            mc_samples=values["dataset.mc_samples"],
            sim_scenes=values["dataset.sim_scenes"],
            pool_scenes=values["dataset.pool_scenes"],
            test_scenes=values["dataset.test_scenes"],
            label_skew=values["dataset.label_skew"],
            surrogate=al.SurrogateParams(kappa=values["surrogate.kappa"],
                                         sim_weight=values["surrogate.sim_weight"]),
            seed=values["dataset.seed"])

    run_cfg = al.ALRunConfig(
        iterations=values["loop.iterations"], selection=selection,
        acquisition=acquisition, train=train,
        seeds=tuple(values["seeds"]), level=values["loop.level"],
        replay=values["loop.replay"], mc_passes=values["loop.mc_passes"],
        selection_seed=values["selection.seed"],
        iou_threshold=values["loop.iou_threshold"],
        cls_bayesian=values["loop.cls_bayesian"])

    return ExperimentConfig(track=track, name=values["name"],
                            seeds=list(values["seeds"]),
                            strategies=list(values["strategies"]),
                            dataset_spec=dataset_spec, al=run_cfg,
                            resolved=values)


# ---------------------------------------------------------------------------
# run execution
# ---------------------------------------------------------------------------

def _build(excfg: ExperimentConfig, run_seed: int):
    if excfg.track == "classification":
        return al.build_classification_experiment(excfg.dataset_spec, run_seed)
    return al.build_detection_experiment(excfg.dataset_spec, run_seed)


def _fresh_dir(path: Path) -> None:
    if path.exists() and any(path.iterdir()):
        raise ConfigError(f"output directory {path} already contains run "
                          f"artifacts; refusing to overwrite")
    path.mkdir(parents=True, exist_ok=True)


def _resolved_items(excfg: ExperimentConfig, strategy: str,
                    seeds: list[int]) -> dict:
    items = dict(excfg.resolved)
    items["selection.strategy"] = strategy
    items["seeds"] = ",".join(str(s) for s in seeds)
    items["strategies"] = ",".join(excfg.strategies)
    return {k: str(v) for k, v in items.items()}


def execute_run(excfg: ExperimentConfig, strategy: str, seeds: list[int],
                out_dir: Path) -> list[al.LearningCurve]:
    """Run one strategy over the given seeds and write run artifacts."""
    _fresh_dir(out_dir)
    run_cfg = replace(excfg.al,
                      selection=replace(excfg.al.selection, strategy=strategy))
    curves = []
    for seed in seeds:
        datasets, oracle, learner = _build(excfg, seed)
        curves.append(al.run_al(run_cfg, datasets, learner, oracle, seed))
    al.write_curve_csv(out_dir / "curve.csv", curves)
    al.write_manifest(out_dir / "manifest.txt",
                      _resolved_items(excfg, strategy, seeds), curves)
    return curves


def _default_out(excfg: ExperimentConfig, config_arg: str) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    name = excfg.name or Path(config_arg).stem
    return Path(root) / name


def cmd_run(args) -> int:
    excfg = load_config(args.config, args.track)
    seeds = [args.seed] if args.seed is not None else excfg.seeds
    strategy = args.strategy or excfg.al.selection.strategy
    out_dir = Path(args.out) if args.out else _default_out(excfg, args.config)
    curves = execute_run(excfg, strategy, seeds, out_dir)
    for curve in curves:
        report = al.gap_report(curve)
        print(f"seed {curve.seed}: strategy={curve.strategy} "
              f"mean_metric={report.mean_metric:.4f} "
              f"bridged={_fmt_bridged(report, curve)}")
    print(f"artifacts written to {out_dir}")
    return 0


def cmd_sweep(args) -> int:
    excfg = load_config(args.config, args.track)
    strategies = excfg.strategies
    if args.strategy:
        strategies = [s.strip() for s in args.strategy.split(",") if s.strip()]
    if len(strategies) < 2:
        raise ConfigError("sweep needs at least 2 strategies "
                          "(set 'strategies = a,b,...' in the config)")
    seeds = [args.seed] if args.seed is not None else excfg.seeds
    out_root = Path(args.out) if args.out else _default_out(excfg, args.config)
    _fresh_dir(out_root)

    rows = []
    for strategy in strategies:
        for seed in seeds:
            cell_dir = out_root / f"{strategy}-s{seed}"
            curves = execute_run(excfg, strategy, [seed], cell_dir)
            report = al.gap_report(curves[0])
            rows.append((strategy, seed, report, curves[0]))

    text = _sweep_report_text(rows)
    (out_root / "sweep_report.txt").write_text(text)
    print(text, end="")
    print(f"sweep artifacts written to {out_root}")
    return 0


def _fmt_bridged(report: al.GapReport, curve) -> str:
    if report.bridged_fraction is None:
        max_frac = max(p.labeled_fraction for p in curve.points)
        return f"> {100 * max_frac:.1f}%"
    return f"{100 * report.bridged_fraction:.1f}%"


def _sweep_report_text(rows) -> str:
    lines = ["strategy, seed, bridged_fraction, mean_metric"]
    for strategy, seed, report, curve in rows:
        lines.append(f"{strategy}, {seed}, {_fmt_bridged(report, curve)}, "
                     f"{report.mean_metric:.6f}")
    lines.append("")
    by_strategy: dict[str, list] = {}
    for strategy, _, report, curve in rows:
        by_strategy.setdefault(strategy, []).append((report, curve))
    lines.append("strategy means:")
    for strategy, items in by_strategy.items():
        mean_metric = sum(r.mean_metric for r, _ in items) / len(items)
        fracs = [r.bridged_fraction if r.bridged_fraction is not None
                 else max(p.labeled_fraction for p in c.points)
                 for r, c in items]
        all_bridged = all(r.bridged_fraction is not None for r, _ in items)
        marker = "" if all_bridged else ">"
        lines.append(f"  {strategy}: mean_metric={mean_metric:.6f} "
                     f"mean_bridged={marker}{100 * sum(fracs) / len(fracs):.1f}%")
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    groups: dict[tuple, list] = {}
    skipped = 0
    for raw_dir in args.run_dirs:
        run_dir = Path(raw_dir)
        try:
            manifest = al.read_manifest(run_dir / "manifest.txt")
            csv_data = al.read_curve_csv(run_dir / "curve.csv")
        except (OSError, ValueError, KeyError) as exc:
            print(f"warning: skipping {run_dir}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        key = tuple(sorted((k, v) for k, v in manifest.items()
                           if k.startswith("config.dataset.")
                           or k.startswith("config.loop.")
                           or k == "config.track"))
        for seed in sorted(csv_data["points"]):
            try:
                curve = al.curve_from_artifacts(manifest, csv_data, seed)
            except (KeyError, ValueError) as exc:
                print(f"warning: skipping {run_dir} seed {seed}: {exc}",
                      file=sys.stderr)
                skipped += 1
                continue
            groups.setdefault(key, []).append((str(run_dir), curve))
    if not groups:
        print("error: no readable run directories", file=sys.stderr)
        return 1

    for gi, (key, entries) in enumerate(sorted(groups.items()), start=1):
        print(f"group {gi} ({len(entries)} runs)")
        for run_dir, curve in entries:
            report = al.gap_report(curve)
            print(f"  {run_dir} seed={curve.seed} strategy={curve.strategy} "
                  f"gap={report.gap:.4f} bridged={_fmt_bridged(report, curve)} "
                  f"mean_metric={report.mean_metric:.6f}")
    if skipped:
        print(f"({skipped} unreadable run(s) skipped)", file=sys.stderr)
    return 0


def cmd_score(args) -> int:
    from .acquisition import score_image
    from .fusion import bayesod_inference, read_anchor_records
    try:
        records = read_anchor_records(args.anchors)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read anchor records: {exc}") from None
    try:
        acq_cfg = AcquisitionConfig(comb=args.comb, agg=args.agg,
                                    w_cls=args.w_cls, w_reg=args.w_reg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    scored = []
    for image_id, preds in records:
        detections = bayesod_inference(preds, iou_threshold=args.iou_threshold,
                                       cls_bayesian=args.cls_bayesian)
        scored.append(score_image(detections, acq_cfg, image_id=image_id))
    scored.sort(key=lambda s: (-s.score, str(s.image_id)))
    print("image_id,score,n_detections")
    for s in scored:
        print(f"{s.image_id},{repr(s.score)},{s.n_detections}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim2real-al",
        description="Bayesian active learning over a simulated sim-to-real gap")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment config")
    run_p.add_argument("--config", required=True,
                       help="config file path or preset name")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config seeds with one seed")
    run_p.add_argument("--out", default=None, help="output run directory")
    run_p.add_argument("--strategy", default=None,
                       help="override selection.strategy")
    run_p.add_argument("--track", choices=TRACKS, default=None)
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="compare strategies on shared seeds")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.add_argument("--out", default=None, help="output root directory")
    sweep_p.add_argument("--strategy", default=None,
                         help="comma list overriding 'strategies'")
    sweep_p.add_argument("--track", choices=TRACKS, default=None)
    sweep_p.set_defaults(func=cmd_sweep)

    report_p = sub.add_parser("report", help="summarize stored run directories")
    report_p.add_argument("run_dirs", nargs="+")
    report_p.set_defaults(func=cmd_report)

    score_p = sub.add_parser("score",
                             help="score an anchor-sample interchange file")
    score_p.add_argument("--anchors", required=True,
                         help="anchor records file (interchange format)")
    score_p.add_argument("--iou-threshold", type=float, default=0.5)
    score_p.add_argument("--cls-bayesian", action="store_true",
                         help="fuse class scores too, not only boxes")
    score_p.add_argument("--comb", default="sum")
    score_p.add_argument("--agg", default="avg")
    score_p.add_argument("--w-cls", type=float, default=1.0)
    score_p.add_argument("--w-reg", type=float, default=0.01)
    score_p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
