"""Command-line entry point: ``dbn-spread <stage> [options]``.

Every stage reads the same YAML config. ``--set section.key=value`` overrides
any key (values are parsed as YAML, so ``--set dbn.sizes=[10,20]`` works).
Exit codes: 0 success, 2 validation error, 3 data error, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from . import __version__
from .config import load_config
from .errors import PipelineError, ValidationError
from .pipeline import STAGE_FUNCS, cmd_pipeline, run_stage

log = logging.getLogger("dbn_spread")


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        try:
            out[key.strip()] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ValidationError(f"cannot parse value for {key}: {exc}") from exc
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config (default: the bundled synthetic config)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; repeatable")
    common.add_argument("--seed", type=int, help="root seed")
    common.add_argument("--output-dir", help="artifact directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dbn-spread", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    helps = {
        "synth": "generate a synthetic two-instrument CSV pair",
        "ingest": "parse, clean and align the two instruments",
        "portfolio": "fit PCA on the train split and build the PC2 portfolio",
        "features": "trend features, labels and min-max scaling per split",
        "pretrain": "greedy layer-wise DBN pretraining",
        "train": "fit the classifiers",
        "evaluate": "direction metrics, ROC curves and tables",
        "backtest": "trade the test split and report PNL",
        "pipeline": "run every stage in order and write the manifest",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        if name == "train":
            p.add_argument("--classifier", choices=("logreg", "svm", "nn", "all"), default="all")
            p.add_argument("--epochs", type=int, help="epochs for logreg and nn")
            p.add_argument("--lr", type=float, help="learning rate for logreg and nn")
            p.add_argument("--lambda", dest="ridge_lambda", type=float, help="logreg ridge penalty")
            p.add_argument("--momentum", type=float, help="nn momentum")
            p.add_argument("--C-grid", dest="c_grid", type=_float_list, help="SVM costs, e.g. 0.1,1,10")
            p.add_argument("--gamma", type=float, help="RBF kernel width")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict:
    over = _parse_set(args.overrides)
    if args.seed is not None:
        over["seed"] = args.seed
    if args.output_dir is not None:
        over["output_dir"] = args.output_dir
    if args.command == "train":
        if args.classifier != "all":
            over["classifiers.kinds"] = [args.classifier]
        for attr, keys in (
            ("epochs", ("classifiers.logreg.epochs", "classifiers.nn.epochs")),
            ("lr", ("classifiers.logreg.lr", "classifiers.nn.lr")),
            ("ridge_lambda", ("classifiers.logreg.ridge_lambda",)),
            ("momentum", ("classifiers.nn.momentum",)),
            ("c_grid", ("classifiers.svm.c_grid",)),
            ("gamma", ("classifiers.svm.gamma",)),
        ):
            value = getattr(args, attr)
            if value is not None:
                for k in keys:
                    over[k] = value
    return over


def _print_summary(command: str, result: dict) -> None:
    if command == "pipeline":
        for stage, secs in result["timings"].items():
            print(f"{stage:<10} {secs:8.2f} s")
        print(result["results"]["evaluate"]["tables"])
        _print_summary("backtest", result["results"]["backtest"])
        print(f"manifest: {len(result['manifest']['artifacts'])} artifacts")
    elif command == "evaluate":
        print(result["tables"])
    elif command == "backtest":
        print(f"{'run':<20}{'total PNL':>14}{'max drawdown':>15}{'hit rate':>10}")
        for name, s in result["runs"].items():
            print(f"{name:<20}{s['total_pnl']:>14,.0f}{s['max_drawdown']:>15,.0f}{s['hit_rate']:>10.3f}")
    else:
        print(yaml.safe_dump(result, sort_keys=True, default_flow_style=False).rstrip())


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    stage = None
    try:
        cfg = load_config(args.config, overrides_from_args(args))
        if args.command == "pipeline":
            result = cmd_pipeline(cfg)
        else:
            stage = args.command
            result = run_stage(cfg, args.command)
    except PipelineError as exc:
        tag = getattr(exc, "stage", None) or stage
        prefix = f"[{tag}] " if tag else ""
        print(f"error: {prefix}{exc}", file=sys.stderr)
        return exc.exit_code
    _print_summary(args.command, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "STAGE_FUNCS"]
