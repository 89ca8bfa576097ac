"""Pipeline stages. Each stage reads its inputs from, and writes its outputs
to, the configured output directory, so stages can run one at a time or in
sequence with identical results.

Layout::

    data/      raw inputs (synthetic), aligned prices, portfolio, datasets, ledgers
    models/    scaler, DBN and classifier files
    reports/   JSON reports and human-readable tables
    traces/    per-epoch curves and cumulative PNL series
    manifest.json
"""

from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import (
    ORACLE, StrategyConfig, perfect_foresight_signals, random_baseline, signals_from_classifier,
    simulate, summarize,
)
from .classifiers import (
    BestEpoch, TrainedClassifier, logreg_score, logreg_train, nn_from_dbn, nn_score, nn_train,
    select_svm,
)
from .config import PipelineConfig, validate
from .errors import DataError, PipelineError
from .features import (
    Dataset, apply_scaler, build_features, dataset_from_csv, dataset_to_csv,
    fit_scaler, make_dataset, warmup_rows,
)
from .market_data import (
    AlignedPair, align, chronological_split, clean, pair_from_csv, pair_to_csv, parse_cme_csv,
    series_to_csv,
)
from .metrics import metrics_report, roc
from .pca_portfolio import (
    Standardizer, explained_variance_check, fit_standardizer, pca_2d, portfolio_price,
)
from .rbm import DbnModel, dbn_pretrain, dbn_transform
from .synth import synth_pair
from .util import FORMAT_VERSION, derive_seed, read_json, sha256_file, write_json, write_text

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
STAGES = ("ingest", "portfolio", "features", "pretrain", "train", "evaluate", "backtest")
MANIFEST = "manifest.json"
TIMINGS = "timings.json"


def _path(cfg: PipelineConfig, *parts: str) -> Path:
    return cfg.out.joinpath(*parts)


def _require(path: Path, stage: str) -> Path:
    if not path.is_file():
        raise DataError(f"{path} not found; run the {stage!r} stage first")
    return path


def cmd_synth(cfg: PipelineConfig) -> dict:
    a, b = synth_pair(cfg.synth, derive_seed(cfg.seed, "synth"), (cfg.data.instrument_a, cfg.data.instrument_b))
    for series, leg in ((a, "a"), (b, "b")):
        write_text(cfg.data_path(leg), series_to_csv(series))
    return {"rows": len(a), "paths": [str(cfg.data_path("a")), str(cfg.data_path("b"))]}


def cmd_ingest(cfg: PipelineConfig) -> dict:
    cleaned, report = [], {"exclude_ranges": [list(r) for r in cfg.data.exclude_ranges]}
    for leg, instrument in (("a", cfg.data.instrument_a), ("b", cfg.data.instrument_b)):
        path = cfg.data_path(leg)
        if not path.is_file():
            raise DataError(f"input file not found: {path}")
        try:
            with path.open(encoding="utf-8", newline="") as fh:
                series = parse_cme_csv(fh, instrument, cfg.column_map(), cfg.data.date_format)
        except DataError as exc:
            raise type(exc)(f"{path}: {exc}") from exc
        kept = clean(series, cfg.exclude_ranges())
        report[instrument] = {
            "parsed_rows": len(series),
            "unparsable_rows": series.excluded,
            "removed_by_clean": kept.excluded,
            "clean_rows": len(kept),
        }
        cleaned.append(kept)
    if any(len(s) == 0 for s in cleaned):
        log.warning("cleaning left no rows for at least one instrument; aligned output is empty")
        write_text(_path(cfg, "data", "aligned.csv"), "date,mid_a,mid_b\n")
        report["aligned_rows"] = 0
    else:
        pair = align(*cleaned)
        write_text(_path(cfg, "data", "aligned.csv"), pair_to_csv(pair))
        report.update(aligned_rows=len(pair), first_date=pair.dates[0].isoformat(),
                      last_date=pair.dates[-1].isoformat())
    write_json(_path(cfg, "reports", "ingest.json"), report)
    return report


def _load_pair(cfg: PipelineConfig) -> AlignedPair:
    return pair_from_csv(_require(_path(cfg, "data", "aligned.csv"), "ingest").read_text())


def _splits(cfg: PipelineConfig) -> dict[str, AlignedPair]:
    return dict(zip(SPLITS, chronological_split(_load_pair(cfg), cfg.split)))


def cmd_portfolio(cfg: PipelineConfig) -> dict:
    pair = _load_pair(cfg)
    splits = dict(zip(SPLITS, chronological_split(pair, cfg.split)))
    std = fit_standardizer(splits["train"])
    pcas = {name: pca_2d(std.apply(p)) for name, p in splits.items()}
    pc2 = pcas["train"].pc2
    series = portfolio_price(pair, pc2, std if cfg.portfolio.mode == "standardized" else None)

    lines = ["date,split,price"]
    i = 0
    for name, p in splits.items():
        for d in p.dates:
            lines.append(f"{d.isoformat()},{name},{float(series.prices[i])!r}")
            i += 1
    write_text(_path(cfg, "data", "portfolio.csv"), "\n".join(lines) + "\n")

    check = explained_variance_check(pcas["train"], cfg.portfolio.variance_threshold)
    report = {
        "standardizer": {"mean_a": std.mean_a, "mean_b": std.mean_b, "std_a": std.std_a, "std_b": std.std_b},
        "pca": {name: r.to_dict() for name, r in pcas.items()},
        "train_pc2": pc2.tolist(),
        "mode": cfg.portfolio.mode,
        "variance_check": {"passed": check.passed, "ratios": list(check.ratios), "threshold": check.threshold},
        "split_rows": {name: len(p) for name, p in splits.items()},
        "split_first_dates": {name: p.dates[0].isoformat() for name, p in splits.items()},
        "daily_diff_variance": {
            "portfolio": float(np.var(np.diff(series.prices))),
            "leg_a": float(np.var(np.diff(pair.prices_a))),
            "leg_b": float(np.var(np.diff(pair.prices_b))),
        },
    }
    write_json(_path(cfg, "reports", "portfolio.json"), report)
    return report


def _portfolio_setup(cfg: PipelineConfig) -> tuple[np.ndarray, Standardizer | None]:
    rep = read_json(_require(_path(cfg, "reports", "portfolio.json"), "portfolio"))
    std = Standardizer(**rep["standardizer"]) if rep["mode"] == "standardized" else None
    return np.array(rep["train_pc2"]), std


def cmd_features(cfg: PipelineConfig) -> dict:
    splits = _splits(cfg)
    pc2, std = _portfolio_setup(cfg)
    windows, lags = tuple(cfg.features.windows), cfg.features.lags
    start = warmup_rows(windows, lags)
    raw = {}
    for name, p in splits.items():
        feats = build_features(p, windows, lags)
        prices = portfolio_price(p.slice(start), pc2, std).prices
        raw[name] = make_dataset(feats, prices, cfg.features.horizon)
    scaler = fit_scaler(raw["train"].features)
    write_json(_path(cfg, "models", "scaler.json"), {"format_version": FORMAT_VERSION, **scaler.to_dict()})
    report = {}
    for name, ds in raw.items():
        scaled = Dataset(apply_scaler(scaler, ds.features), ds.labels)
        write_text(_path(cfg, "data", f"features_{name}.csv"), dataset_to_csv(scaled))
        report[name] = {
            "rows": len(ds),
            "positive": int(np.sum(ds.labels == 1)),
            "negative": int(np.sum(ds.labels == -1)),
            "first_date": ds.dates[0].isoformat(),
        }
    write_json(_path(cfg, "reports", "features.json"), report)
    return report


def _datasets(cfg: PipelineConfig) -> dict[str, Dataset]:
    return {
        name: dataset_from_csv(_require(_path(cfg, "data", f"features_{name}.csv"), "features").read_text())
        for name in SPLITS
    }


def cmd_pretrain(cfg: PipelineConfig) -> dict:
    ds = _datasets(cfg)
    cd = cfg.cd_config(derive_seed(cfg.seed, "pretrain"))
    model, traces = dbn_pretrain(ds["train"].X, ds["val"].X, tuple(cfg.dbn.sizes), cd, cfg.dbn.standardize_input)
    write_json(_path(cfg, "models", "dbn.json"), model.to_dict())
    report = {"layers": []}
    for k, (layer, trace) in enumerate(zip(model.layers, traces), start=1):
        write_text(_path(cfg, "traces", f"rbm_layer{k}.csv"), trace.to_csv())
        report["layers"].append({
            "kind": layer.kind,
            "shape": list(layer.weights.shape),
            "first_train_mse": trace.train_mse[0] if len(trace) else None,
            "final_train_mse": trace.train_mse[-1] if len(trace) else None,
            "final_val_mse": trace.val_mse[-1] if len(trace) else None,
        })
    write_json(_path(cfg, "reports", "pretrain.json"), report)
    return report


def _load_dbn(cfg: PipelineConfig) -> DbnModel:
    return DbnModel.from_dict(read_json(_require(_path(cfg, "models", "dbn.json"), "pretrain")))


def _pipeline_refs(cfg: PipelineConfig) -> dict:
    refs = {}
    for name in ("scaler.json", "dbn.json"):
        p = _path(cfg, "models", name)
        refs[f"models/{name}"] = sha256_file(p)
    return refs


def _train_one(cfg: PipelineConfig, kind: str, ds: dict[str, Dataset], dbn: DbnModel) -> TrainedClassifier:
    c = cfg.classifiers
    select = c.select_epoch_on_validation
    info: dict = {}
    if kind == "nn":
        X, Xv = ds["train"].X, ds["val"].X
    else:
        X, Xv = dbn_transform(dbn, ds["train"].X), dbn_transform(dbn, ds["val"].X)
    y, yv = ds["train"].labels, ds["val"].labels

    if kind == "logreg":
        tracker = BestEpoch(Xv, yv, logreg_score, 0.5) if select else None
        model = logreg_train(X, y, c.logreg.ridge_lambda, c.logreg.lr, c.logreg.epochs, on_epoch=tracker)
        if tracker is not None and tracker.best_model is not None:
            model = tracker.best_model
            info.update(selected_epoch=tracker.best_epoch, validation_by_epoch=tracker.history)
    elif kind == "svm":
        model, info = select_svm(X, y, Xv, yv, c.svm.c_grid, c.svm.gamma)
        info.update(support_vectors=int(model.support_vectors.shape[0]), iterations=model.iterations)
    else:
        net = nn_from_dbn(dbn, np.random.default_rng(derive_seed(cfg.seed, "nn-init")), c.nn.momentum, c.nn.lr)
        tracker = BestEpoch(Xv, yv, nn_score, 0.5) if select else None
        model, trace = nn_train(
            net, X, y, c.nn.epochs, c.nn.minibatch_size, c.nn.lr, c.nn.momentum,
            np.random.default_rng(derive_seed(cfg.seed, "nn-train")), on_epoch=tracker,
        )
        lines = ["epoch,train_mse"] + [f"{i},{v!r}" for i, v in enumerate(trace, start=1)]
        write_text(_path(cfg, "traces", "nn_mse.csv"), "\n".join(lines) + "\n")
        if tracker is not None and tracker.best_model is not None:
            model = tracker.best_model
            info.update(selected_epoch=tracker.best_epoch, validation_by_epoch=tracker.history)
    return TrainedClassifier(kind, model, dbn, info)


def cmd_train(cfg: PipelineConfig) -> dict:
    ds = _datasets(cfg)
    dbn = _load_dbn(cfg)
    report = {}
    for kind in cfg.classifiers.kinds:
        clf = _train_one(cfg, kind, ds, dbn)
        write_json(_path(cfg, "models", f"{kind}.json"), clf.to_dict(_pipeline_refs(cfg)))
        report[kind] = clf.info
        write_json(_path(cfg, "reports", f"train_{kind}.json"), clf.info)
    return report


def _load_classifier(cfg: PipelineConfig, kind: str, dbn: DbnModel) -> TrainedClassifier:
    d = read_json(_require(_path(cfg, "models", f"{kind}.json"), "train"))
    for ref, digest in d.get("pipeline", {}).items():
        p = cfg.out / ref
        if not p.is_file() or sha256_file(p) != digest:
            raise DataError(f"{kind} model was trained against a different {ref}; retrain it")
    return TrainedClassifier.from_dict(d, dbn)


def _pct(x) -> str:
    return "   n/a" if x is None else f"{100 * x:6.2f}%"


def format_tables(results: dict) -> str:
    """Per-direction recall and precision laid out like the reported tables."""
    out = []
    for split in ("test", "train"):
        for measure, up_key, down_key in (("Recall", "recall_up", "recall_down"),
                                          ("Precision", "precision_up", "precision_down")):
            out.append(f"{split.capitalize()} {measure} rate for each direction")
            out.append(f"  {'Algorithm':<22}{'Actual up':>10}{'Actual down':>13}")
            for kind, rep in results.items():
                rates = rep[split]["rates"]
                out.append(f"  {kind:<22}{_pct(rates[up_key]):>10}{_pct(rates[down_key]):>13}")
            out.append("")
    return "\n".join(out)


def cmd_evaluate(cfg: PipelineConfig) -> dict:
    ds = _datasets(cfg)
    dbn = _load_dbn(cfg)
    results = {}
    for kind in cfg.classifiers.kinds:
        clf = _load_classifier(cfg, kind, dbn)
        results[kind] = {}
        for split, d in ds.items():
            scores = clf.score(d.X)
            preds = clf.predict(d.X)
            results[kind][split] = metrics_report(preds, d.labels, scores, clf.score_kind)
            write_text(_path(cfg, "reports", f"roc_{kind}_{split}.csv"), roc(scores, d.labels).to_csv())
        write_json(_path(cfg, "reports", f"metrics_{kind}.json"), results[kind])
    rnd = random_baseline(len(ds["test"]), derive_seed(cfg.seed, "random-classifier"))
    results["random"] = {"test": metrics_report(rnd, ds["test"].labels), "train": metrics_report(
        random_baseline(len(ds["train"]), derive_seed(cfg.seed, "random-classifier-train")), ds["train"].labels)}
    write_json(_path(cfg, "reports", "metrics_random.json"), results["random"])
    tables = format_tables(results)
    write_text(_path(cfg, "reports", "tables.txt"), tables)
    return {"results": results, "tables": tables}


def cmd_backtest(cfg: PipelineConfig) -> dict:
    ds = _datasets(cfg)["test"]
    test_pair = _splits(cfg)["test"]
    start = warmup_rows(tuple(cfg.features.windows), cfg.features.lags)
    pair = test_pair.slice(start)
    if pair.dates[: len(ds)] != ds.dates:
        raise DataError("test dataset dates do not line up with the test prices; rerun 'features'")
    strategy: StrategyConfig = cfg.strategy
    dbn = _load_dbn(cfg)
    runs = {kind: signals_from_classifier(_load_classifier(cfg, kind, dbn), ds) for kind in cfg.classifiers.kinds}
    runs["random"] = random_baseline(len(ds), derive_seed(cfg.seed, "random-baseline"))
    runs["label_oracle"] = signals_from_classifier(ORACLE, ds)
    runs["perfect_foresight"] = perfect_foresight_signals(pair, len(ds), strategy)
    report = {"strategy": strategy.to_dict(), "days": len(ds), "runs": {}}
    for name, signals in runs.items():
        ledger = simulate(pair, signals, strategy)
        write_text(_path(cfg, "data", f"ledger_{name}.csv"), ledger.positions_csv())
        write_text(_path(cfg, "traces", f"pnl_{name}.csv"), ledger.cumulative_csv())
        report["runs"][name] = summarize(ledger).to_dict()
    write_json(_path(cfg, "reports", "backtest.json"), report)
    return report


STAGE_FUNCS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "portfolio": cmd_portfolio,
    "features": cmd_features,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "backtest": cmd_backtest,
}


def run_stage(cfg: PipelineConfig, name: str) -> dict:
    try:
        return STAGE_FUNCS[name](cfg)
    except PipelineError as exc:
        exc.stage = name
        raise


def write_manifest(cfg: PipelineConfig, stages: list[str]) -> dict:
    root = cfg.out
    artifacts = {}
    for p in sorted(root.rglob("*")):
        rel = p.relative_to(root).as_posix()
        if p.is_file() and rel not in (MANIFEST, TIMINGS):
            artifacts[rel] = sha256_file(p)
    manifest = {
        "format_version": FORMAT_VERSION,
        "package_version": __version__,
        "seed": cfg.seed,
        "stages": stages,
        "config": cfg.to_dict(),
        "artifacts": artifacts,
    }
    write_json(root / MANIFEST, manifest)
    return manifest


def cmd_pipeline(cfg: PipelineConfig) -> dict:
    """Every stage in order, then the manifest. Wall-clock timings go to a
    separate file so the manifest itself is reproducible byte for byte."""
    validate(cfg)
    stages = (["synth"] if cfg.data.synthetic else []) + list(STAGES)
    timings, results = {}, {}
    for name in stages:
        t0 = time.perf_counter()
        log.info("stage %s", name)
        results[name] = run_stage(cfg, name)
        timings[name] = round(time.perf_counter() - t0, 3)
    manifest = write_manifest(cfg, stages)
    write_json(cfg.out / TIMINGS, timings)
    return {"manifest": manifest, "timings": timings, "results": results}

