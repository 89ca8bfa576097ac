import json
import logging
import shutil
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dbn_spread.cli import build_parser, main, overrides_from_args
from dbn_spread.config import PipelineConfig, config_from_dict, load_config
from dbn_spread.errors import DataError, ValidationError
from dbn_spread.market_data import align, clean, pair_from_csv, series_to_csv
from dbn_spread.pca_portfolio import fit_standardizer, pca_2d, portfolio_price
from dbn_spread.pipeline import STAGES, cmd_pipeline, run_stage
from dbn_spread.synth import SynthConfig, synth_pair
from dbn_spread.util import derive_seed, dumps


class TestUtil:
    def test_derive_seed_is_stable_and_distinct(self):
        assert derive_seed(0, "synth") == derive_seed(0, "synth")
        assert len({derive_seed(0, t) for t in ("synth", "pretrain", "nn-init")}) == 3
        assert derive_seed(1, "synth") != derive_seed(0, "synth")
        assert 0 <= derive_seed(123, "x", 4) < 2 ** 63

    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False)))
    def test_json_floats_round_trip_exactly(self, xs):
        assert json.loads(dumps({"x": xs}))["x"] == xs


class TestConfig:
    def test_bundled_defaults(self):
        cfg = load_config()
        assert cfg.data.synthetic
        assert cfg.dbn.sizes == (15, 20)
        assert cfg.classifiers.svm.c_grid == (0.01, 0.1, 1.0, 10.0, 100.0)
        assert cfg.strategy.size_a == 10 and cfg.strategy.size_b == 8

    def test_bundled_file_lists_every_key(self):
        assert load_config().to_dict() == PipelineConfig(output_dir="run", data=replace(
            PipelineConfig().data, synthetic=True)).to_dict()

    def test_overrides(self):
        cfg = load_config(overrides={"dbn.epochs": 3, "seed": 9, "split.train_frac": 0.7, "split.val_frac": 0.2})
        assert (cfg.dbn.epochs, cfg.seed, cfg.split.train_frac) == (3, 9, 0.7)

    @pytest.mark.parametrize("override", [
        {"dbn.epoch": 3},
        {"classifiers.kinds": ["forest"]},
        {"features.horizon": 4},
        {"portfolio.mode": "fancy"},
        {"split.train_frac": 0.9},
        {"dbn.sizes": [15, 0]},
        {"data.exclude_ranges": [["2008-13-01", "2009-01-01"]]},
    ])
    def test_invalid(self, override):
        with pytest.raises(ValidationError):
            load_config(overrides=override)

    def test_from_dict_snapshot(self):
        cfg = load_config()
        assert config_from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


class TestSynth:
    def test_fixed_seed_identical(self):
        a1, b1 = synth_pair(SynthConfig(n_days=200), seed=3)
        a2, b2 = synth_pair(SynthConfig(n_days=200), seed=3)
        assert series_to_csv(a1) == series_to_csv(a2) and series_to_csv(b1) == series_to_csv(b2)

    def test_bars_are_valid(self):
        a, b = synth_pair(SynthConfig(n_days=500))
        assert all(bar.is_valid() for bar in a.bars + b.bars)

    def test_default_pc1_share(self):
        a, b = synth_pair()
        pair = align(a, b)
        assert pca_2d(fit_standardizer(pair).apply(pair)).explained_variance_ratio[0] >= 0.99

    def test_zero_noise_pc2_constant(self):
        a, b = synth_pair(SynthConfig(n_days=400, noise_sd=0.0, gap_sd=0.0))
        pair = align(a, b)
        # legs are affine in the shared factor
        slope, intercept = np.polyfit(pair.prices_a, pair.prices_b, 1)
        np.testing.assert_allclose(pair.prices_b, slope * pair.prices_a + intercept, atol=1e-9)
        std = fit_standardizer(pair)
        pc2 = pca_2d(std.apply(pair)).pc2
        prices = portfolio_price(pair, pc2, std).prices
        np.testing.assert_allclose(prices, prices[0], atol=1e-9)


def _config(tmp_path, **over):
    return load_config(overrides={"output_dir": str(tmp_path / "run"), **over})


class TestIngest:
    def test_intersected_dates(self, tmp_path):
        cfg = _config(tmp_path)
        run_stage(cfg, "synth")
        report = run_stage(cfg, "ingest")
        pair = pair_from_csv((cfg.out / "data" / "aligned.csv").read_text())
        assert len(pair) == report["aligned_rows"] > 0
        a, b = synth_pair(cfg.synth, derive_seed(cfg.seed, "synth"))
        expected = align(clean(a, cfg.exclude_ranges()), clean(b, cfg.exclude_ranges()))
        assert pair == expected
        assert report["ZF"]["removed_by_clean"] > 0

    def test_missing_file_named(self, tmp_path):
        missing = tmp_path / "nope.csv"
        cfg = _config(tmp_path, **{"data.path_a": str(missing)})
        with pytest.raises(DataError, match="nope.csv") as info:
            run_stage(cfg, "ingest")
        assert info.value.stage == "ingest"

    def test_exclusion_covering_everything_warns(self, tmp_path, caplog):
        cfg = _config(tmp_path, **{"data.exclude_ranges": [["1990-01-01", "2030-12-31"]]})
        run_stage(cfg, "synth")
        with caplog.at_level(logging.WARNING):
            report = run_stage(cfg, "ingest")
        assert report["aligned_rows"] == 0
        assert "no rows" in caplog.text


class TestCli:
    def test_unknown_kind_fails_before_any_stage(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["pipeline", "--output-dir", str(out), "--set", "classifiers.kinds=[forest]"])
        assert code == 2
        assert not out.exists()
        assert "forest" in capsys.readouterr().err

    def test_missing_input_exit_code(self, tmp_path, capsys):
        code = main(["ingest", "--output-dir", str(tmp_path), "--set", f"data.path_a={tmp_path}/x.csv"])
        assert code == 3
        assert "[ingest]" in capsys.readouterr().err

    def test_stage_without_inputs(self, tmp_path):
        assert main(["pretrain", "--output-dir", str(tmp_path)]) == 3

    def test_train_flags_map_to_config(self):
        args = build_parser().parse_args(
            ["train", "--classifier", "svm", "--C-grid", "0.5,2", "--lambda", "0.1", "--seed", "4"])
        over = overrides_from_args(args)
        assert over["classifiers.kinds"] == ["svm"]
        assert over["classifiers.svm.c_grid"] == [0.5, 2.0]
        assert over["classifiers.logreg.ridge_lambda"] == 0.1
        assert over["seed"] == 4

    def test_bad_set_syntax(self, tmp_path):
        assert main(["synth", "--output-dir", str(tmp_path), "--set", "novalue"]) == 2


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.slow
def test_stages_compose_to_pipeline(tmp_path):
    cfg = _config(tmp_path, **{"dbn.epochs": 20, "classifiers.nn.epochs": 20, "classifiers.svm.c_grid": [1.0]})
    result = cmd_pipeline(cfg)
    assert result["manifest"]["stages"] == ["synth", *STAGES]
    whole = _tree(cfg.out)
    shutil.rmtree(cfg.out)
    for stage in ("synth", *STAGES):
        run_stage(cfg, stage)
    parts = _tree(cfg.out)
    skip = {"manifest.json", "timings.json"}
    assert {k: v for k, v in whole.items() if k not in skip} == parts

    manifest = json.loads(whole["manifest.json"])
    assert manifest["artifacts"]["models/dbn.json"]
    assert "timings.json" not in manifest["artifacts"]
    assert manifest["config"] == cfg.to_dict()
    assert (cfg.out / "reports" / "tables.txt").read_text().startswith("Test Recall rate")

    # a classifier trained against another DBN is refused
    (cfg.out / "models" / "dbn.json").write_text((cfg.out / "models" / "dbn.json").read_text() + " ")
    with pytest.raises(DataError, match="retrain"):
        run_stage(cfg, "evaluate")
