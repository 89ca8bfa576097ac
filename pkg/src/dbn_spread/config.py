"""Pipeline configuration: one YAML file, every key documented in
``configs/synthetic.yaml``. Unknown keys are rejected."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from importlib import resources
from pathlib import Path

import yaml

from .backtest import StrategyConfig
from .classifiers import DEFAULT_C_GRID, KINDS
from .errors import ValidationError
from .market_data import ColumnMap, SplitSpec
from .rbm import CdConfig
from .synth import SynthConfig

DEFAULT_EXCLUDE = (("2008-09-01", "2009-03-31"),)


@dataclass(frozen=True)
class DataConfig:
    path_a: str | None = None
    path_b: str | None = None
    instrument_a: str = "ZF"
    instrument_b: str = "ZN"
    date_format: str = "%Y-%m-%d"
    columns: dict = field(default_factory=dict)
    exclude_ranges: tuple = DEFAULT_EXCLUDE
    synthetic: bool = False

    def __post_init__(self):
        # YAML may hand back date objects; keep ISO strings so snapshots serialize
        try:
            ranges = tuple((str(a), str(b)) for a, b in self.exclude_ranges)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"data.exclude_ranges must be [start, end] pairs: {exc}") from exc
        object.__setattr__(self, "exclude_ranges", ranges)


@dataclass(frozen=True)
class FeatureConfig:
    windows: tuple = (5, 10)
    lags: int = 5
    horizon: int = 5


@dataclass(frozen=True)
class PortfolioConfig:
    mode: str = "raw"
    variance_threshold: float = 0.99


@dataclass(frozen=True)
class DbnConfig:
    sizes: tuple = (15, 20)
    cd_steps: int = 1
    learning_rate: float | None = None
    epochs: int = 100
    minibatch_size: int = 100
    shuffle_each_epoch: bool = True
    gaussian_visible_noise: bool = False
    standardize_input: bool = True


@dataclass(frozen=True)
class LogregConfig:
    ridge_lambda: float = 0.001
    lr: float = 0.5
    epochs: int = 300


@dataclass(frozen=True)
class SvmConfig:
    c_grid: tuple = DEFAULT_C_GRID
    gamma: float | None = None


@dataclass(frozen=True)
class NnConfig:
    epochs: int = 100
    lr: float = 0.5
    momentum: float = 0.5
    minibatch_size: int = 100


@dataclass(frozen=True)
class ClassifierConfig:
    kinds: tuple = KINDS
    select_epoch_on_validation: bool = True
    logreg: LogregConfig = field(default_factory=LogregConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    nn: NnConfig = field(default_factory=NnConfig)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    output_dir: str = "run"
    data: DataConfig = field(default_factory=DataConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    portfolio: PortfolioConfig = field(default_factory=PortfolioConfig)
    dbn: DbnConfig = field(default_factory=DbnConfig)
    classifiers: ClassifierConfig = field(default_factory=ClassifierConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    def data_path(self, leg: str) -> Path:
        explicit = self.data.path_a if leg == "a" else self.data.path_b
        if explicit:
            return Path(explicit)
        instrument = self.data.instrument_a if leg == "a" else self.data.instrument_b
        return self.out / "data" / "raw" / f"{instrument}.csv"

    def exclude_ranges(self) -> list[tuple[date, date]]:
        return [(date.fromisoformat(str(a)), date.fromisoformat(str(b))) for a, b in self.data.exclude_ranges]

    def column_map(self) -> ColumnMap:
        return ColumnMap.from_mapping(self.data.columns)

    def cd_config(self, seed: int) -> CdConfig:
        d = self.dbn
        return CdConfig(
            cd_steps=d.cd_steps, learning_rate=d.learning_rate, epochs=d.epochs,
            minibatch_size=d.minibatch_size, rng_seed=seed, shuffle_each_epoch=d.shuffle_each_epoch,
            gaussian_visible_noise=d.gaussian_visible_noise,
        )

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, values, path: str):
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ValidationError(f"config section {path or '<root>'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ValidationError(f"unknown config key(s) {', '.join(path + k for k in unknown)}")
    kwargs = {}
    for name, value in values.items():
        sub = _SECTIONS.get((cls, name))
        if sub is not None:
            kwargs[name] = _build(sub, value, f"{path}{name}.")
        elif isinstance(value, list):
            kwargs[name] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except ValidationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid config section {path or '<root>'}: {exc}") from exc


_SECTIONS = {
    (PipelineConfig, "data"): DataConfig,
    (PipelineConfig, "synth"): SynthConfig,
    (PipelineConfig, "split"): SplitSpec,
    (PipelineConfig, "features"): FeatureConfig,
    (PipelineConfig, "portfolio"): PortfolioConfig,
    (PipelineConfig, "dbn"): DbnConfig,
    (PipelineConfig, "classifiers"): ClassifierConfig,
    (PipelineConfig, "strategy"): StrategyConfig,
    (ClassifierConfig, "logreg"): LogregConfig,
    (ClassifierConfig, "svm"): SvmConfig,
    (ClassifierConfig, "nn"): NnConfig,
}


def validate(cfg: PipelineConfig) -> PipelineConfig:
    unknown = [k for k in cfg.classifiers.kinds if k not in KINDS]
    if unknown or not cfg.classifiers.kinds:
        raise ValidationError(f"unknown classifier kind(s) {unknown}; choose from {list(KINDS)}")
    if cfg.portfolio.mode not in ("raw", "standardized"):
        raise ValidationError(f"portfolio.mode must be 'raw' or 'standardized', got {cfg.portfolio.mode!r}")
    if not cfg.dbn.sizes or any(int(s) < 1 for s in cfg.dbn.sizes):
        raise ValidationError("dbn.sizes must be positive layer widths")
    if len(cfg.features.windows) < 1 or min(cfg.features.windows) < 1 or cfg.features.lags < 1:
        raise ValidationError("feature windows and lags must be positive")
    if cfg.features.horizon != cfg.strategy.horizon_days:
        raise ValidationError("features.horizon and strategy.horizon_days must agree")
    if not cfg.classifiers.svm.c_grid or any(c <= 0 for c in cfg.classifiers.svm.c_grid):
        raise ValidationError("classifiers.svm.c_grid must hold positive costs")
    try:
        cfg.exclude_ranges()
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad data.exclude_ranges: {exc}") from exc
    cfg.column_map()
    # constructs and checks the CD settings
    cfg.cd_config(0)
    return cfg


def _set_dotted(tree: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ValidationError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Read a YAML config (or the bundled synthetic one) and apply dotted
    ``section.key`` overrides."""
    if path is None:
        text = resources.files("dbn_spread").joinpath("configs/synthetic.yaml").read_text()
    else:
        p = Path(path)
        if not p.is_file():
            raise ValidationError(f"config file not found: {p}")
        text = p.read_text()
    try:
        tree = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ValidationError(f"config is not valid YAML: {exc}") from exc
    tree = copy.deepcopy(tree)
    for key, value in (overrides or {}).items():
        _set_dotted(tree, key, value)
    return validate(_build(PipelineConfig, tree, ""))


def config_from_dict(tree: dict) -> PipelineConfig:
    return validate(_build(PipelineConfig, copy.deepcopy(tree), ""))
