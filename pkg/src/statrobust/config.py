"""Experiment configuration: YAML on disk, nested dataclasses in memory."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .approx_hw import ApproxConfig
from .errors import ConfigError, StatRobustError
from .mrf import Mode


@dataclass
class SyntheticInput:
    width: int = 32
    height: int = 32
    region_disparity: int = 3
    seed: int = 0
    levels: tuple = (64, 192)


@dataclass
class FileInput:
    left: str = ""
    right: str = ""
    ground_truth: str | None = None
    gt_scale: int = 1


@dataclass
class ModelSection:
    disparity_levels: int = 16
    data_truncation: float = 20.0
    smoothness_weight: float = 2.0
    smoothness_truncation: float = 2.0


@dataclass
class ChainSection:
    iterations: int = 300
    record_window: int = 150
    mode: str = "pure"
    initial_temperature: float = 1.0
    cooling_rate: float = 1.0
    seed: int = 0


@dataclass
class MetricsSection:
    bp_threshold: float = 1.0
    ks_permutations: int = 9999
    ks_seed: int = 0
    noise_sigma: float = 1.0
    checkpoints: tuple = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass
class DivergenceSection:
    support_size: int = 4
    energy_low: float = 0.0
    energy_high: float = 8.0
    samples: int = 10000
    temperature: float = 1.0
    seed: int = 0
    bins: int = 20
    fraction_bits: tuple | None = None


@dataclass
class ExperimentConfig:
    input: SyntheticInput | FileInput = field(default_factory=SyntheticInput)
    model: ModelSection = field(default_factory=ModelSection)
    chain: ChainSection = field(default_factory=ChainSection)
    runs: int = 20
    approx: ApproxConfig = field(default_factory=ApproxConfig)
    metrics: MetricsSection = field(default_factory=MetricsSection)
    divergence: DivergenceSection = field(default_factory=DivergenceSection)
    workers: int = 1
    output: str | None = None

    def validate(self):
        if self.runs < 2:
            raise ConfigError("runs: need at least 2 runs per arm for Gelman-Rubin")
        c = self.chain
        if c.iterations < 1:
            raise ConfigError("chain.iterations: must be positive")
        if not 10 <= c.record_window <= c.iterations:
            raise ConfigError(
                "chain.record_window: must be in [10, chain.iterations] "
                f"(got {c.record_window} with iterations={c.iterations})"
            )
        if c.seed < 0:
            raise ConfigError(f"chain.seed: must be non-negative, got {c.seed}")
        try:
            Mode(c.mode)
        except ValueError:
            raise ConfigError(f"chain.mode: expected 'pure' or 'anneal', got {c.mode!r}") from None
        cps = self.metrics.checkpoints
        if not cps or any(m <= 0 for m in cps) or list(cps) != sorted(set(cps)):
            raise ConfigError("metrics.checkpoints: need strictly increasing positive multiples")
        if 1.0 not in cps:
            raise ConfigError("metrics.checkpoints: must include 1.0 (the base budget)")
        for m in cps:
            if int(round(m * c.iterations)) // 2 < 10:
                raise ConfigError(
                    f"metrics.checkpoints: {m}x budget leaves fewer than 10 draws per chain"
                )
        if self.metrics.ks_permutations < 100:
            raise ConfigError("metrics.ks_permutations: use at least 100")
        if self.metrics.noise_sigma < 0:
            raise ConfigError("metrics.noise_sigma: must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if isinstance(self.input, FileInput) and not (self.input.left and self.input.right):
            raise ConfigError("input.files: both 'left' and 'right' paths are required")
        return self

    def to_dict(self) -> dict:
        d = {
            "model": dataclasses.asdict(self.model),
            "chain": dataclasses.asdict(self.chain),
            "runs": self.runs,
            "approx": self.approx.to_dict(),
            "metrics": _listify(dataclasses.asdict(self.metrics)),
            "divergence": _listify(dataclasses.asdict(self.divergence)),
            "workers": self.workers,
        }
        key = "synthetic" if isinstance(self.input, SyntheticInput) else "files"
        d["input"] = {key: _listify(dataclasses.asdict(self.input))}
        if self.output is not None:
            d["output"] = self.output
        return d


def _listify(d):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _section(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(raw).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; allowed: {sorted(fields)}")
    kwargs = {}
    for k, v in raw.items():
        default = getattr(cls(), k)
        try:
            if isinstance(default, tuple) or (k == "fraction_bits" and v is not None):
                v = tuple(v)
            elif isinstance(default, bool):
                v = bool(v)
            elif isinstance(default, int) and not isinstance(default, bool):
                if isinstance(v, float) and v != int(v):
                    raise ValueError
                v = int(v)
            elif isinstance(default, float):
                v = float(v)
        except (TypeError, ValueError):
            raise ConfigError(
                f"{where}.{k}: expected {type(default).__name__}, got {v!r}"
            ) from None
        kwargs[k] = v
    return cls(**kwargs)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    allowed = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}; allowed: {sorted(allowed)}")
    inp = raw.get("input") or {"synthetic": {}}
    if not isinstance(inp, dict) or len(inp) != 1 or next(iter(inp)) not in ("synthetic", "files"):
        raise ConfigError("input: expected exactly one of 'synthetic' or 'files'")
    kind, body = next(iter(inp.items()))
    source = _section(SyntheticInput if kind == "synthetic" else FileInput, body, f"input.{kind}")
    try:
        approx = ApproxConfig.from_dict(raw.get("approx") or {})
    except StatRobustError as exc:
        raise ConfigError(f"approx: {exc}") from None
    cfg = ExperimentConfig(
        input=source,
        model=_section(ModelSection, raw.get("model"), "model"),
        chain=_section(ChainSection, raw.get("chain"), "chain"),
        runs=_int(raw.get("runs", 20), "runs"),
        approx=approx,
        metrics=_section(MetricsSection, raw.get("metrics"), "metrics"),
        divergence=_section(DivergenceSection, raw.get("divergence"), "divergence"),
        workers=_int(raw.get("workers", 1), "workers"),
        output=raw.get("output"),
    )
    return cfg.validate()


def _int(v, where):
    try:
        return int(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected an integer, got {v!r}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    cfg = config_from_dict(raw or {})
    if isinstance(cfg.input, FileInput):
        # relative image paths resolve against the config file
        base = path.parent
        for name in ("left", "right", "ground_truth"):
            p = getattr(cfg.input, name)
            if p and not Path(p).is_absolute():
                setattr(cfg.input, name, str((base / p).resolve()))
    return cfg
