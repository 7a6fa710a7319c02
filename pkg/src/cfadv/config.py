"""Experiment configuration: one JSON document, validated into frozen dataclasses."""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .adversarial import CwParams, DeepFoolParams
from .counterfactuals import ScfeParams
from .latent import LatentSearchParams, parse_norm
from .models import TrainConfig
from .results import METHOD_IDS

PAIR_IDS = ("scfe_vs_cw", "scfe_vs_deepfool", "cchvae_vs_nae")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"  # or "csv"
    n: int = 5000
    mu1: tuple[float, ...] = (-1.0, -1.0)
    mu2: tuple[float, ...] = (1.0, 1.0)
    path: str | None = None
    schema: str | None = None
    scale: bool = False
    test_fraction: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "mu1", tuple(float(v) for v in self.mu1))
        object.__setattr__(self, "mu2", tuple(float(v) for v in self.mu2))
        if self.source not in ("synthetic", "csv"):
            raise ConfigError(f"unknown data source {self.source!r}")
        if self.source == "csv" and (self.path is None or self.schema is None):
            raise ConfigError("csv data needs both 'path' and 'schema'")
        if self.source == "synthetic" and len(self.mu1) != len(self.mu2):
            raise ConfigError("mixture means must have equal length")
        if self.n < 2:
            raise ConfigError("need at least two samples")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "linear"  # or "mlp"
    hidden: tuple[int, ...] = (18, 9, 3)
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.kind not in ("linear", "mlp"):
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.kind == "mlp" and (not self.hidden or min(self.hidden) < 1):
            raise ConfigError("mlp needs positive hidden widths")


@dataclass(frozen=True)
class AutoencoderConfig:
    """``hidden`` lists encoder widths after the input, ending in the latent size.

    An empty tuple means a single layer with latent size equal to the input
    dimension, which with ``linear=True`` can represent the identity map.
    """

    hidden: tuple[int, ...] = (16, 32, 10)
    linear: bool = False
    train: TrainConfig = TrainConfig(epochs=30)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if any(h < 1 for h in self.hidden):
            raise ConfigError("autoencoder widths must be positive")

    def widths(self, d: int) -> list[int]:
        return [d, *self.hidden] if self.hidden else [d, d]


@dataclass(frozen=True)
class MethodsConfig:
    names: tuple[str, ...] = ("scfe", "deepfool")
    scfe: ScfeParams = ScfeParams(target=1e-4, require_flip=True)
    cw: CwParams = CwParams()
    deepfool: DeepFoolParams = DeepFoolParams()
    cchvae: LatentSearchParams = LatentSearchParams()
    nae: LatentSearchParams = LatentSearchParams(r0=0.0, max_rounds=200)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        bad = [m for m in self.names if m not in METHOD_IDS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {list(METHOD_IDS)}")
        if len(set(self.names)) != len(self.names):
            raise ConfigError("duplicate method names")

    @property
    def needs_ae(self) -> bool:
        return any(m in ("cchvae", "nae") for m in self.names)


@dataclass(frozen=True)
class BoundsConfig:
    pairs: tuple[str, ...] = ("scfe_vs_cw", "scfe_vs_deepfool")
    s: float = 0.0
    lam: float = 0.1
    c: float | None = None
    p: float = 2.0
    overshoot: float = 0.0
    lipschitz_method: str = "lemma4"
    M: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        bad = [p for p in self.pairs if p not in PAIR_IDS]
        if bad:
            raise ConfigError(f"unknown bound pairs {bad}; choose from {list(PAIR_IDS)}")
        try:
            object.__setattr__(self, "p", parse_norm(self.p))
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.lam <= 0:
            raise ConfigError("bounds.lam must be positive")
        if self.c is not None and self.c <= 0:
            raise ConfigError("bounds.c must be positive")
        if self.lipschitz_method not in ("lemma4", "operator_norm_product"):
            raise ConfigError(f"unknown Lipschitz method {self.lipschitz_method!r}")
        if self.M <= 0:
            raise ConfigError("bounds.M must be positive")


@dataclass(frozen=True)
class MetricsConfig:
    pairs: tuple[str, ...] = ("scfe_vs_deepfool",)
    thresholds: tuple[float, ...] = (0.02, 0.05, 0.1)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        for pr in self.pairs:
            a, sep, b = pr.partition("_vs_")
            if not sep or a not in METHOD_IDS or b not in METHOD_IDS:
                raise ConfigError(f"metric pair {pr!r} must look like '<method>_vs_<method>'")
        th = self.thresholds
        if not th or any(t <= 0 for t in th) or any(b <= a for a, b in zip(th, th[1:])):
            raise ConfigError("thresholds must be positive and strictly ascending")

    def split(self, pair: str) -> tuple[str, str]:
        a, _, b = pair.partition("_vs_")
        return a, b


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    data: DataConfig = DataConfig()
    model: ModelConfig = ModelConfig()
    autoencoder: AutoencoderConfig | None = None
    methods: MethodsConfig = MethodsConfig()
    bounds: BoundsConfig = BoundsConfig()
    metrics: MetricsConfig = MetricsConfig()
    # cap on the number of negatively predicted test rows processed (None: all)
    max_instances: int | None = None
    out: str = field(default="out", compare=False)

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.max_instances is not None and self.max_instances < 0:
            raise ConfigError("max_instances must be non-negative")
        if "cchvae_vs_nae" in self.bounds.pairs and self.autoencoder is None:
            raise ConfigError("bound pair cchvae_vs_nae needs an 'autoencoder' section")

    def derived_seed(self, stream: str) -> int:
        """Independent 32-bit seed for a named stage, derived from the global seed."""
        ss = np.random.SeedSequence([int(self.seed), zlib.crc32(stream.encode())])
        return int(ss.generate_state(1)[0])

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return _plain(d)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form (output directory excluded)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float) and obj == float("inf"):
        return "inf"
    return obj


def _build(cls, raw, where: str):
    """Instantiate a (possibly nested) dataclass from a dict, rejecting unknown keys."""
    if raw is None:
        return None
    if isinstance(raw, cls):
        return raw
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object, got {type(raw).__name__}")
    known = {f.name: f for f in fields(cls)}
    extra = sorted(set(raw) - set(known))
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")
    kwargs = {}
    for name, value in raw.items():
        sub = _NESTED.get((cls, name))
        kwargs[name] = _build(sub, value, f"{where}.{name}") if sub is not None else value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


_NESTED = {
    (ExperimentConfig, "data"): DataConfig,
    (ExperimentConfig, "model"): ModelConfig,
    (ExperimentConfig, "autoencoder"): AutoencoderConfig,
    (ExperimentConfig, "methods"): MethodsConfig,
    (ExperimentConfig, "bounds"): BoundsConfig,
    (ExperimentConfig, "metrics"): MetricsConfig,
    (ModelConfig, "train"): TrainConfig,
    (AutoencoderConfig, "train"): TrainConfig,
    (MethodsConfig, "scfe"): ScfeParams,
    (MethodsConfig, "cw"): CwParams,
    (MethodsConfig, "deepfool"): DeepFoolParams,
    (MethodsConfig, "cchvae"): LatentSearchParams,
    (MethodsConfig, "nae"): LatentSearchParams,
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "seed" not in raw:
        raise ConfigError("config must set 'seed' explicitly")
    return _build(ExperimentConfig, raw, "config")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return config_from_dict(raw)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    """Apply CLI overrides; ``None`` values are ignored."""
    kw = {k: v for k, v in kw.items() if v is not None}
    try:
        if "methods" in kw:
            kw["methods"] = replace(cfg.methods, names=tuple(kw["methods"]))
        if "bound_pairs" in kw:
            kw["bounds"] = replace(kw.get("bounds", cfg.bounds), pairs=tuple(kw.pop("bound_pairs")))
        if "p" in kw:
            kw["bounds"] = replace(kw.get("bounds", cfg.bounds), p=kw.pop("p"))
        return replace(cfg, **kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
