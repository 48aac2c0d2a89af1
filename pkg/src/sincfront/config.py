"""Experiment configuration: one JSON file plus ``key=value`` overrides."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, fields

from .conv import chunk_length
from .data import load_manifest, profiles_from_json
from .errors import ConfigError, DomainError, FormatError
from .model import ModelConfig, OptState


@dataclass
class ExperimentConfig:
    # first layer and network
    variant: str = "sinc"
    n_filters: int = 80
    filter_length: int = 251
    window: str = "hamming"
    init: str = "mel"
    f_low_hz: float = 30.0
    band_min_hz: float = 50.0
    sample_rate: int = 16000
    chunk_ms: float = 200.0
    overlap_ms: float = 10.0
    pool_width: int = 3
    hidden_size: int = 256
    leaky_slope: float = 0.2
    # optimizer and schedule
    lr: float = 0.001
    alpha: float = 0.95
    epsilon: float = 1e-7
    batch_size: int = 128
    epochs: int = 15
    seed: int = 0
    micro_batch: int = 16
    # data: a manifest of WAVs, or synthetic speakers (optionally from a profile file)
    manifest: str | None = None
    profiles: str | None = None
    n_classes: int = 10
    utts_per_class: int = 8
    heldout_per_class: int = 2
    duration_s: float = 2.0
    jitter: float = 0.1
    # band-limited corruption; snr_db = null disables it for `train`
    noise_low_hz: float = 2000.0
    noise_high_hz: float = 2500.0
    noise_snr_db: float | None = None
    # analysis
    grid_size: int = 2048
    flank_hz: float = 250.0
    checkpoint_every: int = 5

    # --- construction ----------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**raw)

    @classmethod
    def load(cls, path=None, overrides=(), seed=None) -> "ExperimentConfig":
        raw = {}
        if path is not None:
            try:
                with open(path) as fh:
                    raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"config {path}: {exc}") from exc
            if not isinstance(raw, dict):
                raise FormatError(f"config {path}: top level must be an object")
        for item in overrides:
            key, value = parse_override(item)
            raw[key] = value
        if seed is not None:
            raw["seed"] = seed
        cfg = cls.from_dict(raw)
        cfg.validate()
        return cfg

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    # --- derived objects -------------------------------------------------

    @property
    def chunk_len(self) -> int:
        return chunk_length(self.sample_rate, self.chunk_ms)

    def model_config(self, variant: str | None = None) -> ModelConfig:
        return ModelConfig(
            variant=variant or self.variant, n_filters=self.n_filters, filter_length=self.filter_length,
            window=self.window, sample_rate=float(self.sample_rate), chunk_len=self.chunk_len,
            pool_width=self.pool_width, hidden_size=self.hidden_size, n_classes=self.n_classes,
            leaky_slope=self.leaky_slope, init=self.init, f_low_hz=self.f_low_hz, band_min_hz=self.band_min_hz,
        )

    def opt_kwargs(self) -> dict:
        return dict(lr=self.lr, alpha=self.alpha, epsilon=self.epsilon, batch_size=self.batch_size)

    def load_profiles(self):
        if self.profiles is None:
            return None
        with open(self.profiles) as fh:
            try:
                return profiles_from_json(json.load(fh))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"profiles {self.profiles}: {exc}") from exc

    # --- validation ------------------------------------------------------

    def validate(self) -> None:
        """Check every downstream precondition so commands fail before writing anything."""
        for name in ("epochs", "seed"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 0:
                raise ConfigError(f"{name} must be a non-negative integer")
        for name in ("micro_batch", "utts_per_class", "grid_size", "checkpoint_every"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not 0 <= self.heldout_per_class < self.utts_per_class:
            raise ConfigError("heldout_per_class must leave at least one training utterance per class")
        if self.overlap_ms < 0 or self.chunk_ms <= self.overlap_ms:
            raise ConfigError("need 0 <= overlap_ms < chunk_ms")
        chunk_length(self.sample_rate, self.overlap_ms)
        mc = self.model_config()
        OptState(**self.opt_kwargs())
        if self.duration_s * self.sample_rate < mc.chunk_len:
            raise ConfigError("utterances shorter than one chunk")
        if not 0 <= self.jitter < 1:
            raise ConfigError("jitter must lie in [0, 1)")
        if not 0 <= self.noise_low_hz < self.noise_high_hz <= self.sample_rate / 2:
            raise DomainError(f"invalid noise band [{self.noise_low_hz}, {self.noise_high_hz}] Hz")
        if self.noise_snr_db is not None and (math.isnan(self.noise_snr_db) or self.noise_snr_db == -math.inf):
            raise ConfigError("noise_snr_db must be a number, +inf or null")
        if not (0 < self.noise_low_hz - self.flank_hz and self.noise_high_hz + self.flank_hz < self.sample_rate / 2):
            raise DomainError("noise band plus flanks must lie inside (0, fs/2)")
        if self.grid_size < 2 * self.filter_length:
            raise DomainError(f"grid_size {self.grid_size} below 2L = {2 * self.filter_length}")
        if self.manifest is not None:
            if not os.path.isfile(self.manifest):
                raise ConfigError(f"manifest not found: {self.manifest}")
            load_manifest(self.manifest, self.sample_rate)
        if self.profiles is not None:
            if not os.path.isfile(self.profiles):
                raise ConfigError(f"profiles file not found: {self.profiles}")
            profs = self.load_profiles()
            if len(profs) != self.n_classes:
                raise ConfigError(f"{len(profs)} profiles for {self.n_classes} classes")
            for p in profs:
                p.validate(self.sample_rate)


def parse_override(item: str):
    """``key=value`` with the value parsed as JSON when possible, else kept as a string."""
    key, sep, text = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not key=value")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return key, value
