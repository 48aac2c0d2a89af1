"""Filterbank interpretability measures and the noisy-band experiment."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import data as data_mod
from .conv import frame_signal
from .dsp import ResponseCurve, realized_response
from .errors import DomainError
from .model import LEARNED, SINC, ModelConfig, OptState, init_state, train

VALLEY_CAP_DB = 60.0


def filter_responses(layer, grid_size: int) -> list[ResponseCurve]:
    taps = np.atleast_2d(layer.taps)
    if taps.shape[0] == 0:
        raise DomainError("empty filter bank")
    return [realized_response(t, grid_size, layer.sample_rate) for t in taps]


def cumulative_response(layer, grid_size: int) -> ResponseCurve:
    """Pointwise sum of the linear magnitude responses of every filter."""
    curves = filter_responses(layer, grid_size)
    total = np.zeros_like(curves[0].magnitude)
    for c in curves:
        total += c.magnitude
    return ResponseCurve(curves[0].freqs_hz, total)


def valley_depth(curve: ResponseCurve, band_low_hz: float, band_high_hz: float, flank_hz: float = 250.0) -> float:
    """10 log10(flank mean / in-band mean), clipped to +-60 dB. Positive means a dip."""
    f, m = curve.freqs_hz, curve.magnitude
    if not (0 < band_low_hz - flank_hz and band_high_hz + flank_hz < f[-1] and band_low_hz < band_high_hz):
        raise DomainError("band plus flanks must lie strictly inside (0, fs/2)")
    inside = m[(f >= band_low_hz) & (f <= band_high_hz)]
    flanks = m[((f >= band_low_hz - flank_hz) & (f <= band_low_hz))
               | ((f >= band_high_hz) & (f <= band_high_hz + flank_hz))]
    if inside.size == 0 or flanks.size == 0:
        raise DomainError("grid too coarse: empty band or flank slice")
    num, den = flanks.mean(), inside.mean()
    if den <= 0:
        return VALLEY_CAP_DB if num > 0 else 0.0
    if num <= 0:
        return -VALLEY_CAP_DB
    return float(np.clip(10 * math.log10(num / den), -VALLEY_CAP_DB, VALLEY_CAP_DB))


def local_maxima(curve: ResponseCurve, min_rel_height: float = 0.0) -> list[dict]:
    """Interior strict local maxima, optionally above a fraction of the curve's max."""
    m = curve.magnitude
    if m.size < 3:
        return []
    thresh = min_rel_height * m.max()
    idx = np.flatnonzero((m[1:-1] > m[:-2]) & (m[1:-1] >= m[2:]) & (m[1:-1] >= thresh)) + 1
    return [{"freq_hz": float(curve.freqs_hz[i]), "magnitude": float(m[i])} for i in idx]


def sentence_vote(chunk_posteriors) -> int:
    """Argmax of the mean posterior; ties go to the lowest class index."""
    post = np.asarray(chunk_posteriors, dtype=float)
    if post.ndim != 2 or post.shape[0] == 0:
        raise DomainError("need a non-empty list of equal-length posterior vectors")
    return int(np.argmax(post.mean(axis=0)))


# --- valley experiment ----------------------------------------------------

@dataclass
class ValleyPoint:
    updates_seen: int
    valley_depth_db: float


@dataclass
class ValleyTrace:
    points: list[ValleyPoint] = field(default_factory=list)

    def append(self, updates: int, depth: float) -> None:
        if self.points and updates <= self.points[-1].updates_seen:
            raise DomainError("updates_seen must be strictly increasing")
        self.points.append(ValleyPoint(updates, depth))

    def first_over(self, threshold_db: float = 3.0) -> int | None:
        """Index of the first checkpoint whose depth exceeds the threshold."""
        for i, p in enumerate(self.points):
            if p.valley_depth_db > threshold_db:
                return i
        return None

    @property
    def final(self) -> float:
        return self.points[-1].valley_depth_db

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("updates_seen,valley_depth_db\n")
            for p in self.points:
                fh.write(f"{p.updates_seen},{float(p.valley_depth_db)!r}\n")


@dataclass
class ValleyConfig:
    model: ModelConfig
    band_low_hz: float = 2000.0
    band_high_hz: float = 2500.0
    snr_db: float = 0.0
    flank_hz: float = 250.0
    grid_size: int = 2048
    checkpoint_every: int = 5
    epochs: int = 20
    n_classes: int = 10
    utts_per_class: int = 8
    duration_s: float = 2.0
    chunk_ms: float = 200.0
    overlap_ms: float = 10.0
    opt: dict = field(default_factory=dict)
    profiles: list | None = None


def noisy_chunks(cfg: ValleyConfig, seed: int):
    fs = int(cfg.model.sample_rate)
    profiles = cfg.profiles or data_mod.default_profiles(cfg.n_classes)
    utts = data_mod.synth_dataset(profiles, cfg.utts_per_class, cfg.duration_s, fs, seed)
    chunks = []
    for i, u in enumerate(utts):
        noisy = data_mod.inject_band_noise(u, cfg.band_low_hz, cfg.band_high_hz, cfg.snr_db, seed=[seed, i])
        chunks += frame_signal(noisy.samples, fs, cfg.chunk_ms, cfg.overlap_ms, noisy.label, noisy.id)
    return chunks


def valley_run(cfg: ValleyConfig, variant: str, chunks, seed: int) -> ValleyTrace:
    model_cfg = replace(cfg.model, variant=variant)
    state = init_state(model_cfg, seed)
    trace = ValleyTrace()

    def record(updates, st):
        curve = cumulative_response(st.first_layer(), cfg.grid_size)
        trace.append(updates, valley_depth(curve, cfg.band_low_hz, cfg.band_high_hz, cfg.flank_hz))

    record(0, state)

    def on_step(updates, st):
        if updates % cfg.checkpoint_every == 0:
            record(updates, st)

    train(state, OptState(**cfg.opt), chunks, cfg.epochs, seed, on_step=on_step)
    return trace


def valley_experiment(cfg: ValleyConfig, seed: int = 0) -> tuple[ValleyTrace, ValleyTrace]:
    """Train both first-layer variants on identical band-corrupted data.

    Returns (sinc trace, learned trace) sampled on the same update grid,
    starting with the untrained checkpoint at 0 updates.
    """
    chunks = noisy_chunks(cfg, seed)
    return valley_run(cfg, SINC, chunks, seed), valley_run(cfg, LEARNED, chunks, seed)


def valley_summary(sinc: ValleyTrace, learned: ValleyTrace, threshold_db: float = 3.0) -> dict:
    return {
        "sinc_first_checkpoint_over_3db": sinc.first_over(threshold_db),
        "learned_first_checkpoint_over_3db": learned.first_over(threshold_db),
        "sinc_final_depth_db": sinc.final,
        "learned_final_depth_db": learned.final,
    }


def write_peaks_json(curve: ResponseCurve, path, min_rel_height: float = 0.1) -> None:
    with open(path, "w") as fh:
        json.dump(local_maxima(curve, min_rel_height), fh, indent=1)
        fh.write("\n")
