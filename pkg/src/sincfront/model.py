"""Desk-scale raw-waveform classifier with a swappable first layer.

Pipeline per chunk::

    layer_norm -> first-layer conv (F filters) -> abs -> max-pool
    -> layer_norm -> leaky-ReLU -> dense -> layer_norm -> leaky-ReLU
    -> dense -> softmax

Everything is plain numpy with hand-written backward passes. Parameters
live in a flat dict so the optimizer and the gradient checker can treat
them uniformly.
"""

from __future__ import annotations

import base64
import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from . import dsp
from .conv import convolve_bank_batch, correlate_bank_batch
from .dsp import FilterBank, FilterSpec, SincParams, Window
from .errors import ConfigError, FormatError, LabelError, NumericError, ShapeError

SINC = "sinc"
LEARNED = "learned"

CHECKPOINT_FORMAT = "sincfront-checkpoint"


@dataclass(frozen=True)
class ModelConfig:
    variant: str = SINC
    n_filters: int = 80
    filter_length: int = 251
    window: str = "hamming"
    sample_rate: float = 16000.0
    chunk_len: int = 3200
    pool_width: int = 3
    hidden_size: int = 256
    n_classes: int = 10
    leaky_slope: float = 0.2
    init: str = "mel"
    f_low_hz: float = 30.0
    band_min_hz: float = 50.0
    ln_eps: float = 1e-6

    def __post_init__(self):
        if self.variant not in (SINC, LEARNED):
            raise ConfigError(f"unknown first-layer variant {self.variant!r}")
        if self.init not in ("mel", "random"):
            raise ConfigError(f"unknown init {self.init!r}")
        object.__setattr__(self, "window", Window(self.window).value)
        FilterSpec(self.filter_length, self.window, self.sample_rate)
        for name in ("n_filters", "pool_width", "hidden_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_classes < 2:
            raise ConfigError("need at least two classes")
        if self.chunk_len < self.filter_length + self.pool_width - 1:
            raise ConfigError(
                f"chunk of {self.chunk_len} samples too short for L={self.filter_length}, pool={self.pool_width}"
            )
        if not 0.0 < self.band_min_hz < self.sample_rate / 2:
            raise ConfigError("band_min_hz must lie in (0, sample_rate/2)")

    @property
    def spec(self) -> FilterSpec:
        return FilterSpec(self.filter_length, self.window, self.sample_rate)

    @property
    def band_min(self) -> float:
        return self.band_min_hz / self.sample_rate

    @property
    def conv_len(self) -> int:
        return self.chunk_len - self.filter_length + 1

    @property
    def pooled_len(self) -> int:
        return self.conv_len // self.pool_width

    @property
    def feature_dim(self) -> int:
        return self.n_filters * self.pooled_len


# --- first layer ----------------------------------------------------------

@dataclass(frozen=True)
class SincLayer:
    bank: FilterBank
    band_min: float
    variant = SINC

    @property
    def taps(self) -> np.ndarray:
        return self.bank.taps

    @property
    def sample_rate(self) -> float:
        return self.bank.spec.sample_rate

    @property
    def num_params(self) -> int:
        return self.bank.num_params


@dataclass(frozen=True)
class LearnedLayer:
    taps: np.ndarray
    sample_rate: float = 16000.0
    variant = LEARNED

    @property
    def num_params(self) -> int:
        return int(self.taps.size)


FirstLayer = SincLayer | LearnedLayer


def count_params(layer: FirstLayer) -> int:
    """2F for the sinc layer regardless of L; F*L for learned taps."""
    return layer.num_params


# --- state ----------------------------------------------------------------

@dataclass
class ModelState:
    config: ModelConfig
    params: dict[str, np.ndarray]

    def first_layer(self) -> FirstLayer:
        cfg = self.config
        if cfg.variant == SINC:
            sp = [SincParams(float(a), float(b)) for a, b in zip(self.params["f1"], self.params["band"])]
            return SincLayer(FilterBank.build(sp, cfg.spec), cfg.band_min)
        return LearnedLayer(self.params["taps"].copy(), cfg.sample_rate)

    def copy(self) -> "ModelState":
        return ModelState(self.config, {k: v.copy() for k, v in self.params.items()})


def glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_state(config: ModelConfig, seed: int = 0) -> ModelState:
    rng = np.random.default_rng(seed)
    F, L = config.n_filters, config.filter_length
    p: dict[str, np.ndarray] = {}
    if config.variant == SINC:
        if config.init == "mel":
            sp = dsp.mel_init(F, config.spec, config.f_low_hz)
        else:
            sp = dsp.random_init(F, seed, config.band_min)
        f1, band = dsp.project_arrays(np.array([s.f1 for s in sp]), np.array([s.band for s in sp]),
                                      config.band_min)
        p["f1"], p["band"] = f1, band
    else:
        # conv fans as in the usual deep-learning convention: (in*L, out*L)
        p["taps"] = glorot(rng, L, F * L, (F, L))
    D, H, C = config.feature_dim, config.hidden_size, config.n_classes
    p["ln_in_g"], p["ln_in_b"] = np.array(1.0), np.array(0.0)
    p["ln_conv_g"], p["ln_conv_b"] = np.array(1.0), np.array(0.0)
    p["w_hidden"] = glorot(rng, D, H, (H, D))
    p["b_hidden"] = np.zeros(H)
    p["ln_hidden_g"], p["ln_hidden_b"] = np.array(1.0), np.array(0.0)
    p["w_out"] = glorot(rng, H, C, (C, H))
    p["b_out"] = np.zeros(C)
    return ModelState(config, p)


def param_shapes(config: ModelConfig) -> dict[str, tuple]:
    F, L = config.n_filters, config.filter_length
    D, H, C = config.feature_dim, config.hidden_size, config.n_classes
    first = {"f1": (F,), "band": (F,)} if config.variant == SINC else {"taps": (F, L)}
    scalars = {f"ln_{k}_{gb}": () for k in ("in", "conv", "hidden") for gb in "gb"}
    return {**first, **scalars, "w_hidden": (H, D), "b_hidden": (H,), "w_out": (C, H), "b_out": (C,)}


def first_layer_taps(state: ModelState) -> np.ndarray:
    cfg, p = state.config, state.params
    if cfg.variant == SINC:
        return dsp.bank_taps(p["f1"], p["f1"] + p["band"], cfg.filter_length, cfg.window)
    return p["taps"]


# --- forward / backward ---------------------------------------------------

def _ln(x, eps):
    mu = x.mean(axis=-1, keepdims=True)
    std = np.sqrt(x.var(axis=-1, keepdims=True) + eps)
    return (x - mu) / std, std


def _ln_backward(dz, z, std):
    m = dz.shape[-1]
    return (dz - dz.sum(-1, keepdims=True) / m - z * (dz * z).sum(-1, keepdims=True) / m) / std


def _check(name, a):
    if not np.all(np.isfinite(a)):
        raise NumericError("non-finite activation", where=name)
    return a


@dataclass
class Cache:
    taps: np.ndarray
    x0: np.ndarray
    z0: np.ndarray
    yz: np.ndarray
    y: np.ndarray
    pool_idx: np.ndarray
    z1: np.ndarray
    s1: np.ndarray
    a1: np.ndarray
    h1: np.ndarray
    z2: np.ndarray
    s2: np.ndarray
    a2: np.ndarray
    h2: np.ndarray
    log_probs: np.ndarray

    @property
    def probs(self):
        return np.exp(self.log_probs)


def forward_batch(state: ModelState, X: np.ndarray):
    """Posteriors for a (B, N) batch of chunks, plus the backward cache."""
    cfg, p = state.config, state.params
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != cfg.chunk_len:
        raise ShapeError(f"chunk length {X.shape[1]} != configured {cfg.chunk_len}")
    eps, slope, pw = cfg.ln_eps, cfg.leaky_slope, cfg.pool_width
    B = X.shape[0]

    z0, _ = _ln(X, eps)
    x0 = _check("input_norm", p["ln_in_g"] * z0 + p["ln_in_b"])
    taps = _check("first_layer_taps", first_layer_taps(state))
    yz = convolve_bank_batch(z0, taps)
    y = _check("first_layer", p["ln_in_g"] * yz + p["ln_in_b"] * taps.sum(1)[None, :, None])

    Tp = cfg.pooled_len
    blocks = np.abs(y[:, :, : Tp * pw]).reshape(B, cfg.n_filters, Tp, pw)
    idx = blocks.argmax(-1)
    pooled = np.take_along_axis(blocks, idx[..., None], -1)[..., 0].reshape(B, -1)

    z1, s1 = _ln(pooled, eps)
    a1 = p["ln_conv_g"] * z1 + p["ln_conv_b"]
    h1 = np.where(a1 > 0, a1, slope * a1)
    d = _check("hidden", h1 @ p["w_hidden"].T + p["b_hidden"])
    z2, s2 = _ln(d, eps)
    a2 = p["ln_hidden_g"] * z2 + p["ln_hidden_b"]
    h2 = np.where(a2 > 0, a2, slope * a2)
    logits = _check("output", h2 @ p["w_out"].T + p["b_out"])
    shifted = logits - logits.max(-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(-1, keepdims=True))
    cache = Cache(taps, x0, z0, yz, y, idx, z1, s1, a1, h1, z2, s2, a2, h2, log_probs)
    return cache.probs, cache


def forward(state: ModelState, chunk):
    """Class posteriors for one chunk (array or SignalChunk)."""
    x = getattr(chunk, "samples", chunk)
    probs, cache = forward_batch(state, np.asarray(x, dtype=float)[None, :])
    return probs[0], cache


def _check_targets(targets, n_classes):
    t = np.atleast_1d(np.asarray(targets))
    if t.dtype.kind not in "iu" or np.any((t < 0) | (t >= n_classes)):
        raise LabelError(f"targets must be integers in [0, {n_classes}), got {t.tolist()}")
    return t


def loss_from_cache(cache: Cache, targets) -> np.ndarray:
    t = np.atleast_1d(targets)
    return -cache.log_probs[np.arange(len(t)), t]


def backward(state: ModelState, cache: Cache, targets, scale: float | None = None) -> dict[str, np.ndarray]:
    """Gradients of ``scale * sum of cross-entropy`` over the cached batch.

    ``scale`` defaults to 1/B, i.e. the batch-mean loss.
    """
    cfg, p = state.config, state.params
    t = _check_targets(targets, cfg.n_classes)
    B = cache.log_probs.shape[0]
    if len(t) != B:
        raise ShapeError(f"{len(t)} targets for a batch of {B}")
    scale = 1.0 / B if scale is None else scale
    slope = cfg.leaky_slope
    g: dict[str, np.ndarray] = {}

    dlogits = cache.probs
    dlogits[np.arange(B), t] -= 1.0
    dlogits *= scale
    g["w_out"] = dlogits.T @ cache.h2
    g["b_out"] = dlogits.sum(0)
    da2 = (dlogits @ p["w_out"]) * np.where(cache.a2 > 0, 1.0, slope)
    g["ln_hidden_g"] = np.array((da2 * cache.z2).sum())
    g["ln_hidden_b"] = np.array(da2.sum())
    dd = _ln_backward(da2 * p["ln_hidden_g"], cache.z2, cache.s2)
    g["w_hidden"] = dd.T @ cache.h1
    g["b_hidden"] = dd.sum(0)
    da1 = (dd @ p["w_hidden"]) * np.where(cache.a1 > 0, 1.0, slope)
    g["ln_conv_g"] = np.array((da1 * cache.z1).sum())
    g["ln_conv_b"] = np.array(da1.sum())
    dpooled = _ln_backward(da1 * p["ln_conv_g"], cache.z1, cache.s1)

    F, Tp, pw = cfg.n_filters, cfg.pooled_len, cfg.pool_width
    dblocks = np.zeros((B, F, Tp, pw))
    np.put_along_axis(dblocks, cache.pool_idx[..., None], dpooled.reshape(B, F, Tp, 1), -1)
    dy = np.zeros_like(cache.y)
    dy[:, :, : Tp * pw] = dblocks.reshape(B, F, Tp * pw)
    dy *= np.sign(cache.y)

    taps_sum = cache.taps.sum(1)
    g["ln_in_g"] = np.array((dy * cache.yz).sum())
    g["ln_in_b"] = np.array((dy.sum(-1) * taps_sum[None, :]).sum())
    dtaps = correlate_bank_batch(cache.x0, dy, cfg.filter_length)[:, ::-1]
    if cfg.variant == SINC:
        d1, d2 = dsp.bank_grads(p["f1"], p["f1"] + p["band"], cfg.filter_length, cfg.window)
        # f2 = f1 + band, so f1 moves both edges
        g["band"] = (dtaps * d2).sum(1)
        g["f1"] = (dtaps * d1).sum(1) + g["band"]
    else:
        g["taps"] = dtaps
    return g


def batch_loss_and_grads(state: ModelState, X, targets, micro_batch: int = 16):
    """Mean loss, error count and mean gradients over a batch.

    Runs in micro-batches to bound memory; partial sums are reduced in
    index order so results do not depend on ``micro_batch`` beyond
    floating-point association.
    """
    X = np.atleast_2d(X)
    t = _check_targets(targets, state.config.n_classes)
    B = X.shape[0]
    total = None
    loss_sum, errors = 0.0, 0
    for s in range(0, B, micro_batch):
        probs, cache = forward_batch(state, X[s : s + micro_batch])
        tb = t[s : s + micro_batch]
        loss_sum += float(loss_from_cache(cache, tb).sum())
        errors += int(np.sum(probs.argmax(-1) != tb))
        g = backward(state, cache, tb, scale=1.0 / B)
        total = g if total is None else {k: total[k] + g[k] for k in total}
    return loss_sum / B, errors, total


# --- optimizer ------------------------------------------------------------

@dataclass
class OptState:
    lr: float = 0.001
    alpha: float = 0.95
    epsilon: float = 1e-7
    batch_size: int = 128
    acc: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.lr > 0 and 0 <= self.alpha < 1 and self.epsilon > 0 and self.batch_size >= 1):
            raise ConfigError("invalid optimizer settings")


def rmsprop_step(state: ModelState, opt: OptState, grads: dict[str, np.ndarray]) -> ModelState:
    """One RMSprop update; returns a new state and advances ``opt.acc`` in place.

    acc <- alpha acc + (1 - alpha) g^2;  p <- p - lr g / sqrt(acc + eps).
    Sinc cutoffs are projected back onto the valid set afterwards.
    """
    new = {}
    for name, value in state.params.items():
        grad = grads[name]
        if grad.shape != value.shape:
            raise ShapeError(f"gradient shape {grad.shape} != parameter shape {value.shape} for {name}")
        if not np.all(np.isfinite(grad)):
            raise NumericError("non-finite gradient", where=name)
        acc = opt.acc.get(name)
        acc = np.zeros_like(value) if acc is None else acc
        acc = opt.alpha * acc + (1.0 - opt.alpha) * grad * grad
        opt.acc[name] = acc
        new[name] = value - opt.lr * grad / np.sqrt(acc + opt.epsilon)
    if state.config.variant == SINC:
        new["f1"], new["band"] = dsp.project_arrays(new["f1"], new["band"], state.config.band_min)
    for name, value in new.items():
        if not np.all(np.isfinite(value)):
            raise NumericError("non-finite parameter after update", where=name)
    return ModelState(state.config, new)


# --- training -------------------------------------------------------------

@dataclass
class TraceRecord:
    epoch: int
    mean_loss: float
    chunk_error: float
    heldout_error: float | None = None
    updates: int = 0


def stack_chunks(chunks):
    X = np.stack([np.asarray(c.samples, dtype=float) for c in chunks])
    y = np.array([c.label for c in chunks], dtype=int)
    return X, y


def predict(state: ModelState, X, micro_batch: int = 32) -> np.ndarray:
    X = np.atleast_2d(X)
    out = [forward_batch(state, X[s : s + micro_batch])[0] for s in range(0, X.shape[0], micro_batch)]
    return np.concatenate(out)


def chunk_error(state: ModelState, chunks) -> float:
    X, y = stack_chunks(chunks)
    return float(np.mean(predict(state, X).argmax(-1) != y))


def train(state: ModelState, opt: OptState, dataset, epochs: int, seed: int = 0, eval_set=None,
          on_step=None, on_epoch=None, micro_batch: int = 16):
    """Minibatch RMSprop training.

    ``chunk_error`` in the trace is measured on the training chunks as they
    are visited (before each batch's update). ``on_step(updates, state)``
    fires after every update, ``on_epoch(record, state)`` after each epoch.
    """
    if not dataset:
        raise ConfigError("empty dataset")
    X, y = stack_chunks(dataset)
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    trace: list[TraceRecord] = []
    updates = 0
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        loss_sum, err_sum = 0.0, 0
        for bi, s in enumerate(range(0, n, opt.batch_size)):
            idx = order[s : s + opt.batch_size]
            try:
                loss, errors, grads = batch_loss_and_grads(state, X[idx], y[idx], micro_batch)
                state = rmsprop_step(state, opt, grads)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch}, batch {bi}: {exc}", where=exc.where) from exc
            loss_sum += loss * len(idx)
            err_sum += errors
            updates += 1
            if on_step is not None:
                on_step(updates, state)
        rec = TraceRecord(epoch, loss_sum / n, err_sum / n, updates=updates)
        if eval_set:
            rec.heldout_error = chunk_error(state, eval_set)
        trace.append(rec)
        if on_epoch is not None:
            on_epoch(rec, state)
    return state, trace


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("epoch,mean_loss,chunk_error\n")
        for r in trace:
            fh.write(f"{r.epoch},{float(r.mean_loss)!r},{float(r.chunk_error)!r}\n")


# --- checkpoints ----------------------------------------------------------

def _encode(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(doc: dict) -> np.ndarray:
    raw = base64.b64decode(doc["data"], validate=True)
    return np.frombuffer(raw, dtype="<f8").astype(float).reshape(doc["shape"])


def checkpoint_to_json(state: ModelState, extra: dict | None = None) -> dict:
    layer = state.first_layer()
    first = {"variant": layer.variant}
    if layer.variant == SINC:
        first["filterbank"] = layer.bank.to_json()
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "config": dataclasses.asdict(state.config),
        "first_layer": first,
        "params": {k: _encode(v) for k, v in sorted(state.params.items())},
    }
    if extra:
        doc["hyperparameters"] = extra
    return doc


def checkpoint_from_json(doc: dict) -> ModelState:
    try:
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise FormatError(f"not a checkpoint document (format={doc.get('format')!r})")
        config = ModelConfig(**doc["config"])
        params = {k: _decode(v) for k, v in doc["params"].items()}
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"corrupt checkpoint: {exc}") from exc
    shapes = param_shapes(config)
    if set(params) != set(shapes):
        raise FormatError(f"checkpoint parameters {sorted(params)} do not match variant {config.variant}")
    for k, shape in shapes.items():
        if params[k].shape != shape:
            raise FormatError(f"parameter {k} has shape {params[k].shape}, expected {shape}")
    return ModelState(config, params)


def save_checkpoint(state: ModelState, path, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(checkpoint_to_json(state, extra), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> ModelState:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"checkpoint is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("checkpoint root must be an object")
    return checkpoint_from_json(doc)
