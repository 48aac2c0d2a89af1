"""Windowed-sinc band-pass filters parametrized by their cutoff frequencies.

All frequencies inside this module are normalized (cycles/sample, 0..0.5).
Hz only shows up in the init helpers and in JSON (de)serialization.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, ParameterDomainError, SpecError

NYQUIST = 0.5


class Window(str, enum.Enum):
    HAMMING = "hamming"
    HANN = "hann"
    BLACKMAN = "blackman"
    RECTANGULAR = "rectangular"


@dataclass(frozen=True)
class SincParams:
    """Learnable cutoffs of one filter: low edge ``f1`` and bandwidth ``band``."""

    f1: float
    band: float

    @property
    def f2(self) -> float:
        return min(self.f1 + self.band, NYQUIST)

    @classmethod
    def from_cutoffs(cls, f1: float, f2: float) -> "SincParams":
        return cls(float(f1), float(f2) - float(f1))

    def validate(self) -> None:
        f1, f2 = self.f1, self.f2
        if not (math.isfinite(f1) and math.isfinite(self.band)):
            raise ParameterDomainError(f"non-finite cutoffs f1={f1}, band={self.band}")
        if not (0.0 <= f1 <= NYQUIST) or self.band < 0.0 or f1 + self.band > NYQUIST + 1e-12:
            raise ParameterDomainError(
                f"need 0 <= f1 <= f2 <= 0.5, got f1={f1}, f2={f1 + self.band}"
            )


def project(params: SincParams, band_min: float) -> SincParams:
    """Map arbitrary (f1, band) back onto the valid set.

    f1 is capped at ``0.5 - band_min`` so that a minimal band still fits
    below Nyquist.
    """
    if not 0.0 < band_min <= NYQUIST:
        raise ConfigError(f"band_min must be in (0, 0.5], got {band_min}")
    f1, band = project_arrays(params.f1, params.band, band_min)
    return SincParams(float(f1), float(band))


def project_arrays(f1: np.ndarray, band: np.ndarray, band_min: float):
    """Vectorized :func:`project`."""
    f1 = np.minimum(np.abs(f1), NYQUIST - band_min)
    # upper clamp first: 0.5 - f1 can round to just under band_min
    band = np.maximum(np.minimum(np.abs(band), NYQUIST - f1), band_min)
    return f1, band


@dataclass(frozen=True)
class FilterSpec:
    length: int = 251
    window: Window = Window.HAMMING
    sample_rate: float = 16000.0

    def __post_init__(self):
        object.__setattr__(self, "window", Window(self.window))
        if int(self.length) != self.length or self.length < 1 or self.length % 2 == 0:
            raise SpecError(f"filter length must be a positive odd integer, got {self.length}")
        if not self.sample_rate > 0:
            raise SpecError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def center(self) -> int:
        return (self.length - 1) // 2

    def offsets(self) -> np.ndarray:
        """Tap positions n = -(L-1)/2 .. (L-1)/2."""
        return np.arange(-self.center, self.center + 1, dtype=float)


def window_values(kind: Window | str, length: int) -> np.ndarray:
    """Window centered on n=0, so w[c] == 1 and w is even about the center."""
    kind = Window(kind)
    n = np.arange(-(length // 2), length // 2 + 1, dtype=float)
    phase = 2.0 * np.pi * n / length
    if kind is Window.HAMMING:
        w = 0.54 + 0.46 * np.cos(phase)
    elif kind is Window.HANN:
        w = 0.5 + 0.5 * np.cos(phase)
    elif kind is Window.BLACKMAN:
        w = 0.42 + 0.5 * np.cos(phase) + 0.08 * np.cos(2.0 * phase)
    else:
        w = np.ones(length)
    # evaluated on one side then mirrored so symmetry is bit-exact
    c = length // 2
    w[:c] = w[: c : -1]
    return w


def _half_offsets(length):
    return np.arange(1, (length - 1) // 2 + 1, dtype=float)


def _mirror(center, right):
    """Assemble [right[::-1], center, right] along the last axis."""
    return np.concatenate([right[..., ::-1], center[..., None], right], axis=-1)


def bank_taps(f1, f2, length: int, window: Window | str = Window.HAMMING) -> np.ndarray:
    """Taps for many filters at once, shape (F, L). No parameter validation.

    Uses 2 f sinc(2 pi f n) = sin(2 pi f n) / (pi n) for n != 0 and the
    2 f limit at n = 0.
    """
    f1 = np.atleast_1d(np.asarray(f1, dtype=float))[:, None]
    f2 = np.atleast_1d(np.asarray(f2, dtype=float))[:, None]
    w = window_values(window, length)
    c = (length - 1) // 2
    n = _half_offsets(length)[None, :]
    right = (np.sin(2.0 * np.pi * f2 * n) - np.sin(2.0 * np.pi * f1 * n)) / (np.pi * n)
    center = 2.0 * (f2[:, 0] - f1[:, 0]) * w[c]
    return _mirror(center, right * w[c + 1 :])


def bank_grads(f1, f2, length: int, window: Window | str = Window.HAMMING):
    """d taps / d f1 and d taps / d f2 for many filters, each (F, L)."""
    f1 = np.atleast_1d(np.asarray(f1, dtype=float))[:, None]
    f2 = np.atleast_1d(np.asarray(f2, dtype=float))[:, None]
    w = window_values(window, length)
    c = (length - 1) // 2
    n = _half_offsets(length)[None, :]
    wr = w[c + 1 :]
    d2 = _mirror(np.full(f2.shape[0], 2.0 * w[c]), 2.0 * np.cos(2.0 * np.pi * f2 * n) * wr)
    d1 = _mirror(np.full(f1.shape[0], -2.0 * w[c]), -2.0 * np.cos(2.0 * np.pi * f1 * n) * wr)
    return d1, d2


def build_filter(params: SincParams, spec: FilterSpec) -> np.ndarray:
    """Windowed taps w[n] (2 f2 sinc(2 pi f2 n) - 2 f1 sinc(2 pi f1 n))."""
    params.validate()
    return bank_taps(params.f1, params.f2, spec.length, spec.window)[0]


def filter_grad(params: SincParams, spec: FilterSpec):
    """Exact derivatives of :func:`build_filter` w.r.t. f1 and f2."""
    params.validate()
    d1, d2 = bank_grads(params.f1, params.f2, spec.length, spec.window)
    return d1[0], d2[0]


def ideal_response(params: SincParams, f):
    """rect(f / 2 f2) - rect(f / 2 f1).

    rect is taken as 1 on its closed half-width, so the band is the
    half-open interval (f1, f2]: response 0 at f == f1 and 1 at f == f2.
    Accepts a scalar or an array of normalized frequencies.
    """
    f = np.asarray(f, dtype=float)
    if np.any((f < 0.0) | (f > NYQUIST)) or np.any(~np.isfinite(f)):
        raise DomainError("frequency must lie in [0, 0.5]")
    out = ((f > params.f1) & (f <= params.f2)).astype(float)
    return float(out) if out.ndim == 0 else out


@dataclass
class ResponseCurve:
    """Magnitude response sampled on a uniform grid from DC to Nyquist."""

    freqs_hz: np.ndarray
    magnitude: np.ndarray

    def __post_init__(self):
        self.freqs_hz = np.asarray(self.freqs_hz, dtype=float)
        self.magnitude = np.asarray(self.magnitude, dtype=float)
        if self.freqs_hz.shape != self.magnitude.shape:
            raise DomainError("freqs_hz and magnitude must have the same length")

    def __add__(self, other: "ResponseCurve") -> "ResponseCurve":
        if not np.array_equal(self.freqs_hz, other.freqs_hz):
            raise DomainError("cannot add curves on different grids")
        return ResponseCurve(self.freqs_hz, self.magnitude + other.magnitude)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("freq_hz,magnitude\n")
            for f, m in zip(self.freqs_hz, self.magnitude):
                fh.write(f"{float(f)!r},{float(m)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "ResponseCurve":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


def frequency_grid(grid_size: int) -> np.ndarray:
    return np.linspace(0.0, NYQUIST, grid_size)


def realized_response(taps, grid_size: int, sample_rate: float = 1.0) -> ResponseCurve:
    """|DTFT(taps)| on ``grid_size`` points spanning [0, 0.5] inclusive.

    With nfft = 2 (grid_size - 1) the rfft bins land exactly on that grid.
    With the default sample_rate of 1 the frequencies stay normalized.
    """
    taps = np.asarray(taps, dtype=float)
    if taps.ndim != 1 or taps.size == 0:
        raise DomainError("taps must be a non-empty vector")
    if grid_size < 2 * taps.size:
        raise DomainError(f"grid_size {grid_size} below 2*L = {2 * taps.size}")
    mag = np.abs(np.fft.rfft(taps, n=2 * (grid_size - 1)))
    return ResponseCurve(frequency_grid(grid_size) * sample_rate, mag)


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=float) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=float) / 2595.0) - 1.0)


def mel_init(n_filters: int, spec: FilterSpec, f_low_hz: float = 30.0) -> list[SincParams]:
    """Triangular mel filterbank edges: filter i spans points i and i+2."""
    if n_filters < 1:
        raise ConfigError("need at least one filter")
    nyq_hz = spec.sample_rate / 2.0
    if not 0.0 < f_low_hz < nyq_hz:
        raise ConfigError(f"f_low_hz must be in (0, {nyq_hz}), got {f_low_hz}")
    mels = np.linspace(hz_to_mel(f_low_hz), hz_to_mel(nyq_hz), n_filters + 2)
    edges = mel_to_hz(mels) / spec.sample_rate
    edges[0], edges[-1] = f_low_hz / spec.sample_rate, NYQUIST
    return [SincParams.from_cutoffs(edges[i], edges[i + 2]) for i in range(n_filters)]


def random_init(n_filters: int, seed: int, band_min: float = 50.0 / 16000.0) -> list[SincParams]:
    """Uniform cutoffs in (0, 0.5), sorted so f1 < f2, then projected."""
    if n_filters < 1:
        raise ConfigError("need at least one filter")
    rng = np.random.default_rng(seed)
    draws = np.sort(rng.uniform(0.0, NYQUIST, size=(n_filters, 2)), axis=1)
    f1, band = project_arrays(draws[:, 0], draws[:, 1] - draws[:, 0], band_min)
    return [SincParams(float(a), float(b)) for a, b in zip(f1, band)]


@dataclass(frozen=True)
class FilterBank:
    """F realized filters with taps and tap derivatives cached at construction."""

    params: tuple[SincParams, ...]
    spec: FilterSpec
    taps: np.ndarray = field(repr=False)
    dtaps_df1: np.ndarray = field(repr=False)
    dtaps_df2: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, params, spec: FilterSpec) -> "FilterBank":
        params = tuple(params)
        if not params:
            raise DomainError("filter bank needs at least one filter")
        for p in params:
            p.validate()
        f1 = np.array([p.f1 for p in params])
        f2 = np.array([p.f2 for p in params])
        taps = bank_taps(f1, f2, spec.length, spec.window)
        d1, d2 = bank_grads(f1, f2, spec.length, spec.window)
        for a in (taps, d1, d2):
            a.setflags(write=False)
        return cls(params, spec, taps, d1, d2)

    @property
    def n_filters(self) -> int:
        return len(self.params)

    @property
    def num_params(self) -> int:
        return 2 * len(self.params)

    def f1(self) -> np.ndarray:
        return np.array([p.f1 for p in self.params])

    def band(self) -> np.ndarray:
        return np.array([p.band for p in self.params])

    def to_json(self) -> dict:
        fs = self.spec.sample_rate
        return {
            "sample_rate": fs,
            "L": self.spec.length,
            "window": self.spec.window.value,
            "filters": [{"f1_hz": p.f1 * fs, "band_hz": p.band * fs} for p in self.params],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FilterBank":
        spec = FilterSpec(int(doc["L"]), Window(doc["window"]), float(doc["sample_rate"]))
        fs = spec.sample_rate
        params = [SincParams(f["f1_hz"] / fs, f["band_hz"] / fs) for f in doc["filters"]]
        return cls.build(params, spec)
