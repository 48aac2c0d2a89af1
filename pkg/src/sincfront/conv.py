"""Framing, first-layer convolution and layer normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, PreconditionError, ShapeError


@dataclass
class SignalChunk:
    samples: np.ndarray
    sample_rate: float
    source_id: str = ""
    label: int = 0
    start: int = 0

    def __len__(self):
        return len(self.samples)


def _samples(chunk) -> np.ndarray:
    x = chunk.samples if isinstance(chunk, SignalChunk) else chunk
    return np.asarray(x, dtype=float)


def chunk_length(sample_rate: float, chunk_ms: float) -> int:
    n = sample_rate * chunk_ms / 1000.0
    if abs(n - round(n)) > 1e-9:
        raise ConfigError(f"{chunk_ms} ms at {sample_rate} Hz is not a whole number of samples")
    return int(round(n))


def frame_signal(waveform, sample_rate: float, chunk_ms: float = 200.0, overlap_ms: float = 10.0,
                 label: int = 0, source_id: str = "") -> list[SignalChunk]:
    """Cut a waveform into fixed-length chunks spaced ``chunk_ms - overlap_ms`` apart.

    The trailing partial chunk is dropped; a waveform shorter than one chunk
    yields an empty list.
    """
    if overlap_ms < 0:
        raise ConfigError("overlap_ms must be non-negative")
    if chunk_ms <= overlap_ms:
        raise ConfigError(f"hop must be positive (chunk {chunk_ms} ms, overlap {overlap_ms} ms)")
    size = chunk_length(sample_rate, chunk_ms)
    hop = size - chunk_length(sample_rate, overlap_ms)
    x = np.asarray(waveform, dtype=float)
    if x.size < size:
        return []
    starts = range(0, x.size - size + 1, hop)
    return [SignalChunk(x[s : s + size].copy(), sample_rate, source_id, label, s) for s in starts]


def _windows(x: np.ndarray, length: int) -> np.ndarray:
    # contiguous copy so the matmul hits BLAS instead of a strided loop
    return np.ascontiguousarray(sliding_window_view(x, length))


def convolve_valid(chunk, taps) -> np.ndarray:
    """y[n] = sum_l x[n + l] taps[L - 1 - l], n = 0 .. N - L (no padding)."""
    x = _samples(chunk)
    taps = np.asarray(taps, dtype=float)
    if x.size < taps.size:
        raise ShapeError(f"chunk of {x.size} samples shorter than {taps.size} taps")
    return _windows(x, taps.size) @ np.ascontiguousarray(taps[::-1])


def convolve_bank(x, taps: np.ndarray) -> np.ndarray:
    """Valid convolution of one signal with every row of ``taps``; returns (F, T)."""
    x = _samples(x)
    taps = np.atleast_2d(taps)
    if x.size < taps.shape[1]:
        raise ShapeError(f"chunk of {x.size} samples shorter than {taps.shape[1]} taps")
    return np.ascontiguousarray(taps[:, ::-1]) @ _windows(x, taps.shape[1]).T


def convolve_bank_batch(X: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Valid convolution of every row of X (B, N) with every filter (F, L); returns (B, F, N - L + 1).

    Computed as a circular convolution of length N, which leaves the valid
    outputs free of wrap-around.
    """
    X = np.atleast_2d(X)
    taps = np.atleast_2d(taps)
    N, L = X.shape[-1], taps.shape[-1]
    if N < L:
        raise ShapeError(f"chunk of {N} samples shorter than {L} taps")
    prod = np.fft.rfft(X, n=N)[:, None, :] * np.fft.rfft(taps, n=N)[None, :, :]
    return np.fft.irfft(prod, n=N)[..., L - 1 :]


def correlate_bank_batch(X: np.ndarray, dY: np.ndarray, length: int) -> np.ndarray:
    """c[f, l] = sum over b, n of dY[b, f, n] * X[b, n + l], for l < length; returns (F, length).

    This is the gradient of ``convolve_bank_batch`` output against the
    flipped taps, summed over the batch.
    """
    N = X.shape[-1]
    spec = np.einsum("bfk,bk->fk", np.conj(np.fft.rfft(dY, n=N)), np.fft.rfft(X, n=N))
    return np.fft.irfft(spec, n=N)[:, :length]


def is_symmetric(taps, atol: float = 1e-12) -> bool:
    taps = np.asarray(taps, dtype=float)
    return bool(np.all(np.abs(taps - taps[::-1]) <= atol))


def convolve_symmetric(chunk, taps, return_count: bool = False):
    """Valid convolution exploiting even symmetry of the taps.

    Mirrored input samples are summed before multiplying, so each output
    sample costs ceil(L/2) multiplications instead of L. With
    ``return_count`` the multiplication count is returned alongside.
    """
    x = _samples(chunk)
    taps = np.asarray(taps, dtype=float)
    L = taps.size
    if x.size < L:
        raise ShapeError(f"chunk of {x.size} samples shorter than {L} taps")
    if not is_symmetric(taps):
        raise PreconditionError("taps are not even-symmetric")
    win = _windows(x, L)
    half = L // 2
    folded = win[:, :half] + win[:, L - 1 : L - 1 - half : -1]
    unique = taps[:half]
    y = folded @ unique
    mults = folded.shape[0] * unique.size
    if L % 2:
        y = y + win[:, half] * taps[half]
        mults += win.shape[0]
    return (y, mults) if return_count else y


def naive_mult_count(n_samples: int, length: int) -> int:
    return (n_samples - length + 1) * length


def layer_norm(values, gain: float = 1.0, bias: float = 0.0, epsilon: float = 1e-6) -> np.ndarray:
    """Normalize over the whole vector, then apply a scalar gain and bias."""
    v = np.asarray(values, dtype=float)
    mu = v.mean(axis=-1, keepdims=True)
    var = v.var(axis=-1, keepdims=True)
    return (v - mu) / np.sqrt(var + epsilon) * gain + bias


def write_feature_map_csv(values: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("filter_index,time_index,value\n")
        for i, row in enumerate(np.atleast_2d(values)):
            for t, v in enumerate(row):
                fh.write(f"{i},{t},{float(v)!r}\n")
