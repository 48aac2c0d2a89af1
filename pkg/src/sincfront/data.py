"""Audio ingestion and synthetic speaker-like datasets."""

from __future__ import annotations

import json
import math
import os
import struct
import wave
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dsp
from .dsp import FilterSpec, SincParams, Window
from .errors import ConfigError, DomainError, FormatError

PEAK = 0.9
WAVE_FORMAT_PCM = 1


@dataclass
class Utterance:
    samples: np.ndarray
    sample_rate: int
    label: int = 0
    id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)


# --- WAV ------------------------------------------------------------------

def _iter_chunks(buf: bytes, path):
    pos = 12
    while pos + 8 <= len(buf):
        cid, size = struct.unpack_from("<4sI", buf, pos)
        body = buf[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise FormatError(f"{path}: chunk {cid.decode('latin-1')!r} truncated ({len(body)} of {size} bytes)")
        yield cid, body
        pos += 8 + size + (size & 1)


def read_wav(path) -> Utterance:
    """Read a RIFF/WAVE file holding 16-bit mono PCM, scaled by 1/32768."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 12 or buf[:4] != b"RIFF" or buf[8:12] != b"WAVE":
        raise FormatError(f"{path}: chunk 'RIFF' missing or not a WAVE file")
    fmt = data = None
    for cid, body in _iter_chunks(buf, path):
        if cid == b"fmt ":
            if len(body) < 16:
                raise FormatError(f"{path}: chunk 'fmt ' too short ({len(body)} bytes)")
            fmt = struct.unpack_from("<HHIIHH", body)
        elif cid == b"data":
            data = body
    if fmt is None:
        raise FormatError(f"{path}: chunk 'fmt ' missing")
    tag, channels, rate, _, _, bits = fmt
    if tag != WAVE_FORMAT_PCM:
        raise FormatError(f"{path}: chunk 'fmt ' declares format tag {tag}, only PCM (1) is supported")
    if channels != 1:
        raise FormatError(f"{path}: chunk 'fmt ' declares {channels} channels, only mono is supported")
    if bits != 16:
        raise FormatError(f"{path}: chunk 'fmt ' declares {bits}-bit samples, only 16-bit is supported")
    if data is None:
        raise FormatError(f"{path}: chunk 'data' missing")
    if len(data) % 2:
        raise FormatError(f"{path}: chunk 'data' has odd byte length {len(data)}")
    ints = np.frombuffer(data, dtype="<i2")
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return Utterance(ints.astype(float) / 32768.0, int(rate), 0, name)


def to_int16(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    return np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")


def write_wav(path, samples, sample_rate: int) -> None:
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(to_int16(samples).tobytes())


def load_manifest(path, sample_rate: int | None = None) -> list[Utterance]:
    """Load ``[{"path": ..., "label": ...}, ...]``; relative paths resolve against the manifest."""
    with open(path) as fh:
        entries = json.load(fh)
    if not isinstance(entries, list) or not entries:
        raise FormatError(f"{path}: manifest must be a non-empty JSON list")
    base = os.path.dirname(os.path.abspath(path))
    out = []
    for e in entries:
        try:
            wav_path, label = e["path"], int(e["label"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: bad manifest entry {e!r}") from exc
        utt = read_wav(os.path.join(base, wav_path))
        if sample_rate is not None and utt.sample_rate != sample_rate:
            raise ConfigError(f"{wav_path}: sample rate {utt.sample_rate} != configured {sample_rate}")
        utt.label = label
        out.append(utt)
    return out


def write_manifest(utterances, out_dir) -> str:
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for u in utterances:
        name = f"{u.id}.wav"
        write_wav(os.path.join(out_dir, name), u.samples, u.sample_rate)
        entries.append({"path": name, "label": int(u.label)})
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(entries, fh, indent=1)
        fh.write("\n")
    return path


# --- synthesis ------------------------------------------------------------

@dataclass
class Formant:
    center: float
    bandwidth: float
    amplitude: float = 1.0


@dataclass
class SynthSpeakerProfile:
    f0: float
    formants: list[Formant] = field(default_factory=list)
    jitter: float = 0.0

    def __post_init__(self):
        self.formants = [f if isinstance(f, Formant) else Formant(*f) for f in self.formants]

    def validate(self, sample_rate: float) -> None:
        nyq = sample_rate / 2
        if not 0 < self.f0 * (1 + self.jitter) < nyq:
            raise ConfigError(f"f0 {self.f0} Hz (jitter {self.jitter}) not below Nyquist {nyq} Hz")
        for fm in self.formants:
            if not 0 < fm.center < nyq or fm.bandwidth <= 0:
                raise ConfigError(f"formant at {fm.center} Hz invalid for Nyquist {nyq} Hz")
        if not 0 <= self.jitter < 1:
            raise ConfigError("jitter must be in [0, 1)")

    def envelope(self, freqs) -> np.ndarray:
        """Sum of resonance peaks |1 / (1 + j (f - fc) / (bw/2))|."""
        f = np.asarray(freqs, dtype=float)
        env = np.zeros_like(f)
        for fm in self.formants:
            env += fm.amplitude / np.sqrt(1.0 + ((f - fm.center) / (fm.bandwidth / 2)) ** 2)
        return env


def default_profiles(n_classes: int = 10, f0_low: float = 110.0, f0_high: float = 300.0,
                     jitter: float = 0.1, seed: int = 0) -> list[SynthSpeakerProfile]:
    """Log-spaced pitches with two formants per class.

    First formants tile 300-900 Hz and second formants 1000-2800 Hz; the
    second set is shuffled so pitch and formants are not collinear.
    """
    rng = np.random.default_rng(seed)
    f0s = np.geomspace(f0_low, f0_high, n_classes)
    first = np.linspace(300.0, 900.0, n_classes)
    second = rng.permutation(np.linspace(1000.0, 2800.0, n_classes))
    return [
        SynthSpeakerProfile(float(f0), [Formant(float(a), 80.0, 1.0), Formant(float(b), 120.0, 0.6)], jitter)
        for f0, a, b in zip(f0s, first, second)
    ]


def profiles_to_json(profiles) -> list[dict]:
    return [asdict(p) for p in profiles]


def profiles_from_json(doc) -> list[SynthSpeakerProfile]:
    try:
        return [SynthSpeakerProfile(d["f0"], [Formant(**f) for f in d["formants"]], d.get("jitter", 0.0))
                for d in doc]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad synthetic profile document: {exc}") from exc


def _peak_normalize(x):
    peak = np.max(np.abs(x))
    return x * (PEAK / peak) if peak > 0 else x


def synthesize(profile: SynthSpeakerProfile, f0: float, n_samples: int, sample_rate: float,
               phases: np.ndarray, noise: np.ndarray) -> np.ndarray:
    t = np.arange(n_samples) / sample_rate
    x = np.zeros(n_samples)
    k_max = int(math.ceil(sample_rate / 2 / f0))
    for k in range(1, k_max + 1):
        fk = k * f0
        if fk >= sample_rate / 2:
            break
        x += profile.envelope(fk) * np.sin(2 * np.pi * fk * t + phases[(k - 1) % len(phases)])
    power = np.mean(x * x)
    x = x + noise * math.sqrt(power * 10 ** (-30 / 10))
    return _peak_normalize(x)


def synth_dataset(profiles, utts_per_class: int = 8, duration_s: float = 2.0, sample_rate: int = 16000,
                  seed: int = 0) -> list[Utterance]:
    """Harmonic-plus-formant utterances, one class per profile.

    Harmonic phases and the -30 dB white-noise floor are drawn once per
    profile; utterances of a class differ only through f0 jitter.
    """
    if len(profiles) < 2:
        raise ConfigError("need at least two profiles")
    if utts_per_class < 1 or duration_s <= 0:
        raise ConfigError("utts_per_class and duration_s must be positive")
    n = int(round(duration_s * sample_rate))
    out = []
    for label, prof in enumerate(profiles):
        prof.validate(sample_rate)
        rng = np.random.default_rng([seed, label])
        phases = rng.uniform(0, 2 * np.pi, size=256)
        noise = rng.standard_normal(n)
        for u in range(utts_per_class):
            f0 = prof.f0 * (1.0 + prof.jitter * rng.uniform(-1.0, 1.0)) if prof.jitter else prof.f0
            x = synthesize(prof, f0, n, sample_rate, phases, noise)
            out.append(Utterance(x, sample_rate, label, f"c{label:02d}_u{u:02d}"))
    return out


# --- band noise -----------------------------------------------------------

NOISE_FILTER_LENGTH = 251


def band_filter(sample_rate: float, low_hz: float, high_hz: float) -> np.ndarray:
    spec = FilterSpec(NOISE_FILTER_LENGTH, Window.HAMMING, sample_rate)
    return dsp.build_filter(SincParams.from_cutoffs(low_hz / sample_rate, high_hz / sample_rate), spec)


def band_energy(x, sample_rate: float, low_hz: float, high_hz: float) -> float:
    """Sum of squared DFT magnitudes over bins with low_hz <= f <= high_hz."""
    x = np.asarray(x, dtype=float)
    f = np.fft.rfftfreq(x.size, 1.0 / sample_rate)
    spec = np.abs(np.fft.rfft(x)) ** 2
    return float(spec[(f >= low_hz) & (f <= high_hz)].sum())


def band_noise(n_samples: int, sample_rate: float, low_hz: float, high_hz: float, seed) -> np.ndarray:
    taps = band_filter(sample_rate, low_hz, high_hz)
    white = np.random.default_rng(seed).standard_normal(n_samples)
    return np.convolve(white, taps, mode="same")


def inject_band_noise(utt: Utterance, band_low_hz: float, band_high_hz: float, snr_db: float = 0.0,
                      seed=0) -> Utterance:
    """Add band-limited white noise at a given in-band SNR, then renormalize to peak 0.9.

    Signal and noise are compared by their DFT energy inside the band, so at
    0 dB the mixture carries about twice the clean in-band energy.
    ``snr_db = inf`` adds nothing.
    """
    fs = utt.sample_rate
    if not 0 <= band_low_hz < band_high_hz <= fs / 2:
        raise DomainError(f"invalid noise band [{band_low_hz}, {band_high_hz}] Hz at fs={fs}")
    x = np.asarray(utt.samples, dtype=float)
    if math.isinf(snr_db) and snr_db > 0:
        return Utterance(_peak_normalize(x.copy()), fs, utt.label, utt.id)
    noise = band_noise(x.size, fs, band_low_hz, band_high_hz, seed)
    p_sig = band_energy(x, fs, band_low_hz, band_high_hz)
    p_noise = band_energy(noise, fs, band_low_hz, band_high_hz)
    scale = math.sqrt(p_sig / (p_noise * 10 ** (snr_db / 10))) if p_noise > 0 else 0.0
    return Utterance(_peak_normalize(x + scale * noise), fs, utt.label, utt.id)
