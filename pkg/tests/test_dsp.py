import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sincfront import dsp
from sincfront.dsp import FilterBank, FilterSpec, SincParams, Window
from sincfront.errors import ConfigError, DomainError, ParameterDomainError, SpecError

from conftest import dtft_magnitude

RECT = FilterSpec(251, Window.RECTANGULAR)
HAMMING = FilterSpec(251, Window.HAMMING)


def cutoffs():
    return st.tuples(
        st.floats(0.0, 0.5, allow_nan=False), st.floats(0.0, 0.5, allow_nan=False)
    ).map(sorted)


def test_identity_filter():
    taps = dsp.build_filter(SincParams.from_cutoffs(0.0, 0.5), RECT)
    c = RECT.center
    assert taps[c] == 1.0
    assert np.max(np.abs(np.delete(taps, c))) < 1e-15


@pytest.mark.parametrize("window", list(Window))
def test_zero_bandwidth_is_zero(window):
    taps = dsp.build_filter(SincParams.from_cutoffs(0.1, 0.1), FilterSpec(251, window))
    assert np.all(taps == 0.0)


def test_hamming_center_tap_and_band_shape():
    taps = dsp.build_filter(SincParams.from_cutoffs(0.1, 0.2), HAMMING)
    # centered Hamming has w[0] = 1, so the center tap is 2 (f2 - f1)
    assert taps[HAMMING.center] == pytest.approx(0.2, abs=1e-15)
    freqs = np.arange(4096) / 8192.0  # 4096 points over [0, 0.5)
    mag = dtft_magnitude(taps, freqs)
    inside = mag[(freqs > 0.12) & (freqs < 0.18)]
    outside = mag[(freqs < 0.08) | (freqs > 0.22)]
    assert np.ptp(inside) < 0.01
    assert 20 * np.log10(inside.mean() / outside.max()) >= 30.0


def test_rectangular_window_is_plain_sinc_difference():
    f1, f2 = 0.07, 0.31
    taps = dsp.build_filter(SincParams.from_cutoffs(f1, f2), RECT)
    n = RECT.offsets()
    # np.sinc(x) = sin(pi x) / (pi x)
    expected = 2 * f2 * np.sinc(2 * f2 * n) - 2 * f1 * np.sinc(2 * f1 * n)
    np.testing.assert_allclose(taps, expected, atol=1e-15)


@pytest.mark.parametrize("bad", [(0.3, 0.2), (-0.1, 0.2), (0.2, 0.7), (math.nan, 0.2)])
def test_invalid_params_rejected(bad):
    with pytest.raises(ParameterDomainError):
        dsp.build_filter(SincParams(bad[0], bad[1] - bad[0]), HAMMING)


@pytest.mark.parametrize("length", [250, 0, -3])
def test_even_or_nonpositive_length_rejected(length):
    with pytest.raises(SpecError):
        FilterSpec(length)


@given(cutoffs(), st.sampled_from(list(Window)), st.sampled_from([3, 17, 101, 251]))
def test_taps_bit_symmetric(fc, window, length):
    taps = dsp.build_filter(SincParams.from_cutoffs(*fc), FilterSpec(length, window))
    assert np.array_equal(taps, taps[::-1])
    assert np.all(np.isfinite(taps))


def test_symmetry_when_sides_computed_independently():
    f1, f2 = 0.0731, 0.2917
    spec = FilterSpec(251, Window.HAMMING)
    n = spec.offsets()
    w = 0.54 + 0.46 * np.cos(2 * np.pi * n / spec.length)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = (np.sin(2 * np.pi * f2 * n) - np.sin(2 * np.pi * f1 * n)) / (np.pi * n)
    g[spec.center] = 2 * (f2 - f1)
    direct = w * g
    np.testing.assert_allclose(direct, direct[::-1], atol=1e-15, rtol=0)
    np.testing.assert_allclose(dsp.build_filter(SincParams.from_cutoffs(f1, f2), spec), direct,
                               atol=1e-15, rtol=0)


def test_hamming_window_center_is_one():
    for length in (3, 17, 251):
        w = dsp.window_values(Window.HAMMING, length)
        assert w[length // 2] == 1.0
        assert np.array_equal(w, w[::-1])


def test_dc_and_nyquist_edges_finite():
    for fc in [(0.0, 0.5), (0.0, 0.01), (0.49, 0.5)]:
        taps = dsp.build_filter(SincParams.from_cutoffs(*fc), HAMMING)
        d1, d2 = dsp.filter_grad(SincParams.from_cutoffs(*fc), HAMMING)
        assert np.all(np.isfinite(taps)) and np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))


# --- gradients ------------------------------------------------------------

def fd_grads(f1, f2, spec, h=1e-6):
    def taps(a, b):
        return dsp.bank_taps(a, b, spec.length, spec.window)[0]
    d1 = (taps(f1 + h, f2) - taps(f1 - h, f2)) / (2 * h)
    d2 = (taps(f1, f2 + h) - taps(f1, f2 - h)) / (2 * h)
    return d1, d2


def rel_err(a, b, floor=1e-8):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor))


def test_grad_center_tap():
    spec = HAMMING
    d1, d2 = dsp.filter_grad(SincParams.from_cutoffs(0.13, 0.37), spec)
    assert d2[spec.center] == 2.0
    assert d1[spec.center] == -2.0


def test_grad_at_zero_low_cutoff():
    spec = HAMMING
    d1, _ = dsp.filter_grad(SincParams.from_cutoffs(0.0, 0.2), spec)
    np.testing.assert_array_equal(d1, -2.0 * dsp.window_values(spec.window, spec.length))


def test_grad_matches_finite_differences_100_configs():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        f1, f2 = np.sort(rng.uniform(0.001, 0.499, 2))
        spec = FilterSpec(int(rng.choice([17, 101, 251])), list(Window)[rng.integers(4)])
        a1, a2 = dsp.filter_grad(SincParams.from_cutoffs(f1, f2), spec)
        n1, n2 = fd_grads(f1, f2, spec)
        # absolute floor: taps are O(1); FD noise on near-zero entries is ~1e-10
        worst = max(worst, rel_err(a1, n1, floor=1e-3), rel_err(a2, n2, floor=1e-3))
        assert np.array_equal(a1, a1[::-1]) and np.array_equal(a2, a2[::-1])
    assert worst < 1e-5


# --- responses ------------------------------------------------------------

@pytest.mark.parametrize("f, expected", [(0.15, 1.0), (0.3, 0.0), (0.1, 0.0), (0.2, 1.0)])
def test_ideal_response_band(f, expected):
    assert dsp.ideal_response(SincParams.from_cutoffs(0.1, 0.2), f) == expected


def test_ideal_response_full_band_and_domain():
    assert dsp.ideal_response(SincParams.from_cutoffs(0.0, 0.5), 0.25) == 1.0
    with pytest.raises(DomainError):
        dsp.ideal_response(SincParams.from_cutoffs(0.1, 0.2), 0.6)


def test_realized_response_identity_flat():
    taps = dsp.build_filter(SincParams.from_cutoffs(0.0, 0.5), RECT)
    curve = dsp.realized_response(taps, 1024)
    np.testing.assert_allclose(curve.magnitude, 1.0, atol=1e-12)
    assert curve.freqs_hz[0] == 0.0 and curve.freqs_hz[-1] == 0.5


def test_realized_response_zero_and_errors():
    curve = dsp.realized_response(np.zeros(17), 64)
    assert np.all(curve.magnitude == 0.0)
    with pytest.raises(DomainError):
        dsp.realized_response([], 64)
    with pytest.raises(DomainError):
        dsp.realized_response(np.zeros(17), 33)


def test_realized_response_matches_direct_dtft(rng):
    taps = rng.normal(size=31)
    curve = dsp.realized_response(taps, 500)
    np.testing.assert_allclose(curve.magnitude, dtft_magnitude(taps, curve.freqs_hz), atol=1e-11)


def test_realized_response_stopband():
    taps = dsp.build_filter(SincParams.from_cutoffs(0.1, 0.2), HAMMING)
    curve = dsp.realized_response(taps, 4096)
    f, m = curve.freqs_hz, curve.magnitude
    stop = m[(f <= 0.08) | (f >= 0.22)].max()
    passband = m[(f >= 0.12) & (f <= 0.18)].mean()
    assert 20 * np.log10(passband / stop) >= 30.0


def test_response_approaches_ideal_with_length():
    params = SincParams.from_cutoffs(0.11, 0.33)
    grid = 4096

    def deviation(length):
        taps = dsp.build_filter(params, FilterSpec(length, Window.HAMMING))
        curve = dsp.realized_response(taps, grid)
        return np.mean(np.abs(curve.magnitude - dsp.ideal_response(params, curve.freqs_hz)))

    assert deviation(1001) < deviation(101)


def test_curve_csv_roundtrip(tmp_path):
    curve = dsp.realized_response(dsp.build_filter(SincParams.from_cutoffs(0.1, 0.2), HAMMING), 600, 16000)
    path = tmp_path / "c.csv"
    curve.to_csv(path)
    assert path.read_text().splitlines()[0] == "freq_hz,magnitude"
    back = dsp.ResponseCurve.from_csv(path)
    np.testing.assert_array_equal(back.magnitude, curve.magnitude)
    np.testing.assert_array_equal(back.freqs_hz, curve.freqs_hz)


# --- initialization -------------------------------------------------------

def test_mel_formula():
    assert dsp.hz_to_mel(700.0) == pytest.approx(2595 * math.log10(2), abs=1e-9)
    assert dsp.hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)
    np.testing.assert_allclose(dsp.mel_to_hz(dsp.hz_to_mel([30.0, 1000.0, 8000.0])), [30.0, 1000.0, 8000.0])


def test_mel_init_single_filter():
    (p,) = dsp.mel_init(1, FilterSpec(sample_rate=16000), 30.0)
    assert p.f1 == pytest.approx(0.001875, abs=1e-15)
    assert p.f2 == pytest.approx(0.5, abs=1e-15)


def test_mel_init_more_filters_low():
    params = dsp.mel_init(40, FilterSpec(sample_rate=16000))
    f1 = np.array([p.f1 for p in params]) * 16000
    f2 = np.array([p.f2 for p in params]) * 16000
    assert np.all(np.diff(f1) > 0) and np.all(np.diff(f2) > 0)
    assert np.sum(f2 <= 4000) > np.sum(f1 >= 4000)


def test_mel_init_edges_are_shared():
    params = dsp.mel_init(10, FilterSpec(sample_rate=16000), 30.0)
    for a, b in zip(params, params[2:]):
        assert b.f1 == pytest.approx(a.f2, abs=1e-15)


@pytest.mark.parametrize("args", [(0, 30.0), (4, 0.0), (4, 8000.0)])
def test_mel_init_errors(args):
    with pytest.raises(ConfigError):
        dsp.mel_init(args[0], FilterSpec(sample_rate=16000), args[1])


def test_random_init_deterministic_and_in_range():
    band_min = 50.0 / 16000.0
    a = dsp.random_init(10_000, seed=3, band_min=band_min)
    assert a == dsp.random_init(10_000, seed=3, band_min=band_min)
    assert a != dsp.random_init(10_000, seed=4, band_min=band_min)
    f1 = np.array([p.f1 for p in a])
    f2 = np.array([p.f2 for p in a])
    band = np.array([p.band for p in a])
    assert np.all((0 <= f1) & (f1 <= f2) & (f2 <= 0.5))
    assert np.all(band >= band_min)


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(1e-4, 0.1))
def test_projection_invariants(f1, band, band_min):
    p = dsp.project(SincParams(f1, band), band_min)
    assert 0.0 <= p.f1 <= p.f2 <= 0.5
    assert p.band >= band_min
    assert p.f1 + p.band <= 0.5 + 1e-15
    p.validate()


# --- bank -----------------------------------------------------------------

def test_filter_bank_counts_and_caches():
    spec = FilterSpec(101)
    bank = FilterBank.build(dsp.mel_init(80, FilterSpec(101, sample_rate=16000)), spec)
    assert bank.num_params == 160
    assert bank.taps.shape == bank.dtaps_df1.shape == bank.dtaps_df2.shape == (80, 101)
    assert np.array_equal(bank.taps, bank.taps[:, ::-1])
    with pytest.raises(ValueError):
        bank.taps[0, 0] = 1.0
    for i in (0, 41, 79):
        np.testing.assert_array_equal(bank.taps[i], dsp.build_filter(bank.params[i], spec))


def test_filter_bank_json_roundtrip():
    spec = FilterSpec(51, Window.HANN, 8000)
    bank = FilterBank.build(dsp.mel_init(6, spec), spec)
    doc = json.loads(json.dumps(bank.to_json()))
    assert set(doc) == {"sample_rate", "L", "window", "filters"}
    assert set(doc["filters"][0]) == {"f1_hz", "band_hz"}
    back = FilterBank.from_json(doc)
    np.testing.assert_allclose(back.taps, bank.taps, atol=1e-14)
    assert back.spec == spec
