import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sincfront import conv, dsp
from sincfront.conv import SignalChunk
from sincfront.errors import ConfigError, PreconditionError, ShapeError

from conftest import naive_convolve


def test_frame_default_chunking():
    chunks = conv.frame_signal(np.zeros(16000), 16000, 200, 10, label=3, source_id="u1")
    assert [c.start for c in chunks] == [0, 3040, 6080, 9120, 12160]
    assert all(len(c) == 3200 and c.label == 3 and c.source_id == "u1" for c in chunks)


def test_frame_exact_and_short():
    assert len(conv.frame_signal(np.zeros(3200), 16000, 200, 10)) == 1
    assert conv.frame_signal(np.zeros(3199), 16000, 200, 10) == []


@given(st.integers(3200, 40000))
def test_frame_disjoint_tiling(n):
    chunks = conv.frame_signal(np.arange(n, dtype=float), 16000, 200, 0)
    assert len(chunks) == n // 3200
    for c in chunks:
        np.testing.assert_array_equal(c.samples, np.arange(c.start, c.start + 3200))


@given(st.integers(4000, 30000), st.integers(0, 150))
def test_frame_starts_arithmetic(n, overlap_ms):
    chunks = conv.frame_signal(np.zeros(n), 8000, 200, overlap_ms)
    starts = np.array([c.start for c in chunks])
    hop = 1600 - 8 * overlap_ms
    np.testing.assert_array_equal(starts, hop * np.arange(len(starts)))
    assert starts[-1] + 1600 <= n < starts[-1] + hop + 1600


@pytest.mark.parametrize("chunk_ms, overlap_ms", [(10, 10), (10, 20), (10, -1)])
def test_frame_bad_hop(chunk_ms, overlap_ms):
    with pytest.raises(ConfigError):
        conv.frame_signal(np.zeros(1000), 16000, chunk_ms, overlap_ms)


def test_convolve_impulse_sifts_taps(rng):
    # y[n] = sum_l x[n+l] h[L-1-l] with x = delta at L-1 picks out h[n]
    taps = rng.normal(size=17)
    x = np.zeros(2 * 17 - 1)
    x[16] = 1.0
    np.testing.assert_array_equal(conv.convolve_valid(x, taps), taps)
    sym = dsp.build_filter(dsp.SincParams.from_cutoffs(0.1, 0.3), dsp.FilterSpec(17))
    np.testing.assert_array_equal(conv.convolve_valid(x, sym), sym)


def test_convolve_zeros_and_shape_error():
    assert np.all(conv.convolve_valid(np.zeros(100), np.ones(11)) == 0.0)
    with pytest.raises(ShapeError):
        conv.convolve_valid(np.zeros(5), np.ones(11))
    with pytest.raises(ShapeError):
        conv.convolve_symmetric(np.zeros(5), np.ones(11))


def test_convolve_matches_naive(rng):
    x = rng.normal(size=300)
    taps = rng.normal(size=41)
    np.testing.assert_allclose(conv.convolve_valid(SignalChunk(x, 16000), taps), naive_convolve(x, taps),
                               atol=1e-12, rtol=0)
    bank = rng.normal(size=(3, 41))
    out = conv.convolve_bank(x, bank)
    for i in range(3):
        np.testing.assert_allclose(out[i], naive_convolve(x, bank[i]), atol=1e-12, rtol=0)


def test_convolve_linearity(rng):
    x1, x2, taps = rng.normal(size=500), rng.normal(size=500), rng.normal(size=51)
    a, b = 1.7, -0.3
    lhs = conv.convolve_valid(a * x1 + b * x2, taps)
    rhs = a * conv.convolve_valid(x1, taps) + b * conv.convolve_valid(x2, taps)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10, rtol=0)


def random_symmetric(rng, length):
    half = rng.normal(size=length // 2 + 1)
    return np.concatenate([half, half[-2::-1]]) if length % 2 else np.concatenate([half[:-1], half[-2::-1]])


def test_symmetric_fast_path_equivalence_1000(rng):
    worst = 0.0
    for _ in range(1000):
        length = int(rng.integers(1, 40)) * 2 + 1
        taps = random_symmetric(rng, length)
        x = rng.normal(size=int(rng.integers(length, length + 200)))
        worst = max(worst, np.max(np.abs(conv.convolve_symmetric(x, taps) - conv.convolve_valid(x, taps))))
    assert worst <= 1e-12


def test_symmetric_fast_path_even_length(rng):
    taps = random_symmetric(rng, 20)
    x = rng.normal(size=100)
    np.testing.assert_allclose(conv.convolve_symmetric(x, taps), conv.convolve_valid(x, taps), atol=1e-12)


def test_symmetric_mult_count():
    taps = dsp.build_filter(dsp.SincParams.from_cutoffs(0.1, 0.2), dsp.FilterSpec(251))
    x = np.random.default_rng(0).normal(size=1000 + 250)
    _, count = conv.convolve_symmetric(x, taps, return_count=True)
    naive = conv.naive_mult_count(x.size, 251)
    assert count == 126_000 and naive == 251_000
    assert count / naive <= 0.502


@pytest.mark.parametrize("length", [101, 151, 251, 1001])
def test_symmetric_saving_bound(length):
    x = np.zeros(length + 99)
    _, count = conv.convolve_symmetric(x, np.ones(length), return_count=True)
    assert count <= 0.51 * conv.naive_mult_count(x.size, length)


def test_symmetric_identity_passes_centre(rng):
    spec = dsp.FilterSpec(51, dsp.Window.RECTANGULAR)
    taps = dsp.build_filter(dsp.SincParams.from_cutoffs(0.0, 0.5), spec)
    x = rng.normal(size=400)
    np.testing.assert_allclose(conv.convolve_symmetric(x, taps), x[25:-25], atol=1e-12)


def test_symmetric_rejects_asymmetric(rng):
    with pytest.raises(PreconditionError):
        conv.convolve_symmetric(rng.normal(size=100), rng.normal(size=11))


def test_layer_norm_examples(rng):
    assert np.all(conv.layer_norm(np.full(10, 3.3)) == 0.0)
    np.testing.assert_allclose(conv.layer_norm([1.0, -1.0], epsilon=0.0), [1.0, -1.0])
    v = rng.normal(3.0, 2.0, size=1000)
    out = conv.layer_norm(v, gain=1.5, bias=0.0, epsilon=1e-6)
    assert abs(out.mean()) < 1e-10
    assert abs(out.std() - 1.5) < 1e-6
    out = conv.layer_norm(v, gain=0.7, bias=2.0)
    assert out.mean() == pytest.approx(2.0, abs=1e-10)


def test_layer_norm_rows(rng):
    v = rng.normal(size=(4, 50))
    out = conv.layer_norm(v)
    for i in range(4):
        np.testing.assert_allclose(out[i], conv.layer_norm(v[i]))


def test_feature_map_csv(tmp_path):
    path = tmp_path / "fm.csv"
    conv.write_feature_map_csv(np.arange(6.0).reshape(2, 3), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "filter_index,time_index,value"
    assert lines[1:3] == ["0,0,0.0", "0,1,1.0"] and lines[-1] == "1,2,5.0"


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 12), st.integers(0, 20), st.integers(0, 2**31))
def test_batched_fft_convolution_matches_loops(B, F, L, extra, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(B, L + extra))
    taps = rng.normal(size=(F, L))
    Y = conv.convolve_bank_batch(X, taps)
    assert Y.shape == (B, F, extra + 1)
    for b in range(B):
        for f in range(F):
            np.testing.assert_allclose(Y[b, f], naive_convolve(X[b], taps[f]), atol=1e-10)
    # gradient of sum(dY * Y) with respect to the flipped taps
    dY = rng.normal(size=Y.shape)
    C = conv.correlate_bank_batch(X, dY, L)
    expect = np.zeros((F, L))
    for b in range(B):
        for f in range(F):
            for l in range(L):
                expect[f, l] = expect[f, l] + sum(dY[b, f, n] * X[b, n + l] for n in range(extra + 1))
    np.testing.assert_allclose(C, expect, atol=1e-10)


def test_batched_convolution_rejects_short_input():
    with pytest.raises(ShapeError):
        conv.convolve_bank_batch(np.zeros((1, 4)), np.zeros((1, 5)))
