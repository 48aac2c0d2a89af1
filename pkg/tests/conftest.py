import numpy as np
import pytest


def dtft_magnitude(taps, freqs):
    """Direct O(L * grid) DTFT sum, independent of any FFT routine."""
    k = np.arange(len(taps))
    return np.abs(np.exp(-2j * np.pi * np.outer(freqs, k)) @ np.asarray(taps))


def naive_convolve(x, taps):
    L = len(taps)
    out = np.zeros(len(x) - L + 1)
    for n in range(len(out)):
        acc = 0.0
        for l in range(L):
            acc += x[n + l] * taps[L - 1 - l]
        out[n] = acc
    return out


_ACCEPTANCE: list[str] = []


def record(name: str, ok: bool, detail: str) -> None:
    """Collect one acceptance line; printed after the run by the hook below."""
    _ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
