"""Analytic signal, single-sideband shift, interpolated DFT, circular convolution."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.signal import hilbert

from pqwave.dsp import (
    SampleWindow,
    analytic_signal,
    circular_convolve,
    freq_response,
    hilbert_analytic,
    ipdft_estimate,
    ssm_shift,
)
from pqwave.errors import NoPeak

FS = 6400.0


def tone(f, n=2560, amp=1.0, phase=0.0, fs=FS):
    t = np.arange(n) / fs
    return amp * np.cos(2 * np.pi * f * t + phase)


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_unit_tone_envelope_is_flat():
    tr = hilbert_analytic(SampleWindow(tone(50.0), FS))
    interior = tr.amplitude[256:-256]
    assert np.max(np.abs(interior - 1.0)) < 1e-6


def test_beat_envelope_stays_in_band():
    x = tone(50.0) + 0.05 * tone(60.0)
    amp = hilbert_analytic(SampleWindow(x, FS)).amplitude
    assert amp.min() >= 0.95 - 1e-9 and amp.max() <= 1.05 + 1e-9


def test_zero_input_has_no_valid_phase():
    tr = hilbert_analytic(SampleWindow(np.zeros(64), FS))
    assert np.all(tr.amplitude == 0)
    assert not tr.valid.any()


def test_phase_follows_cosine_convention():
    tr = hilbert_analytic(SampleWindow(tone(50.0, phase=0.3), FS))
    t = np.arange(2560) / FS
    expect = np.angle(np.exp(1j * (2 * np.pi * 50 * t + 0.3)))
    got = np.angle(np.exp(1j * tr.phase))
    assert np.max(np.abs(np.angle(np.exp(1j * (got - expect))))) < 1e-9


def test_too_short_window_rejected():
    with pytest.raises(ValueError):
        hilbert_analytic(SampleWindow(np.ones(4), FS))


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(8, 300), elements=finite))
def test_analytic_matches_scipy_and_keeps_real_part(x):
    z = analytic_signal(x)
    assert np.allclose(z, hilbert(x), atol=1e-9 * (1 + np.abs(x).max()))
    assert np.allclose(z.real, x, atol=1e-9 * (1 + np.abs(x).max()))


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(8, 300), elements=finite))
def test_parseval_of_zero_mean_signal(x):
    # for a real signal without DC or Nyquist content the analytic energy is twice the real energy
    X = np.fft.fft(x)
    X[0] = 0
    if x.size % 2 == 0:
        X[x.size // 2] = 0
    y = np.fft.ifft(X).real
    e = np.sum(y**2)
    z = analytic_signal(y)
    assert abs(np.sum(np.abs(z) ** 2) - 2 * e) <= 1e-6 * max(e, 1.0)


def test_ssm_moves_a_line():
    # 54 Hz -> 75 Hz on the 1 Hz bin grid of a 1 s window
    y = ssm_shift(SampleWindow(tone(54.0, n=6400), FS), 21.0)
    assert np.max(np.abs(y.samples - tone(75.0, n=6400))) < 1e-9


def test_ssm_two_tones_keep_their_amplitudes():
    x = tone(50.0, n=6400) + 0.1 * tone(56.0, n=6400)
    y = ssm_shift(SampleWindow(x, FS), 22.0).samples
    spec = np.abs(np.fft.rfft(y)) * 2 / y.size
    df = FS / y.size
    assert abs(spec[int(round(72 / df))] - 1.0) < 1e-3
    assert abs(spec[int(round(78 / df))] - 0.1) < 1e-4


@settings(max_examples=40, deadline=None)
@given(st.floats(-300, 300), st.floats(60, 2000), st.floats(0, 2 * np.pi))
def test_ssm_round_trip(shift, f, ph):
    df = FS / 2560
    f = round(f / df) * df
    shift = round(shift / df) * df
    assume(0 < f + shift < FS / 2)
    x = SampleWindow(tone(f, phase=ph), FS)
    back = ssm_shift(ssm_shift(x, shift), -shift)
    assert np.max(np.abs(back.samples - x.samples)) < 1e-3


def test_ssm_rejects_moves_across_zero():
    with pytest.raises(ValueError):
        ssm_shift(SampleWindow(tone(50.0), FS), -60.0, content=(40.0, 60.0))
    with pytest.raises(ValueError):
        ssm_shift(SampleWindow(tone(50.0), FS), FS)


def test_ipdft_on_bin():
    f = ipdft_estimate(SampleWindow(tone(50.0), FS), 40, 60)
    assert abs(f - 50.0) < 1e-9


def test_ipdft_off_bin():
    f = ipdft_estimate(SampleWindow(tone(50.1), FS), 40, 60)
    assert abs(f - 50.1) < 0.01


def test_ipdft_noisy_interharmonic_over_seeds():
    errs = []
    for seed in range(100):
        r = np.random.default_rng(seed)
        x = tone(50.1, amp=220) + tone(58.0, amp=11, phase=1.1) + r.normal(0, 1.5, 2560)
        errs.append(ipdft_estimate(SampleWindow(x, FS), 55, 61.5) - 58.0)
    assert np.max(np.abs(errs)) < 0.05


def test_ipdft_tracks_frequency_monotonically():
    fs = [ipdft_estimate(SampleWindow(tone(f), FS), 40, 60) for f in np.linspace(49.0, 51.0, 21)]
    assert np.all(np.diff(fs) > 0)


def test_ipdft_no_peak():
    with pytest.raises(NoPeak):
        ipdft_estimate(SampleWindow(np.zeros(2560), FS), 40, 60)


@settings(max_examples=40, deadline=None)
@given(arrays(float, st.integers(4, 80), elements=finite), arrays(float, st.integers(1, 120), elements=finite))
def test_circular_convolution_matches_direct_sum(x, h):
    n = x.size
    direct = np.zeros(n)
    for k, hk in enumerate(h):
        direct += hk * np.roll(x, k)
    got = circular_convolve(x, h)
    assert np.allclose(got, direct, atol=1e-8 * (1 + np.abs(x).sum() * np.abs(h).sum()))


def test_freq_response_matches_fft():
    h = np.random.default_rng(3).normal(size=17)
    w = 2 * np.pi * np.arange(64) / 64
    assert np.allclose(freq_response(h, w), np.fft.fft(h, 64), atol=1e-12)
