"""Core signal operations: analytic signal, single-sideband shifting,
interpolated-DFT frequency estimation and FFT-based circular convolution.

All functions are pure; arrays passed in are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import windows

from .errors import NoPeak

# Relative amplitude below which the instantaneous phase is reported invalid.
PHASE_EPS = 1e-9


@dataclass(frozen=True)
class SampleWindow:
    """Uniformly sampled real signal segment."""

    samples: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("a SampleWindow needs a 1-D array of at least 2 samples")
        if not self.fs > 0:
            raise ValueError("sample rate must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.fs

    def replace(self, samples) -> "SampleWindow":
        return SampleWindow(samples, self.fs, self.t0)


@dataclass(frozen=True)
class AnalyticTrack:
    """Instantaneous amplitude (peak units) and unwrapped phase (radians).

    ``phase`` follows the analytic-signal convention, i.e. the underlying
    real component is ``amplitude * cos(phase)``. Samples whose amplitude is
    below ``PHASE_EPS`` times the window maximum carry ``valid == False`` and a
    NaN phase.
    """

    amplitude: np.ndarray
    phase: np.ndarray
    fs: float
    t0: float = 0.0
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.valid is None:
            object.__setattr__(self, "valid", np.isfinite(self.phase))

    def __len__(self) -> int:
        return self.amplitude.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.amplitude.size) / self.fs

    @property
    def complex(self) -> np.ndarray:
        """Complex analytic samples; zero where the phase is invalid."""
        z = self.amplitude * np.exp(1j * np.where(self.valid, self.phase, 0.0))
        return np.where(self.valid, z, 0.0)

    @classmethod
    def from_complex(cls, z: np.ndarray, fs: float, t0: float = 0.0) -> "AnalyticTrack":
        z = np.asarray(z, dtype=complex)
        amp = np.abs(z)
        peak = amp.max() if amp.size else 0.0
        valid = amp > PHASE_EPS * peak if peak > 0 else np.zeros(amp.size, bool)
        phase = np.full(amp.size, np.nan)
        if valid.any():
            ph = np.angle(z)
            # unwrap across invalid gaps by carrying the last valid value
            idx = np.flatnonzero(valid)
            phase[idx] = np.unwrap(ph[idx])
        return cls(amp, phase, fs, t0, valid)


def analytic_signal(x: np.ndarray) -> np.ndarray:
    """Analytic signal of a real sequence under periodic extension.

    Negative-frequency bins are zeroed, positive ones doubled, DC and the
    Nyquist bin (even lengths) kept unchanged.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    return np.fft.ifft(np.fft.fft(x) * _analytic_weights(n))


def analytic_spectrum(x: np.ndarray) -> np.ndarray:
    """Full-length DFT of the analytic signal of ``x``."""
    x = np.asarray(x, dtype=float)
    return np.fft.fft(x) * _analytic_weights(x.size)


def _analytic_weights(n: int) -> np.ndarray:
    w = np.zeros(n)
    w[0] = 1.0
    if n % 2 == 0:
        w[1 : n // 2] = 2.0
        w[n // 2] = 1.0
    else:
        w[1 : (n + 1) // 2] = 2.0
    return w


def hilbert_analytic(x: SampleWindow) -> AnalyticTrack:
    """Instantaneous amplitude and phase of ``x`` via its analytic signal."""
    if len(x) < 8:
        raise ValueError("hilbert_analytic needs at least 8 samples")
    return AnalyticTrack.from_complex(analytic_signal(x.samples), x.fs, x.t0)


def ssm_shift(x: SampleWindow, f_shift: float, content: tuple[float, float] | None = None) -> SampleWindow:
    """Translate every spectral line of ``x`` by ``f_shift`` Hz.

    Realized as ``Re(analytic(x) * exp(j 2 pi f_shift t))`` with ``t`` measured
    from the first sample. ``content`` optionally declares the occupied band
    ``(f_lo, f_hi)`` of ``x``; shifts that push it across 0 Hz or Nyquist are
    rejected.
    """
    nyq = x.fs / 2
    if abs(f_shift) >= nyq:
        raise ValueError(f"shift of {f_shift} Hz exceeds Nyquist ({nyq} Hz)")
    if content is not None:
        lo, hi = content
        if lo + f_shift <= 0 or hi + f_shift >= nyq:
            raise ValueError(
                f"shift of {f_shift:+g} Hz moves content [{lo:g}, {hi:g}] Hz outside (0, {nyq:g}) Hz"
            )
    t = np.arange(len(x)) / x.fs
    z = analytic_signal(x.samples) * np.exp(2j * np.pi * f_shift * t)
    return x.replace(z.real)


def ipdft_estimate(x: SampleWindow, f_lo: float, f_hi: float, margin_db: float = 10.0) -> float:
    """Hann-window two-point interpolated-DFT frequency of the line in [f_lo, f_hi].

    Raises ``NoPeak`` when no bin in range exceeds the median spectral magnitude
    by ``margin_db``.
    """
    n = len(x)
    spec = np.abs(np.fft.rfft(x.samples * windows.hann(n, sym=False)))
    df = x.fs / n
    k_lo = max(int(np.ceil(f_lo / df)), 1)
    k_hi = min(int(np.floor(f_hi / df)), spec.size - 2)
    if k_hi < k_lo:
        raise NoPeak(f"range [{f_lo}, {f_hi}] Hz holds no DFT bin")
    floor = np.median(spec[1:])
    k = k_lo + int(np.argmax(spec[k_lo : k_hi + 1]))
    peak = spec[k]
    if peak <= 0 or peak < floor * 10 ** (margin_db / 20):
        raise NoPeak(f"no line above the noise floor in [{f_lo}, {f_hi}] Hz")
    if spec[k + 1] >= spec[k - 1]:
        alpha = spec[k + 1] / peak
        sign = 1.0
    else:
        alpha = spec[k - 1] / peak
        sign = -1.0
    delta = (2 * alpha - 1) / (alpha + 1)
    return (k + sign * delta) * df


def circular_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Circular convolution of ``x`` with ``h``; taps beyond len(x) wrap around."""
    x = np.asarray(x, dtype=float)
    n = x.size
    folded = np.zeros(n)
    np.add.at(folded, np.arange(len(h)) % n, h)
    return np.fft.irfft(np.fft.rfft(x) * np.fft.rfft(folded), n)


def freq_response(h: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Complex response sum_n h[n] exp(-j omega n) at arbitrary radian frequencies."""
    h = np.asarray(h, dtype=float)
    omega = np.asarray(omega, dtype=float)
    # Horner in exp(-j omega) keeps memory linear in len(omega)
    zinv = np.exp(-1j * omega)
    acc = np.zeros(omega.shape, dtype=complex)
    for c in h[::-1]:
        acc = acc * zinv + c
    return acc
