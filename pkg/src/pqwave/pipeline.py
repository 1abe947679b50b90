"""Two-stage decomposition of voltage/current records into component tracks.

Stage 1 finds interharmonics, moves each one (with its nearest harmonic)
so that the two straddle a boundary of the narrow-transition tree, pulls the
interharmonic out of its leaf and subtracts it. Stage 2 reads every harmonic
of the residual from a uniform 50 Hz tree built from a conventional
Daubechies pair, after shifting that harmonic to the centre of the lowest
band.

Each 0.4 s analysis window is processed inside a longer segment that carries
real neighbouring samples on both sides (``context_s``), so that the long
upsampled filters of the deep tree see genuine signal rather than wrapped
window edges. Only the central half of every window is kept.

Both stages are realized on the one-sided DFT of the segment: shifting by an
integer number of bins, filtering by a leaf and shifting back collapses to a
multiplication by the leaf's shifted magnitude response
(see :func:`pqwave.uwpt.mask_extract`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import windows

from .dsp import AnalyticTrack, SampleWindow, analytic_spectrum, ipdft_estimate
from .errors import ExtractionLeakage, NoPeak
from .filters import FilterPair, builtin_pair
from .uwpt import mask_extract

NOMINAL_F1 = 50.0


@dataclass(frozen=True)
class DecompositionPlan:
    fs: float
    M: int
    stage1_levels: int
    stage2_levels: int
    stage2_shift: float = 25.0
    window_s: float = 0.4
    hop_s: float = 0.2
    context_s: float = 0.6
    max_harmonic: int = 25
    detect_margin_db: float = 20.0
    min_relative: float = 0.002  # interharmonic floor relative to the fundamental
    guard_hz: float = 5.0
    stage1_passes: int = 3
    stage2_passes: int = 1
    presence_floor: float = 1e-6  # harmonic tracks below this fraction of the fundamental are dropped

    @classmethod
    def for_fs(cls, fs: float, **kw) -> "DecompositionPlan":
        ratio = fs / NOMINAL_F1
        M = int(round(math.log2(ratio))) if ratio >= 2 else 0
        if M < 2 or not math.isclose(2**M, ratio, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"sample rate {fs} Hz is not 50 * 2**M; use e.g. 1600, 3200 or 6400 Hz")
        return cls(fs, M, M, M - 1, **kw)

    @property
    def window_len(self) -> int:
        return int(round(self.window_s * self.fs))

    @property
    def hop_len(self) -> int:
        return int(round(self.hop_s * self.fs))

    @property
    def context_len(self) -> int:
        return int(round(self.context_s * self.fs))

    @property
    def stage1_band(self) -> float:
        return self.fs / 2 ** (self.stage1_levels + 1)

    def harmonic_limit(self, f1: float) -> int:
        top = self.fs / 2 - 2 * self.stage2_shift
        return max(1, min(self.max_harmonic, int(top // f1)))

    def interharmonic_search_bands(self, f1: float) -> list:
        """Regions between harmonics, ``guard_hz`` clear of each harmonic."""
        out = []
        for h in range(0, self.harmonic_limit(f1)):
            lo, hi = h * f1 + self.guard_hz, (h + 1) * f1 - self.guard_hz
            if h == 0:
                lo = max(lo, self.stage1_band / 2)
            if hi > lo:
                out.append((lo, hi))
        return out


@dataclass(frozen=True)
class ComponentTrack:
    kind: str  # "fundamental" | "harmonic" | "interharmonic"
    f_nominal: float
    analytic: AnalyticTrack
    source_stage: int
    order: int | None = None

    @property
    def key(self):
        if self.kind == "interharmonic":
            return ("ih", round(self.f_nominal, 1))
        return ("h", self.order)

    @property
    def z(self) -> np.ndarray:
        return self.analytic.complex


def nearest_harmonic(f_i: float, f1: float) -> float:
    """Integer multiple of ``f1`` closest to ``f_i``; exact ties go to the lower one."""
    if f_i <= 0 or f1 <= 0:
        raise ValueError("frequencies must be positive")
    ratio = f_i / f1
    k = math.floor(ratio)
    if ratio - k > 0.5:
        k += 1
    return max(k, 1) * f1


def compute_fssm(f_i: float, f_h: float, half_band: float = 25.0) -> float:
    """Shift placing the midpoint of ``f_h`` and ``f_i`` on a stage-1 band boundary."""
    if f_i == f_h:
        raise ValueError("interharmonic coincides with the harmonic")
    mid = (f_h + f_i) / 2
    if f_h < f_i:
        return (f_h + half_band) - mid
    return (f_h - half_band) - mid


def _bh_spectrum(x):
    w = windows.blackmanharris(x.size, sym=False)
    return 2 * np.abs(np.fft.rfft(x * w)) / w.sum()


def estimate_f1(x: SampleWindow) -> float:
    try:
        return ipdft_estimate(x, NOMINAL_F1 - 5, NOMINAL_F1 + 5, margin_db=0.0)
    except NoPeak:
        return NOMINAL_F1


def detect_interharmonics(seg: SampleWindow, f1: float, plan: DecompositionPlan) -> list:
    """(frequency, amplitude) of lines between the harmonics of ``f1``."""
    amp = _bh_spectrum(seg.samples)
    df = seg.fs / len(seg)
    k1 = int(round(f1 / df))
    fund = amp[max(k1 - 3, 0) : k1 + 4].max()
    margin = 10 ** (plan.detect_margin_db / 20)
    found = []
    for lo, hi in plan.interharmonic_search_bands(f1):
        a, b = int(math.ceil(lo / df)), int(math.floor(hi / df))
        if b - a < 3:
            continue
        region = amp[a : b + 1]
        floor = np.median(region)
        thresh = max(margin * floor, plan.min_relative * fund)
        for i in range(1, region.size - 1):
            if region[i] >= thresh and region[i] > region[i - 1] and region[i] >= region[i + 1]:
                k = a + i
                try:
                    f = ipdft_estimate(seg, (k - 2) * df, (k + 2) * df, margin_db=0.0)
                except NoPeak:
                    continue
                if lo <= f <= hi:
                    found.append((f, float(region[i])))
    return found


def _line_amplitude(x: np.ndarray, f: float, fs: float) -> float:
    w = windows.blackmanharris(x.size, sym=False)
    n = np.arange(x.size)
    return float(2 * abs(np.sum(w * x * np.exp(-2j * np.pi * f * n / fs))) / w.sum())


def stage1_remove_interharmonics(x: SampleWindow, plan: DecompositionPlan, pair: FilterPair | None = None,
                                 f1: float | None = None, lines=None):
    """Detect, extract and subtract every interharmonic of a segment.

    ``lines`` optionally supplies the ``(frequency, amplitude)`` detections
    (e.g. made on a different stretch of the record). Returns
    ``(residual, tracks)``; the tracks span the whole segment.
    """
    pair = pair or builtin_pair("paper")
    if f1 is None:
        f1 = estimate_f1(x)
    spec = analytic_spectrum(x.samples)
    n = len(x)
    df = x.fs / n
    tracks = []
    if lines is None:
        lines = detect_interharmonics(x, f1, plan)
    lines = sorted(lines, key=lambda t: -t[1])
    for f_i, _ in lines:
        f_h = nearest_harmonic(f_i, f1)
        shift_bins = int(round(compute_fssm(f_i, f_h, plan.stage1_band) / df))
        part = mask_extract(spec, pair, plan.stage1_levels, x.fs, f_i, shift_bins, plan.stage1_passes)
        spec = spec - part
        z = np.fft.ifft(part)
        tracks.append(ComponentTrack("interharmonic", f_i, AnalyticTrack.from_complex(z, x.fs, x.t0), 1))
    residual = x.replace(np.fft.ifft(spec).real)
    for tr in tracks:
        left = _line_amplitude(residual.samples, tr.f_nominal, x.fs)
        ref = _line_amplitude(tr.z.real, tr.f_nominal, x.fs)
        if ref > 0 and left > 0.05 * ref:
            warnings.warn(
                f"{left / ref:.1%} of the {tr.f_nominal:.2f} Hz line remains after subtraction",
                ExtractionLeakage,
                stacklevel=2,
            )
    return residual, tracks


def stage2_extract_harmonics(residual: SampleWindow, plan: DecompositionPlan, conv_pair: FilterPair | None = None,
                             f1: float | None = None, keep: slice | None = None) -> list:
    """Fundamental and harmonic tracks read from the uniform conventional-pair tree.

    Each harmonic ``h * f1`` is shifted to ``plan.stage2_shift`` Hz, the
    centre of the all-low-pass leaf ``[0, 2 * stage2_shift]``, and read from
    that leaf. Both edges of that leaf are finest-level boundaries, so
    neighbouring lines are rejected by the sharpest filters of the tree.
    Harmonics weaker than ``plan.presence_floor`` times the fundamental
    over ``keep`` (default: the whole segment) yield no track.
    """
    conv_pair = conv_pair or builtin_pair("db40")
    if not np.any(residual.samples):
        return []
    if f1 is None:
        f1 = estimate_f1(residual)
    spec = analytic_spectrum(residual.samples)
    df = residual.fs / len(residual)
    tracks = []
    fund_peak = 0.0
    for h in range(1, plan.harmonic_limit(f1) + 1):
        shift_bins = int(round((plan.stage2_shift - h * f1) / df))
        part = mask_extract(spec, conv_pair, plan.stage2_levels, residual.fs, h * f1, shift_bins, plan.stage2_passes)
        z = np.fft.ifft(part)
        peak = float(np.abs(z[keep if keep is not None else slice(None)]).max())
        if h == 1:
            fund_peak = peak
        elif peak <= plan.presence_floor * fund_peak:
            continue
        kind = "fundamental" if h == 1 else "harmonic"
        tracks.append(
            ComponentTrack(kind, h * NOMINAL_F1, AnalyticTrack.from_complex(z, residual.fs, residual.t0), 2, h)
        )
    return tracks


@dataclass(frozen=True)
class WindowResult:
    t0: float  # time of the first retained sample
    f1: float
    tracks: list = field(default_factory=list)


def segment_for(samples: np.ndarray, start: int, plan: DecompositionPlan) -> tuple[np.ndarray, int]:
    """Window ``[start, start+window_len)`` embedded in a longer stretch of record.

    The segment has ``context_len`` samples of record on each side. Near the
    record ends it slides inward so it keeps its full length, leaving the
    window off-centre; only a record shorter than the segment is padded (by
    even reflection). Returns the segment and the window's offset in it.
    Used for detection and frequency estimation, which want real samples.
    """
    c, w = plan.context_len, plan.window_len
    total = w + 2 * c
    n = samples.size
    if n >= total:
        lo = min(max(start - c, 0), n - total)
        return samples[lo : lo + total], start - lo
    pad_lo = (total - n) // 2
    seg = np.pad(samples, (pad_lo, total - n - pad_lo), mode="symmetric")
    return seg, start + pad_lo


def extraction_segment(samples: np.ndarray, start: int, plan: DecompositionPlan, freqs=()) -> tuple[np.ndarray, int]:
    """Window centred in ``context_len`` samples per side.

    Context missing beyond a record end is synthesized from a least-squares
    sinusoidal fit (lines at ``freqs``) to the nearest ``window_len`` real
    samples, so the circular wrap of the segment stays a full context away
    from the window and the extension continues every line smoothly.
    """
    c, w = plan.context_len, plan.window_len
    n = samples.size
    lo, hi = start - c, start + w + c
    if lo >= 0 and hi <= n:
        return samples[lo:hi], c
    fit = min(w, n)
    head = tail = np.zeros(0)
    if lo < 0:
        head = _extend(samples[:fit], np.arange(lo, 0), freqs, plan.fs)
    if hi > n:
        tail = _extend(samples[n - fit :], np.arange(fit, fit + hi - n), freqs, plan.fs)
    body = samples[max(lo, 0) : min(hi, n)]
    return np.concatenate((head, body, tail)), c


def _extend(x: np.ndarray, idx: np.ndarray, freqs, fs: float) -> np.ndarray:
    """Evaluate at sample indices ``idx`` a sum of sinusoids fitted to ``x``
    (indexed from 0); with no lines the extension is even reflection."""
    freqs = [f for f in freqs if 0 < f < fs / 2]
    if not freqs:
        return np.pad(x, (max(0, -int(idx[0])), 0), mode="symmetric")[: idx.size] if idx[0] < 0 else \
            np.pad(x, (0, idx.size), mode="symmetric")[x.size :]

    def basis(k):
        ph = 2 * np.pi * np.outer(k, freqs) / fs
        return np.hstack((np.cos(ph), np.sin(ph), np.ones((k.size, 1))))

    coef, *_ = np.linalg.lstsq(basis(np.arange(x.size)), x, rcond=None)
    return basis(idx) @ coef


def analyze_window(samples: np.ndarray, start: int, plan: DecompositionPlan, pairs=None,
                   stage1: bool = True) -> WindowResult:
    """Tracks for the retained centre of the window starting at sample ``start``."""
    stage1_pair, stage2_pair = pairs or (builtin_pair("paper"), builtin_pair("db40"))
    samples = np.asarray(samples, dtype=float)
    fs = plan.fs
    real = SampleWindow(segment_for(samples, start, plan)[0], fs)
    f1 = estimate_f1(real)
    lines = detect_interharmonics(real, f1, plan) if stage1 else []
    freqs = [h * f1 for h in range(1, plan.harmonic_limit(f1) + 1)] + [f for f, _ in lines]
    seg, off = extraction_segment(samples, start, plan, freqs)
    x = SampleWindow(seg, fs)
    if stage1:
        residual, ih = stage1_remove_interharmonics(x, plan, stage1_pair, f1, lines)
    else:
        residual, ih = x, []
    keep = slice(off + plan.window_len // 4, off + 3 * plan.window_len // 4)
    harm = stage2_extract_harmonics(residual, plan, stage2_pair, f1, keep)
    t_keep = (start + plan.window_len // 4) / fs
    out = []
    for tr in ih + harm:
        z = tr.z[keep]
        out.append(ComponentTrack(tr.kind, tr.f_nominal, AnalyticTrack.from_complex(z, fs, t_keep),
                                  tr.source_stage, tr.order))
    return WindowResult(t_keep, f1, out)


def window_starts(n_samples: int, plan: DecompositionPlan) -> list:
    if n_samples < plan.window_len:
        raise ValueError(
            f"record of {n_samples} samples is shorter than one {plan.window_s} s window"
        )
    return list(range(0, n_samples - plan.window_len + 1, plan.hop_len))


def merge_windows(results: list, plan: DecompositionPlan, ih_tol: float = 1.5) -> dict:
    """Concatenate per-window tracks into continuous tracks keyed by component.

    Interharmonics seen in different windows are merged when their
    frequencies agree within ``ih_tol`` Hz; windows lacking a component
    contribute zeros (invalid phase).
    """
    seg = plan.hop_len
    n_win = len(results)
    ih_keys: list[float] = []
    per_key: dict = {}
    meta: dict = {}
    for w, res in enumerate(results):
        for tr in res.tracks:
            if tr.kind == "interharmonic":
                match = [f for f in ih_keys if abs(f - tr.f_nominal) < ih_tol]
                if match:
                    key = ("ih", match[0])
                else:
                    ih_keys.append(tr.f_nominal)
                    key = ("ih", tr.f_nominal)
            else:
                key = ("h", tr.order)
            buf = per_key.setdefault(key, np.zeros(n_win * seg, dtype=complex))
            z = tr.z
            buf[w * seg : w * seg + min(z.size, seg)] = z[:seg]
            meta.setdefault(key, (tr.kind, tr.source_stage, tr.order, []))[3].append(tr.f_nominal)
    t0 = results[0].t0 if results else 0.0
    merged = {}
    for key, buf in per_key.items():
        kind, stage, order, freqs = meta[key]
        f_nom = float(np.median(freqs)) if kind == "interharmonic" else order * NOMINAL_F1
        merged[key] = ComponentTrack(kind, f_nom, AnalyticTrack.from_complex(buf, plan.fs, t0), stage, order)
    return merged


def analyze_stream(samples, plan: DecompositionPlan, pairs=None, stage1: bool = True) -> dict:
    """Slide 0.4 s windows by 0.2 s and merge the retained centres.

    Returns tracks keyed by ``("h", order)`` or ``("ih", frequency)``
    covering ``[window/4, len - window/4)`` of the record.
    """
    samples = np.asarray(samples, dtype=float)
    results = [analyze_window(samples, s, plan, pairs, stage1) for s in window_starts(samples.size, plan)]
    return merge_windows(results, plan)


def stream_times(n_samples: int, plan: DecompositionPlan) -> np.ndarray:
    """Time base of :func:`analyze_stream` output for a record of ``n_samples``."""
    n = len(window_starts(n_samples, plan)) * plan.hop_len
    return (plan.window_len // 4 + np.arange(n)) / plan.fs


def track_times(tracks: dict) -> np.ndarray:
    first = next(iter(tracks.values()))
    return first.analytic.times


__all__ = [
    "DecompositionPlan",
    "ComponentTrack",
    "WindowResult",
    "nearest_harmonic",
    "compute_fssm",
    "detect_interharmonics",
    "estimate_f1",
    "stage1_remove_interharmonics",
    "stage2_extract_harmonics",
    "analyze_window",
    "analyze_stream",
    "merge_windows",
    "window_starts",
    "segment_for",
    "stream_times",
]
