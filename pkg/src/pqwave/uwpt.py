"""Undecimated wavelet packet transform (filter upsampling, no decimation).

Node ``(j, n)`` is obtained from its parent ``(j-1, n // 2)`` by circular
convolution with ``h0`` (even ``n``) or ``h1`` (odd ``n``) upsampled by
``2**(j-1)``. Convolutions are carried out as products of DFTs: the DFT of the
upsampled, wrapped filter at bin ``k`` equals the length-N DFT of the original
filter at bin ``k * 2**(j-1) mod N``, so no upsampled filter is ever built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dsp import SampleWindow
from .errors import BandAssignmentAmbiguous, TargetOnBandEdge, WindowTooShort
from .filters import FilterPair, cascade_response, frequency_response, node_path

def upsample_filter(h, level: int) -> np.ndarray:
    """Insert ``2**(level-1) - 1`` zeros between consecutive taps."""
    if level < 1:
        raise ValueError("level must be >= 1")
    h = np.asarray(h, dtype=float)
    step = 2 ** (level - 1)
    out = np.zeros(step * (h.size - 1) + 1)
    out[::step] = h
    return out


def min_length(pair: FilterPair, levels: int) -> int:
    """Shortest input for which the deepest upsampled filter fits."""
    return 2 ** (levels - 1) * (pair.n_fb - 1) + 1


@dataclass(frozen=True)
class PacketNode:
    level: int
    index: int
    coeffs: np.ndarray
    band: tuple  # (f_low, f_high) Hz
    group_delay: float  # samples, at band centre

    def __len__(self):
        return self.coeffs.size


@dataclass(frozen=True)
class BandTree:
    """Materialized nodes of one decomposition keyed by ``(level, index)``."""

    nodes: dict
    pair: FilterPair
    fs: float
    depth: int
    t0: float = 0.0
    spectra: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def levels(self) -> list:
        return [
            [self.nodes[(j, n)] for n in range(2**j) if (j, n) in self.nodes]
            for j in range(1, self.depth + 1)
        ]

    def node(self, level: int, index: int) -> PacketNode:
        try:
            return self.nodes[(level, index)]
        except KeyError:
            raise KeyError(f"node ({level}, {index}) was pruned or does not exist") from None

    def leaf(self, index: int) -> PacketNode:
        return self.node(self.depth, index)


@lru_cache(maxsize=256)
def _filter_dfts(pair: FilterPair, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Length-n DFTs of h0 and h1 (taps beyond n wrap around)."""
    out = []
    for h in (pair.h0, pair.h1):
        folded = np.zeros(n)
        np.add.at(folded, np.arange(h.size) % n, h)
        out.append(np.fft.fft(folded))
    return out[0], out[1]


def leaf_response(pair: FilterPair, levels: int, index: int, n: int, bin_offset: int = 0) -> np.ndarray:
    """Complex response of node ``(levels, index)`` at DFT bins ``k + bin_offset``, k = 0..n-1."""
    return _leaf_response(pair, levels, index, n, bin_offset).copy()


@lru_cache(maxsize=512)
def _leaf_response(pair, levels, index, n, bin_offset):
    g0, g1 = _filter_dfts(pair, n)
    k = np.arange(n) + bin_offset
    out = np.ones(n, dtype=complex)
    for j, bit in enumerate(node_path(index, levels)):
        out *= (g1 if bit else g0)[(k * 2**j) % n]
    out.setflags(write=False)
    return out


def uwpt_decompose(x: SampleWindow, pair: FilterPair, levels: int, targets=None) -> BandTree:
    """Decompose ``x`` into a ``levels``-deep undecimated packet tree.

    ``targets`` optionally lists leaf indices; only those leaves and their
    ancestors are then materialized.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    n = len(x)
    need = min_length(pair, levels)
    if n < need:
        raise WindowTooShort(
            f"{levels}-level tree with {pair.n_fb}-tap filters needs {need} samples, window has {n}"
        )
    keep = None
    if targets is not None:
        keep = set()
        for leaf in targets:
            if not 0 <= leaf < 2**levels:
                raise ValueError(f"leaf index {leaf} outside [0, {2**levels})")
            for j in range(1, levels + 1):
                keep.add((j, leaf >> (levels - j)))
    bands = node_band_map(pair, levels, x.fs)
    g0, g1 = _filter_dfts(pair, n)
    k = np.arange(n)
    spectra = {(0, 0): np.fft.fft(x.samples)}
    nodes = {}
    for j in range(1, levels + 1):
        idx = (k * 2 ** (j - 1)) % n
        for parent in range(2 ** (j - 1)):
            ps = spectra.get((j - 1, parent))
            if ps is None:
                continue
            for bit, g in ((0, g0), (1, g1)):
                child = 2 * parent + bit
                if keep is not None and (j, child) not in keep:
                    continue
                spectra[(j, child)] = ps * g[idx]
        for child in range(2**j):
            if (j, child) not in spectra:
                continue
            band = dict(_level_bands(pair, j, x.fs))[child] if j < levels else bands[child]
            coeffs = np.fft.ifft(spectra[(j, child)]).real
            coeffs.setflags(write=False)
            nodes[(j, child)] = PacketNode(j, child, coeffs, band, _group_delay(pair, j, child, band, x.fs))
    return BandTree(nodes, pair, x.fs, levels, x.t0, spectra)


def _group_delay(pair, level, index, band, fs):
    fc = 0.5 * (band[0] + band[1])
    dw = 1e-4
    w = 2 * np.pi * fc / fs + np.array([-dw, dw])
    w = np.clip(w, 0, np.pi)
    ph = np.unwrap(np.angle(cascade_response(pair, node_path(index, level), w)))
    return float(-(ph[1] - ph[0]) / (w[1] - w[0]))


def node_band_map(pair: FilterPair, levels: int, fs: float) -> dict:
    """Leaf index -> (f_low, f_high) Hz, measured from the cascaded responses.

    Each frequency belongs to the leaf with the largest gain there. Every
    leaf must own one contiguous interval, otherwise
    ``BandAssignmentAmbiguous`` is raised. For a clean edge the boundary is
    where the two neighbouring gains cross (about 1/sqrt(2) for a
    power-complementary pair).
    """
    return dict(_level_bands(pair, levels, fs))


@lru_cache(maxsize=64)
def _level_bands(pair, levels, fs):
    grid = max(4096, 2**levels * 256)
    resp = frequency_response(pair, levels, fs, grid)
    f, mags = resp.freqs, resp.magnitude
    owner = np.argmax(mags, axis=0)
    change = np.flatnonzero(np.diff(owner)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change - 1, [f.size - 1]))
    bands = {}
    for s, e in zip(starts, ends):
        n = int(owner[s])
        if n in bands:
            raise BandAssignmentAmbiguous(f"node ({levels}, {n}) dominates more than one frequency interval")
        lo = 0.0 if s == 0 else _cross(f, mags[owner[s - 1]] - mags[n], s - 1, s)
        hi = fs / 2 if e == f.size - 1 else _cross(f, mags[n] - mags[owner[e + 1]], e, e + 1)
        bands[n] = (lo, hi)
    if len(bands) != 2**levels:
        missing = sorted(set(range(2**levels)) - set(bands))
        raise BandAssignmentAmbiguous(f"nodes {missing[:5]} dominate no frequency at level {levels}")
    return tuple(sorted(bands.items()))


def _cross(f, d, i, k):
    # zero of the gain difference d between grid samples i and k
    if d[k] == d[i]:
        return float(f[i])
    return float(f[i] + d[i] * (f[k] - f[i]) / (d[i] - d[k]))


def leaf_for_frequency(pair: FilterPair, levels: int, fs: float, freq: float) -> int:
    """Index of the leaf whose band contains ``freq``."""
    for n, (lo, hi) in _level_bands(pair, levels, fs):
        if lo <= freq < hi or (freq == hi == fs / 2):
            return n
    raise ValueError(f"{freq} Hz lies outside [0, {fs / 2}] Hz")


def leaf_gain_at(pair: FilterPair, levels: int, index: int, freq: float, fs: float) -> float:
    w = np.array([2 * np.pi * freq / fs])
    return float(np.abs(cascade_response(pair, node_path(index, levels), w))[0])


@lru_cache(maxsize=64)
def level_transition_width(pair: FilterPair, levels: int, fs: float) -> float:
    """Narrowest 1%-to-99% transition width (Hz) among the leaves of a level."""
    return frequency_response(pair, levels, fs, max(4096, 2**levels * 256)).transition_width


def check_target(pair: FilterPair, levels: int, fs: float, freq: float) -> int:
    """Leaf holding ``freq`` at least half a transition width from both of its
    edges, else ``TargetOnBandEdge``."""
    leaf = leaf_for_frequency(pair, levels, fs, freq)
    lo, hi = dict(_level_bands(pair, levels, fs))[leaf]
    margin = level_transition_width(pair, levels, fs) / 2
    if (lo > 0 and freq - lo < margin) or (hi < fs / 2 and hi - freq < margin):
        raise TargetOnBandEdge(
            f"{freq:.3f} Hz is within {margin:.2f} Hz of an edge of band [{lo:.2f}, {hi:.2f}] Hz; shift it first"
        )
    return leaf


def _target_leaf(pair, levels, fs, freq, strict):
    return check_target(pair, levels, fs, freq) if strict else leaf_for_frequency(pair, levels, fs, freq)


def extract_band(tree: BandTree, f_target: float, strict: bool = True) -> SampleWindow:
    """Leaf signal holding ``f_target``, phase-equalized and gain-normalized.

    The leaf coefficients are filtered by the conjugate phase of the leaf's
    equivalent filter (zero-phase result) and divided by the leaf gain at
    ``f_target``, so a tone at ``f_target`` comes back with its input
    amplitude and phase. ``strict=False`` skips the band-edge margin check
    (for comparing filters whose transitions are too wide for the target).
    """
    leaf = _target_leaf(tree.pair, tree.depth, tree.fs, f_target, strict)
    node = tree.leaf(leaf)
    n = node.coeffs.size
    resp = _leaf_response(tree.pair, tree.depth, leaf, n, 0)
    mag = np.abs(resp)
    eq = np.divide(np.conj(resp), mag, out=np.zeros(n, dtype=complex), where=mag > 0)
    gain = leaf_gain_at(tree.pair, tree.depth, leaf, f_target, tree.fs)
    spec = tree.spectra.get((tree.depth, leaf))
    if spec is None:
        spec = np.fft.fft(node.coeffs)
    out = np.fft.ifft(spec * eq).real / gain
    return SampleWindow(out, tree.fs, tree.t0)


def mask_extract(spectrum: np.ndarray, pair: FilterPair, levels: int, fs: float, f_target: float,
                 shift_bins: int = 0, passes: int = 1, strict: bool = True) -> np.ndarray:
    """One-sided (analytic) spectrum of the component at ``f_target``.

    ``spectrum`` is the analytic-signal DFT of a segment. The result equals
    shifting the segment by ``shift_bins`` DFT bins, decomposing, extracting
    the leaf around ``f_target + shift`` with ``extract_band`` and shifting
    back, with the leaf magnitude applied ``passes`` times. Lines that the
    shift would carry below 0 Hz or above Nyquist are dropped.

    The leaf that starts at 0 Hz has no lower transition on a one-sided
    spectrum; cutting it at 0 Hz would ring for a long time. For that leaf
    the upper half of the response is reflected about the band centre, so
    the lower edge rolls off like the upper one and continues smoothly into
    shifted frequencies below 0 Hz (which are still positive in the input).
    """
    n = spectrum.size
    df = fs / n
    shifted = f_target + shift_bins * df
    leaf = _target_leaf(pair, levels, fs, shifted, strict)
    mask = _mask(pair, levels, leaf, n, shift_bins, passes, fs, shifted)
    return spectrum * mask


@lru_cache(maxsize=512)
def _mask(pair, levels, leaf, n, shift_bins, passes, fs, f_norm):
    mag = np.abs(_leaf_response(pair, levels, leaf, n, shift_bins))
    k = np.arange(n) + shift_bins
    lo, hi = dict(_level_bands(pair, levels, fs))[leaf]
    if lo == 0.0:
        top = int(round(hi * n / fs))
        # |H(top - k)| == |H(k - top)| for a real filter
        mirrored = np.abs(_leaf_response(pair, levels, leaf, n, shift_bins - top))
        lower = 2 * k < top
        mag = np.where(lower, mirrored, mag)
        f_ref = hi - f_norm if 2 * f_norm < hi else f_norm
        ref = leaf_gain_at(pair, levels, leaf, f_ref, fs)
        drop = k > n // 2
    else:
        ref = leaf_gain_at(pair, levels, leaf, f_norm, fs)
        drop = (k < 0) | (k > n // 2)
    mask = (mag / ref) ** passes
    mask[drop | (np.arange(n) > n // 2)] = 0.0
    mask.setflags(write=False)
    return mask


__all__ = [
    "PacketNode",
    "BandTree",
    "upsample_filter",
    "uwpt_decompose",
    "node_band_map",
    "extract_band",
    "mask_extract",
    "leaf_response",
    "leaf_for_frequency",
    "check_target",
    "min_length",
]
