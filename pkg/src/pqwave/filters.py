"""Scaling/wavelet filter pairs for the undecimated packet tree.

Two families are provided:

* the narrow-transition conjugate-quadrature pair obtained from an
  equiripple half-band product filter (design, non-negative lift, spectral
  factorization, QMF mirror), and
* conventional Daubechies minimum-phase pairs, generated at elevated precision.

Every pair uses the DC-gain-1 convention (``sum(h0) == 1``) so that band
outputs of the tree carry the input amplitude directly.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import mpmath
import numpy as np

from .dsp import freq_response
from .errors import FactorizationFailure, PrecisionFailure
from .remez import remez_linear_phase

NORMALIZATION = "dc-gain-1"


@dataclass(frozen=True)
class HalfBandFilter:
    """Zero-phase equiripple half-band low-pass of odd length ``order``.

    ``wp`` is the passband edge as a fraction of pi; ``delta`` the measured
    peak ripple (equal in passband and stopband).
    """

    coeffs: np.ndarray
    wp: float
    delta: float

    @property
    def order(self) -> int:
        return self.coeffs.size

    def amplitude(self, omega) -> np.ndarray:
        return zero_phase_amplitude(self.coeffs, omega)


@dataclass(frozen=True)
class FilterPair:
    """Scaling (low-pass) and wavelet (high-pass) impulse responses."""

    h0: np.ndarray
    h1: np.ndarray
    kind: str
    wp: float | None = None  # level-1 passband edge, fraction of pi
    stopband_ripple: float = float("nan")
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("h0", "h1"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_fb(self) -> int:
        return self.h0.size

    def wp_hz(self, fs: float) -> float | None:
        return None if self.wp is None else self.wp * fs / 2

    def response(self, omega, highpass=False) -> np.ndarray:
        return freq_response(self.h1 if highpass else self.h0, omega)

    def __hash__(self):
        return hash((self.kind, self.h0.tobytes()))

    def __eq__(self, other):
        return (
            isinstance(other, FilterPair)
            and self.kind == other.kind
            and np.array_equal(self.h0, other.h0)
            and np.array_equal(self.h1, other.h1)
        )


def zero_phase_amplitude(coeffs, omega) -> np.ndarray:
    """Real amplitude of a symmetric odd-length filter centred at its middle tap."""
    coeffs = np.asarray(coeffs, dtype=float)
    c = coeffs.size // 2
    m = np.arange(1, c + 1)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    return coeffs[c] + 2 * np.cos(np.outer(omega, m)) @ coeffs[c + 1 :]


# ----------------------------------------------------------------------------
# narrow-transition CQMF design


def design_halfband(order: int = 99, wp: float = 0.47) -> HalfBandFilter:
    """Equiripple half-band low-pass with ``order`` taps and passband edge ``wp*pi``.

    A type-II single-band prototype of length ``(order+1)/2`` approximating 1
    on ``[0, 2*wp*pi]`` is designed with the exchange algorithm, interpolated
    by two and given a centre tap of 0.5. The stopband edge is ``(1-wp)*pi``.
    """
    if order % 2 == 0:
        raise ValueError(f"N must be odd (got {order})")
    if order % 4 != 3:
        raise ValueError(f"half-band length must be 3 mod 4 so both end taps are nonzero (got {order})")
    if not 0 < wp < 0.5:
        raise ValueError(f"passband edge must lie in (0, 0.5) x pi (got {wp})")
    proto = remez_linear_phase((order + 1) // 2, [(0.0, 2 * wp * np.pi)], [1.0])
    h = np.zeros(order)
    h[::2] = proto.taps / 2
    h[order // 2] = 0.5
    return HalfBandFilter(h, wp, _measured_ripple(h, wp))


def _measured_ripple(h, wp, density=64):
    """Peak stopband deviation of a zero-phase half-band, refined off-grid."""
    lo = (1 - wp) * np.pi
    w = np.linspace(lo, np.pi, density * h.size)
    a = zero_phase_amplitude(h, w)
    peaks = [abs(a[0]), abs(a[-1])]
    c = h.size // 2
    m = np.arange(1, c + 1)
    t = h[c + 1 :]
    idx = np.flatnonzero((np.abs(a[1:-1]) >= np.abs(a[:-2])) & (np.abs(a[1:-1]) >= np.abs(a[2:]))) + 1
    for i in idx:
        x = w[i]
        for _ in range(6):
            d1 = -2 * np.sin(m * x) @ (m * t)
            d2 = -2 * np.cos(m * x) @ (m * m * t)
            if d2 == 0:
                break
            x = min(max(x - d1 / d2, lo), np.pi)
        peaks.append(abs(zero_phase_amplitude(h, x)[0]))
    return float(max(peaks))


def nonnegative_lift(hlf: HalfBandFilter) -> np.ndarray:
    """Raise the half-band by its ripple and rescale so the centre tap stays 0.5.

    Returns the coefficients of ``P = 0.5/(0.5+|d|) * (H_LF + |d|)``, which is
    non-negative on the unit circle and still satisfies
    ``P(w) + P(pi - w) = 1``.
    """
    d = abs(hlf.delta)
    p = hlf.coeffs.copy()
    p[p.size // 2] += d
    return p * (0.5 / (0.5 + d))


def spectral_factorize(p) -> np.ndarray:
    """Minimum-phase ``h0`` with ``h0 * reversed(h0) == p`` and ``sum(h0) > 0``
    (so ``sum(h0) == 1`` whenever ``P(0) == 1``).

    Unit-circle zeros of ``p`` (double roots at the stopband touch points) are
    located from the minima of the zero-phase response and split evenly; the
    remaining zeros come from companion-matrix eigenvalues, polished with
    Newton steps at 34 significant digits, and those inside the unit circle are
    kept.
    """
    p = np.asarray(p, dtype=float)
    if p.size % 2 == 0 or not np.allclose(p, p[::-1], rtol=0, atol=1e-14 * np.abs(p).max()):
        raise ValueError("product filter must be symmetric with odd length")
    deg = p.size - 1
    half = deg // 2

    circle = _unit_circle_zeros(p)
    circle_roots = []
    for w in circle:
        if np.isclose(w, np.pi, atol=1e-12):
            circle_roots.append(-1.0 + 0j)
        elif np.isclose(w, 0.0, atol=1e-12):
            circle_roots.append(1.0 + 0j)
        else:
            circle_roots += [np.exp(1j * w), np.exp(-1j * w)]

    roots = list(np.roots(p)) if deg > 0 else []
    # each unit-circle zero is double in p: drop the two numerically split copies
    for z in circle_roots:
        for _ in range(2):
            if not roots:
                raise FactorizationFailure("unit-circle zero count exceeds polynomial degree")
            k = int(np.argmin(np.abs(np.asarray(roots) - z)))
            roots.pop(k)
    inside = [r for r in roots if abs(r) < 1]
    if len(inside) + len(circle_roots) != half:
        raise FactorizationFailure(
            f"expected {half} zeros for the factor, found {len(inside)} inside + {len(circle_roots)} on the circle"
        )
    inside = _polish_roots(p, inside)
    zeros = circle_roots + inside

    with mpmath.workdps(34):
        poly = [mpmath.mpc(1)]
        for z in zeros:
            z = mpmath.mpc(z.real, z.imag)
            poly = [a - z * b for a, b in zip(poly + [0], [0] + poly)]
        h0 = np.array([float(mpmath.re(c)) for c in poly])
    dc = p.sum()
    if dc <= 0:
        raise FactorizationFailure("product filter has no positive DC gain")
    h0 *= np.sqrt(dc) / h0.sum()

    err = np.abs(np.convolve(h0, h0[::-1]) - p).max()
    if err > 1e-6:
        raise FactorizationFailure(f"factor reproduces P only to {err:.2e} per tap")
    return h0


def _unit_circle_zeros(p, density=64):
    """Radian frequencies in [0, pi] where the zero-phase response of p touches 0."""
    a_max = np.abs(p).sum()
    w = np.linspace(0, np.pi, density * p.size)
    a = zero_phase_amplitude(p, w)
    c = p.size // 2
    m = np.arange(1, c + 1)
    t = p[c + 1 :]
    cand = []
    if a[0] <= a[1]:
        cand.append(0)
    cand += list(np.flatnonzero((a[1:-1] <= a[:-2]) & (a[1:-1] < a[2:])) + 1)
    if a[-1] <= a[-2]:
        cand.append(w.size - 1)
    found = []
    for i in cand:
        x = w[i]
        if 0 < i < w.size - 1:
            for _ in range(10):
                d1 = -2 * np.sin(m * x) @ (m * t)
                d2 = -2 * np.cos(m * x) @ (m * m * t)
                if d2 <= 0:
                    break
                x_new = min(max(x - d1 / d2, 0.0), np.pi)
                if abs(x_new - x) < 1e-16:
                    break
                x = x_new
        if abs(zero_phase_amplitude(p, x)[0]) <= 1e-9 * a_max:
            found.append(float(x))
    return found


def _polish_roots(p, roots, steps=6):
    coeffs = [mpmath.mpf(float(c)) for c in p]
    out = []
    with mpmath.workdps(34):
        for r in roots:
            z = mpmath.mpc(r.real, r.imag)
            for _ in range(steps):
                val, der = mpmath.polyval(coeffs, z, derivative=True)
                if der == 0:
                    break
                z -= val / der
            out.append(complex(z))
    # conjugate symmetry for a real factor
    return [complex(z.real, 0.0) if abs(z.imag) < 1e-14 else z for z in out]


def qmf_pair(h0, kind: str = "custom", wp: float | None = None, meta: dict | None = None) -> FilterPair:
    """Pair ``h0`` with its mirror ``h1[n] = (-1)^(L-1-n) h0[L-1-n]``."""
    h0 = np.asarray(h0, dtype=float)
    if h0.size < 2:
        raise ValueError("scaling filter needs at least two taps")
    L = h0.size
    n = np.arange(L)
    h1 = (-1.0) ** (L - 1 - n) * h0[::-1]
    return FilterPair(h0, h1, kind, wp, stopband_ripple(h0), meta or {})


def design_paper_pair(order: int = 99, wp: float = 0.47) -> FilterPair:
    """Full narrow-transition design chain: half-band, lift, factor, mirror.

    Only lengths ``N = 3 mod 8`` put a ripple minimum at pi; the lifted
    product then vanishes there, which is what makes ``sum(h0) == 1`` and
    ``sum(h1) == 0`` possible. Other lengths are rejected.
    """
    if order % 2 == 1 and order % 8 != 3:
        raise ValueError(
            f"CQMF design needs N = 3 mod 8 (e.g. 91, 99, 107) so the product filter vanishes at Nyquist (got {order})"
        )
    hlf = design_halfband(order, wp)
    p = nonnegative_lift(hlf)
    h0 = spectral_factorize(p)
    return qmf_pair(h0, "paper-cqmf", wp, {"N": order, "delta": hlf.delta})


def stopband_ripple(h0, grid: int = 1 << 15) -> float:
    """Peak ``|H0|`` beyond the first frequency where it falls to 1%."""
    w = np.linspace(0, np.pi, grid)
    m = np.abs(freq_response(h0, w))
    below = np.flatnonzero(m <= 0.01)
    if below.size == 0:
        return float(m[w >= np.pi / 2].max())
    return float(m[below[0] :].max())


# ----------------------------------------------------------------------------
# Daubechies pairs


def design_daubechies(K: int, dps: int | None = None, max_dps: int = 400) -> FilterPair:
    """Length-2K Daubechies minimum-phase pair with ``sum(h0) == 1``.

    Roots of the maxflat polynomial ``sum_k C(K-1+k, k) y^k`` are found with
    mpmath; the precision doubles until the double-shift orthogonality
    residual is below 1e-10 (``PrecisionFailure`` past ``max_dps`` or when
    even that leaves a residual above 1e-6).
    """
    if not 1 <= K <= 45:
        raise ValueError(f"vanishing moments must be in [1, 45] (got {K})")
    dps = dps or max(40, 2 * K + 20)
    while True:
        h0 = _daubechies_taps(K, dps)
        res = orthogonality_residual(h0)
        if res < 1e-10:
            break
        if dps * 2 > max_dps:
            if res > 1e-6:
                raise PrecisionFailure(f"orthogonality residual {res:.2e} at {dps} digits for K={K}")
            break
        dps *= 2
    return qmf_pair(h0, f"daubechies-{K}", None, {"K": K, "dps": dps, "orthogonality": res})


def _daubechies_taps(K, dps):
    with mpmath.workdps(dps):
        zeros = []
        if K > 1:
            coeffs = [mpmath.binomial(K - 1 + k, k) for k in range(K)][::-1]
            for y in mpmath.polyroots(coeffs, maxsteps=800, extraprec=3 * dps):
                # y = (2 - z - 1/z)/4  ->  z^2 - (2 - 4y) z + 1 = 0
                b = 2 - 4 * y
                disc = mpmath.sqrt(b * b - 4)
                z1, z2 = (b + disc) / 2, (b - disc) / 2
                zeros.append(z1 if abs(z1) < 1 else z2)
        zeros += [mpmath.mpf(-1)] * K
        poly = [mpmath.mpc(1)]
        for z in zeros:
            poly = [a - z * b for a, b in zip(poly + [0], [0] + poly)]
        taps = [mpmath.re(c) for c in poly]
        total = mpmath.fsum(taps)
        return np.array([float(c / total) for c in taps])


def orthogonality_residual(h0) -> float:
    """Max |sum_n h0[n] h0[n+2m] - delta_m0 * sum(h0^2)| over all shifts m."""
    h0 = np.asarray(h0, dtype=float)
    ac = np.correlate(h0, h0, "full")
    mid = h0.size - 1
    even = ac[mid::2][1:]
    return float(np.abs(even).max()) if even.size else 0.0


# ----------------------------------------------------------------------------
# cascaded responses


def node_path(n: int, level: int) -> tuple[int, ...]:
    """Filter choices (0 = scaling, 1 = wavelet) from level 1 down to ``level``."""
    return tuple((n >> (level - 1 - j)) & 1 for j in range(level))


def cascade_response(pair: FilterPair, path, omega) -> np.ndarray:
    """Complex response of the equivalent filter of a packet node.

    ``path[j]`` selects the filter at level ``j+1``; that filter is upsampled
    by ``2**j``.
    """
    omega = np.asarray(omega, dtype=float)
    out = np.ones(omega.shape, dtype=complex)
    for j, bit in enumerate(path):
        out *= freq_response(pair.h1 if bit else pair.h0, omega * 2**j)
    return out


@dataclass(frozen=True)
class LevelResponse:
    """Equivalent magnitude responses of every node at one level."""

    freqs: np.ndarray  # Hz, shape (grid,)
    magnitude: np.ndarray  # shape (2**level, grid), natural node order
    bands: list  # per node (lo, hi) Hz where magnitude >= 1/sqrt(2)
    transitions: list  # per node list of (edge_hz, width_hz) for interior edges
    level: int
    fs: float

    @property
    def transition_width(self) -> float:
        """Narrowest 1%-to-99% transition found at any interior band edge."""
        widths = [w for node in self.transitions for _, w in node]
        return float(min(widths)) if widths else float("nan")


def frequency_response(pair: FilterPair, level: int, fs: float, grid: int = 1 << 15) -> LevelResponse:
    """Cascaded magnitude of every node at ``level`` on a ``grid``-point axis [0, fs/2]."""
    if level < 1:
        raise ValueError("level must be >= 1")
    freqs = np.linspace(0, fs / 2, grid)
    omega = 2 * np.pi * freqs / fs
    per_level = [
        (np.abs(freq_response(pair.h0, omega * 2**j)), np.abs(freq_response(pair.h1, omega * 2**j)))
        for j in range(level)
    ]
    mags = np.ones((1, grid))
    for lo, hi in per_level:
        mags = np.stack([mags * lo, mags * hi], axis=1).reshape(-1, grid)
    bands, transitions = [], []
    for m in mags:
        above = np.flatnonzero(m >= 1 / np.sqrt(2))
        if above.size == 0:
            bands.append((float("nan"), float("nan")))
            transitions.append([])
            continue
        # take the contiguous run holding the peak
        peak = int(np.argmax(m))
        a = b = peak
        while a > 0 and m[a - 1] >= 1 / np.sqrt(2):
            a -= 1
        while b < grid - 1 and m[b + 1] >= 1 / np.sqrt(2):
            b += 1
        bands.append((float(freqs[a]), float(freqs[b])))
        edges = []
        if a > 0:
            edges.append((freqs[a], _edge_width(m, freqs, a, -1)))
        if b < grid - 1:
            edges.append((freqs[b], _edge_width(m, freqs, b, +1)))
        transitions.append([(float(e), float(w)) for e, w in edges if np.isfinite(w)])
    return LevelResponse(freqs, mags, bands, transitions, level, fs)


def _edge_width(m, freqs, i, direction):
    """Distance from the last >=99% point inside to the first <=1% point outside."""
    j = i
    while 0 <= j < m.size and m[j] < 0.99:
        j -= direction
    k = i
    while 0 <= k < m.size and m[k] > 0.01:
        k += direction
    if not (0 <= j < m.size and 0 <= k < m.size):
        return float("nan")
    return abs(freqs[k] - freqs[j])


# ----------------------------------------------------------------------------
# coefficient files


def save_pair(pair: FilterPair, path) -> None:
    """Write a pair to a JSON coefficient file atomically."""
    doc = {
        "format": "pqwave-filter-pair/1",
        "kind": pair.kind,
        "n_fb": pair.n_fb,
        "wp": pair.wp,
        "normalization": NORMALIZATION,
        "stopband_ripple": pair.stopband_ripple,
        "meta": {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in pair.meta.items()},
        "h0": [float(repr_f) for repr_f in pair.h0],
        "h1": [float(repr_f) for repr_f in pair.h1],
    }
    text = json.dumps(doc, indent=1)  # json emits shortest round-trip reprs (17 sig. digits max)
    atomic_write_text(path, text)


def load_pair(path) -> FilterPair:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("normalization") != NORMALIZATION:
        raise ValueError(f"{path}: unsupported normalization {doc.get('normalization')!r}")
    h0 = np.array(doc["h0"], dtype=float)
    h1 = np.array(doc["h1"], dtype=float)
    if h0.size != doc["n_fb"] or h1.size != doc["n_fb"]:
        raise ValueError(f"{path}: coefficient count does not match n_fb")
    return FilterPair(h0, h1, doc["kind"], doc.get("wp"), doc.get("stopband_ripple", float("nan")), doc.get("meta", {}))


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


_BUILTIN = {"paper": "paper_cqmf.json", "db40": "db40.json", "db45": "db45.json"}


@lru_cache(maxsize=None)
def builtin_pair(name: str) -> FilterPair:
    """Pairs designed offline and shipped with the package ("paper", "db40", "db45")."""
    if name not in _BUILTIN:
        raise KeyError(f"unknown built-in pair {name!r}; choose from {sorted(_BUILTIN)}")
    with resources.as_file(resources.files("pqwave") / "data" / _BUILTIN[name]) as p:
        return load_pair(p)


def regenerate_builtin_pairs(directory) -> None:
    """Re-run every offline design and write the shipped coefficient files."""
    directory = Path(directory)
    save_pair(design_paper_pair(), directory / _BUILTIN["paper"])
    save_pair(design_daubechies(40), directory / _BUILTIN["db40"])
    save_pair(design_daubechies(45), directory / _BUILTIN["db45"])


def transition_width_hz(pair: FilterPair, level: int, fs: float, grid: int = 1 << 16) -> float:
    """Convenience wrapper: narrowest level-``level`` transition width in Hz."""
    return frequency_response(pair, level, fs, grid).transition_width


__all__ = [
    "HalfBandFilter",
    "FilterPair",
    "LevelResponse",
    "design_halfband",
    "nonnegative_lift",
    "spectral_factorize",
    "qmf_pair",
    "design_paper_pair",
    "design_daubechies",
    "frequency_response",
    "cascade_response",
    "node_path",
    "orthogonality_residual",
    "stopband_ripple",
    "save_pair",
    "load_pair",
    "builtin_pair",
    "regenerate_builtin_pairs",
    "transition_width_hz",
]
