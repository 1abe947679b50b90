"""Instantaneous power quality indices from per-component analytic tracks.

Inputs are mappings ``key -> complex array`` where ``key`` is ``("h", order)``
or ``("ih", frequency)`` and the array holds the component's analytic signal
in peak units (``|z|`` is the peak amplitude, ``angle(z)`` the phase).
:func:`phasors` turns pipeline tracks into that form. RMS magnitudes are
``|z| / sqrt(2)``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter

log = logging.getLogger(__name__)

SINGLE_PHASE_PQIS = ("U_RMS", "I_RMS", "THD_U", "THD_I", "P1", "PH", "Q1", "S", "S1", "PF", "PF1", "f1")
THREE_PHASE_PQIS = (
    "U_e", "U_e1", "I_e", "I_e1", "THD_eU", "THD_eI", "P", "PH", "P1+", "Q1+",
    "S_e", "S_e1", "S1+", "PF", "PF1+", "HP", "LU", "f1",
)
FUND = ("h", 1)
A_OP = np.exp(2j * np.pi / 3)
EPS = 1e-12


@dataclass(frozen=True)
class PqiSeries:
    times: np.ndarray
    values: dict  # name -> array
    system: str  # "single" | "three"

    def __getitem__(self, name):
        return self.values[name]

    @property
    def names(self):
        return list(self.values)

    def mean_over(self, t_lo: float, t_hi: float) -> dict:
        sel = (self.times >= t_lo) & (self.times < t_hi)
        return {k: float(np.nanmean(v[sel])) if np.any(sel) else float("nan") for k, v in self.values.items()}


@dataclass(frozen=True)
class SequencePhasor:
    """Per-instant complex RMS phasor (``magnitude``/``angle`` derived)."""

    value: np.ndarray

    @property
    def magnitude(self):
        return np.abs(self.value)

    @property
    def angle(self):
        return np.angle(self.value)


def phasors(tracks) -> dict:
    """``key -> complex array`` from pipeline tracks (or pass through raw arrays)."""
    out = {}
    for key, tr in tracks.items():
        out[key] = tr.z if hasattr(tr, "z") else np.asarray(tr, dtype=complex)
    return out


def _ratio(num, den, ref=None):
    """``num / den``, NaN where ``den`` is negligible (relative to ``ref`` when given)."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    floor = EPS if ref is None else EPS * np.maximum(np.abs(np.asarray(ref, dtype=float)), 1.0)
    out = np.full(np.broadcast(num, den).shape, np.nan)
    np.divide(num, den, out=out, where=np.abs(den) > floor)
    return out


def _power(z):
    return np.abs(z) ** 2 / 2  # squared RMS


def _length(*maps):
    for m in maps:
        for v in m.values():
            return np.shape(v)[0]
    return 0


def instantaneous_rms_thd(tracks) -> tuple[np.ndarray, np.ndarray]:
    """RMS over all components and THD (%) over harmonics of order >= 2."""
    z = phasors(tracks)
    n = _length(z)
    total = np.zeros(n)
    harm = np.zeros(n)
    for key, v in z.items():
        p = _power(v)
        total += p
        if key[0] == "h" and key[1] >= 2:
            harm += p
    u1 = np.abs(z[FUND]) / np.sqrt(2) if FUND in z else np.zeros(n)
    return np.sqrt(total), 100 * _ratio(np.sqrt(harm), u1)


def match_keys(v_keys, i_keys, tol: float = 1.0) -> list:
    """Pairs of (voltage key, current key) for equal harmonic orders or
    interharmonics closer than ``tol`` Hz."""
    pairs = []
    used = set()
    for kv in v_keys:
        if kv[0] == "h":
            if kv in i_keys:
                pairs.append((kv, kv))
            continue
        best = None
        for ki in i_keys:
            if ki[0] != "ih" or ki in used:
                continue
            d = abs(ki[1] - kv[1])
            if d < tol and (best is None or d < best[0]):
                best = (d, ki)
        if best:
            used.add(best[1])
            pairs.append((kv, best[1]))
    return pairs


def _active(zu, zi):
    return np.real(zu * np.conj(zi)) / 2


def _reactive(zu, zi):
    return np.imag(zu * np.conj(zi)) / 2


def single_phase_pqi(v, i, times=None, fs: float | None = None) -> PqiSeries:
    """Single-phase index set; ``fs`` is needed for ``f1``."""
    zv, zi = phasors(v), phasors(i)
    n = _length(zv, zi)
    if FUND not in zv or FUND not in zi:
        raise ValueError("fundamental track missing from voltage or current")
    u_rms, thd_u = instantaneous_rms_thd(zv)
    i_rms, thd_i = instantaneous_rms_thd(zi)
    u1, i1 = zv[FUND], zi[FUND]
    p1 = _active(u1, i1)
    q1 = _reactive(u1, i1)
    s1 = np.abs(u1) * np.abs(i1) / 2
    pairs = match_keys(list(zv), list(zi))
    matched = {kv for kv, _ in pairs} | {ki for _, ki in pairs}
    unmatched = [k for k in list(zv) + list(zi) if k not in matched]
    if unmatched:
        log.debug("components without a partner contribute to RMS only: %s", unmatched)
    ph = np.zeros(n)
    for kv, ki in pairs:
        if kv != FUND:
            ph += _active(zv[kv], zi[ki])
    p = p1 + ph
    s = u_rms * i_rms
    values = {
        "U_RMS": u_rms, "I_RMS": i_rms, "THD_U": thd_u, "THD_I": thd_i,
        "P1": p1, "PH": ph, "Q1": q1, "S": s, "S1": s1,
        "PF": _ratio(p, s), "PF1": _ratio(p1, s1),
        "f1": instantaneous_frequency(u1, fs) if fs else np.full(n, np.nan),
    }
    return PqiSeries(_times(times, n, fs), values, "single")


def _times(times, n, fs):
    if times is not None:
        return np.asarray(times, dtype=float)
    return np.arange(n) / fs if fs else np.arange(n, dtype=float)


def symmetrical_components(a, b, c):
    """(positive, negative, zero) sequence phasors of three per-instant phasors."""
    a, b, c = (np.asarray(x, dtype=complex) for x in (a, b, c))
    pos = (a + A_OP * b + A_OP**2 * c) / 3
    neg = (a + A_OP**2 * b + A_OP * c) / 3
    zero = (a + b + c) / 3
    return SequencePhasor(pos), SequencePhasor(neg), SequencePhasor(zero)


def align_interharmonics(maps: list, tol: float = 1.0) -> list:
    """Relabel interharmonic keys so equal lines share one key across channels."""
    reps: list[float] = []
    for m in maps:
        for k in m:
            if k[0] == "ih" and not any(abs(k[1] - r) < tol for r in reps):
                reps.append(k[1])
    out = []
    for m in maps:
        new = {}
        for k, v in m.items():
            if k[0] == "ih":
                r = min(reps, key=lambda f: abs(f - k[1]))
                key = ("ih", r)
                new[key] = new[key] + v if key in new else v
            else:
                new[k] = v
        out.append(new)
    return out


def _radicand(sq_big, sq_small, label):
    d = sq_big - sq_small
    scale = np.maximum(np.abs(sq_big), EPS)
    bad = d < -1e-6 * scale
    if np.any(bad):
        warnings.warn(f"{label}: negative radicand clamped at {int(bad.sum())} instants", RuntimeWarning, stacklevel=3)
    return np.sqrt(np.clip(d, 0, None))


def three_phase_pqi(voltages: dict, currents: dict, neutral=None, times=None, fs: float | None = None) -> PqiSeries:
    """Three-phase index set.

    ``voltages`` and ``currents`` map phase names ``"a"``, ``"b"``, ``"c"`` to
    track mappings (line-to-neutral voltages, line currents). ``neutral``
    optionally gives the measured neutral current; otherwise it is the
    negated sum of the line currents per component.
    """
    ph = ("a", "b", "c")
    maps = [phasors(voltages[x]) for x in ph] + [phasors(currents[x]) for x in ph]
    if neutral is not None:
        maps.append(phasors(neutral))
    maps = align_interharmonics(maps)
    zv, zi = maps[:3], maps[3:6]
    zn = maps[6] if neutral is not None else None
    n = _length(*maps)
    zero = np.zeros(n, dtype=complex)
    keys_v = sorted({k for m in zv for k in m}, key=str)
    keys_i = sorted({k for m in zi for k in m} | (set(zn) if zn else set()), key=str)

    def ue2(keys):
        acc = np.zeros(n)
        for k in keys:
            a, b, c = (m.get(k, zero) for m in zv)
            acc += 3 * (_power(a) + _power(b) + _power(c)) + _power(a - b) + _power(b - c) + _power(c - a)
        return acc / 18

    def ie2(keys):
        acc = np.zeros(n)
        for k in keys:
            a, b, c = (m.get(k, zero) for m in zi)
            nn = zn.get(k, zero) if zn is not None else -(a + b + c)
            acc += _power(a) + _power(b) + _power(c) + _power(nn)
        return acc / 3

    ue_sq, ue1_sq = ue2(keys_v), ue2([FUND])
    ie_sq, ie1_sq = ie2(keys_i), ie2([FUND])
    ue, ue1, ie, ie1 = np.sqrt(ue_sq), np.sqrt(ue1_sq), np.sqrt(ie_sq), np.sqrt(ie1_sq)
    thd_eu = 100 * _ratio(_radicand(ue_sq, ue1_sq, "U_eH"), ue1)
    thd_ei = 100 * _ratio(_radicand(ie_sq, ie1_sq, "I_eH"), ie1)

    p = np.zeros(n)
    p_fund = np.zeros(n)
    for mv, mi in zip(zv, zi):
        for kv, ki in match_keys(list(mv), list(mi)):
            pk = _active(mv[kv], mi[ki])
            p += pk
            if kv == FUND:
                p_fund += pk
    pos_u, _, _ = symmetrical_components(*(m.get(FUND, zero) for m in zv))
    pos_i, _, _ = symmetrical_components(*(m.get(FUND, zero) for m in zi))
    # per-phase RMS phasors: |z|/sqrt(2)
    up, ip = pos_u.value / np.sqrt(2), pos_i.value / np.sqrt(2)
    p1p = 3 * np.real(up * np.conj(ip))
    q1p = 3 * np.imag(up * np.conj(ip))
    s1p = 3 * np.abs(up) * np.abs(ip)
    se = 3 * ue * ie
    se1 = 3 * ue1 * ie1
    sen = _radicand(se**2, se1**2, "S_eN")
    su1 = _radicand(se1**2, s1p**2, "S_U1")
    values = {
        "U_e": ue, "U_e1": ue1, "I_e": ie, "I_e1": ie1, "THD_eU": thd_eu, "THD_eI": thd_ei,
        "P": p, "PH": p - p_fund, "P1+": p1p, "Q1+": q1p, "S_e": se, "S_e1": se1, "S1+": s1p,
        "PF": _ratio(p, se), "PF1+": _ratio(p1p, s1p, se1), "HP": _ratio(sen, se1, se), "LU": _ratio(su1, s1p, se1),
        "f1": instantaneous_frequency(pos_u.value, fs) if fs else np.full(n, np.nan),
    }
    return PqiSeries(_times(times, n, fs), values, "three")


def instantaneous_frequency(z, fs: float, median_s: float = 0.02) -> np.ndarray:
    """``(1/2pi) dphi/dt`` from 5-point central differences, then a median filter.

    ``z`` is a complex analytic series or an object with an ``analytic`` track.
    Samples with negligible amplitude come back as NaN.
    """
    if hasattr(z, "z"):
        z = z.z
    z = np.asarray(z, dtype=complex)
    n = z.size
    amp = np.abs(z)
    peak = amp.max() if n else 0.0
    valid = amp > 1e-9 * peak if peak > 0 else np.zeros(n, bool)
    out = np.full(n, np.nan)
    if n < 5 or not valid.any():
        return out
    phi = np.unwrap(np.angle(np.where(valid, z, 1.0)))
    d = np.empty(n)
    d[2:-2] = (-phi[4:] + 8 * phi[3:-1] - 8 * phi[1:-3] + phi[:-4]) / 12
    d[:2] = phi[1:3] - phi[:2]
    d[-2:] = phi[-2:] - phi[-3:-1]
    f = d * fs / (2 * np.pi)
    width = max(1, int(round(median_s * fs)))
    f = median_filter(f, size=width, mode="nearest")
    ok = valid.copy()
    # derivative stencils touching invalid samples are unreliable
    bad = ~valid
    for s in (1, 2):
        ok[s:] &= ~bad[:-s]
        ok[:-s] &= ~bad[s:]
    out[ok] = f[ok]
    return out


def relative_error(esti, true):
    """Percent relative error; where ``true == 0`` the absolute error is returned
    and flagged. Returns ``(value, is_absolute)``."""
    esti = np.asarray(esti, dtype=float)
    true = np.asarray(true, dtype=float)
    zero = np.abs(true) <= EPS
    err = np.where(zero, np.abs(esti - true), np.abs(esti - true) / np.where(zero, 1.0, np.abs(true)) * 100)
    if err.ndim == 0:
        return float(err), bool(zero)
    return err, zero


__all__ = [
    "PqiSeries",
    "SequencePhasor",
    "SINGLE_PHASE_PQIS",
    "THREE_PHASE_PQIS",
    "phasors",
    "instantaneous_rms_thd",
    "single_phase_pqi",
    "symmetrical_components",
    "three_phase_pqi",
    "instantaneous_frequency",
    "relative_error",
    "match_keys",
    "align_interharmonics",
]
