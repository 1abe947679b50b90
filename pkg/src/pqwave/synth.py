"""Multi-tone scenario synthesizer with an exact per-component oracle.

A scenario is a set of named tones on named channels plus a time-ordered list
of events that change frequency, magnitude, phase or presence. Between events
every parameter is constant, and tone phase stays continuous across frequency
and magnitude steps. Each tone is ``A * sin(theta(t))``; the oracle reports it
in analytic form ``A * exp(j (theta - pi/2))``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

SQRT2 = math.sqrt(2.0)
EVENT_KINDS = ("frequency_step", "scale", "enable", "disable", "phase_step")


@dataclass(frozen=True)
class Tone:
    """One sinusoid. ``order`` ties its frequency to the fundamental; otherwise ``freq`` is fixed.

    ``magnitude`` is a peak value.
    """

    name: str
    channel: str
    magnitude: float
    phase_deg: float = 0.0
    order: int | None = None
    freq: float | None = None
    enabled: bool = True
    sequence: str | None = None

    def __post_init__(self):
        if (self.order is None) == (self.freq is None):
            raise ValueError(f"tone {self.name!r} needs exactly one of order or freq")

    @property
    def key(self):
        return ("h", self.order) if self.order is not None else ("ih", self.freq)


@dataclass(frozen=True)
class Action:
    kind: str
    targets: tuple = ()
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(self.targets))


@dataclass(frozen=True)
class Event:
    time: float
    actions: tuple

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    phases: int
    fs: float
    duration: float
    f1: float
    tones: tuple
    events: tuple = ()
    snr_db: float | None = None
    seed: int = 0
    magnitude_units: str = "peak"
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tones", tuple(self.tones))
        object.__setattr__(self, "events", tuple(self.events))
        names = [t.name for t in self.tones]
        if len(set(names)) != len(names):
            raise ValueError("tone names must be unique")
        times = [e.time for e in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("event times must be strictly increasing")
        known = set(names)
        for e in self.events:
            for a in e.actions:
                missing = [t for t in a.targets if t not in known]
                if missing:
                    raise ValueError(f"event at {e.time} s references undefined tones {missing}")
        for t in self.tones:
            if t.freq is not None and t.freq >= self.fs / 2:
                raise ValueError(f"tone {t.name!r} at {t.freq} Hz is above Nyquist")

    @property
    def channels(self) -> list:
        seen = []
        for t in self.tones:
            if t.channel not in seen:
                seen.append(t.channel)
        return seen

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.fs))

    def with_noise(self, snr_db: float | None, seed: int | None = None) -> "ScenarioSpec":
        return replace(self, snr_db=snr_db, seed=self.seed if seed is None else seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        d["tones"] = tuple(Tone(**t) for t in d["tones"])
        d["events"] = tuple(
            Event(e["time"], tuple(Action(a["kind"], tuple(a.get("targets", ())), a.get("value", 0.0)) for a in e["actions"]))
            for e in d.get("events", ())
        )
        return cls(**d)


def save_scenario(spec: ScenarioSpec, path) -> None:
    from .filters import atomic_write_text

    atomic_write_text(path, json.dumps(spec.to_dict(), indent=1))


def load_scenario(path) -> ScenarioSpec:
    with open(path) as fh:
        return ScenarioSpec.from_dict(json.load(fh))


@dataclass
class TruthOracle:
    """Exact analytic samples of every tone, per channel."""

    fs: float
    times: np.ndarray
    components: dict = field(default_factory=dict)  # channel -> {key: complex array}
    frequency: np.ndarray = None  # fundamental frequency per sample

    def tracks(self, channel: str) -> dict:
        return self.components.get(channel, {})


def _piecewise(spec: ScenarioSpec):
    """Per tone: list of (t_start, magnitude, phase_offset_rad, enabled) segments;
    plus the fundamental-frequency segments."""
    state = {t.name: [t.magnitude, math.radians(t.phase_deg), t.enabled] for t in spec.tones}
    f1 = spec.f1
    bounds = [0.0]
    tone_segs = {t.name: [(0.0, *state[t.name])] for t in spec.tones}
    f_segs = [(0.0, f1)]
    for ev in spec.events:
        for a in ev.actions:
            if a.kind == "frequency_step":
                f1 = a.value
            for name in a.targets:
                s = state[name]
                if a.kind == "scale":
                    s[0] *= a.value
                elif a.kind == "phase_step":
                    s[1] += math.radians(a.value)
                elif a.kind == "enable":
                    s[2] = True
                elif a.kind == "disable":
                    s[2] = False
        bounds.append(ev.time)
        f_segs.append((ev.time, f1))
        for name in state:
            tone_segs[name].append((ev.time, *state[name]))
    return bounds, tone_segs, f_segs


def synthesize(spec: ScenarioSpec):
    """Sample records per channel and the matching oracle.

    Noise is white Gaussian at ``spec.snr_db`` relative to the mean power of
    each channel's noiseless record; each channel draws from its own child
    stream of ``spec.seed``.
    """
    n = spec.n_samples
    t = np.arange(n) / spec.fs
    bounds, tone_segs, f_segs = _piecewise(spec)
    # index of the governing segment for every sample (event takes effect at t >= t_k)
    seg_idx = np.searchsorted(np.array(bounds), t, side="right") - 1

    # fundamental phase-accumulator in cycles at each segment start
    starts = np.array([s for s, _ in f_segs])
    freqs = np.array([f for _, f in f_segs])
    cycles = np.concatenate(([0.0], np.cumsum(freqs[:-1] * np.diff(starts))))
    f_inst = freqs[seg_idx]
    fund_cycles = cycles[seg_idx] + freqs[seg_idx] * (t - starts[seg_idx])

    records = {ch: np.zeros(n) for ch in spec.channels}
    oracle = TruthOracle(spec.fs, t, {ch: {} for ch in spec.channels}, f_inst)
    for tone in spec.tones:
        segs = tone_segs[tone.name]
        mag = np.array([s[1] for s in segs])[seg_idx]
        off = np.array([s[2] for s in segs])[seg_idx]
        on = np.array([s[3] for s in segs])[seg_idx]
        if tone.order is not None:
            theta = 2 * np.pi * tone.order * fund_cycles + off
        else:
            theta = 2 * np.pi * tone.freq * t + off
        amp = np.where(on, mag, 0.0)
        records[tone.channel] += amp * np.sin(theta)
        z = amp * np.exp(1j * (theta - np.pi / 2))
        comp = oracle.components[tone.channel]
        comp[tone.key] = comp.get(tone.key, 0) + z

    if spec.snr_db is not None:
        children = np.random.SeedSequence(spec.seed).spawn(len(spec.channels))
        for ch, ss in zip(spec.channels, children):
            rng = np.random.default_rng(ss)
            x = records[ch]
            sigma = math.sqrt(np.mean(x**2) / 10 ** (spec.snr_db / 10))
            records[ch] = x + rng.normal(0.0, sigma, n)
    return records, oracle


# ----------------------------------------------------------------------------
# built-in scenarios

_SP_ROWS = [  # order or freq, V peak, V deg, I peak, I deg
    (1, 220, 0, 10, -30),
    (58.0, 11, 66, 0.5, 34),
    (2, 20, 39, 1.2, 5),
    (142.0, 11, 37, 0.5, 85),
    (3, 44, 60.5, 4, 64),
    (4, 11, 123, 1, 77),
    (5, 30, -52, 2.2, 49),
    (262.0, 11, 42, 0.5, 12),
    (6, 2, 146, 0.6, 15),
    (7, 5, 97, 0.9, 61),
    (8, 1, 56, 0.4, 37),
    (9, 3, 43, 0.5, 53),
]


def _tone_name(ch, spec_value):
    return f"{ch}_h{spec_value}" if isinstance(spec_value, int) else f"{ch}_ih{spec_value:g}"


def single_phase_paper(snr_db: float | None = 40.0, seed: int = 0) -> ScenarioSpec:
    tones = []
    for f, vm, vp, im, ip in _SP_ROWS:
        for ch, m, p in (("v", vm, vp), ("i", im, ip)):
            kw = {"order": f} if isinstance(f, int) else {"freq": f}
            tones.append(Tone(_tone_name(ch, f), ch, float(m), float(p), **kw))
    # oscillating transient: 900 Hz (order 18 of the 50 Hz system) on the current
    tones.append(Tone("i_burst", "i", 1.1, 0.0, order=18, enabled=False))
    names = lambda ch, sel: [_tone_name(ch, f) for f, *_ in _SP_ROWS if sel(f)]  # noqa: E731
    every = lambda f: True  # noqa: E731
    not_fund = lambda f: f != 1  # noqa: E731
    vi = lambda sel: names("v", sel) + names("i", sel)  # noqa: E731
    events = [
        Event(0.7, [Action("frequency_step", (), 50.0)]),
        Event(1.3, [Action("scale", names("i", every), 1.1)]),
        Event(1.9, [Action("disable", vi(lambda f: f == 3))]),
        Event(2.09, [Action("enable", ["i_burst"])]),
        Event(2.1, [Action("disable", ["i_burst"])]),
        Event(2.7, [Action("enable", vi(lambda f: f == 3)), Action("disable", vi(lambda f: f in (2, 5)))]),
        Event(3.1, [Action("phase_step", ["i_h1"], 10.0)]),
        Event(3.5, [Action("scale", vi(every), 0.9)]),
        Event(4.1, [Action("disable", vi(not_fund))]),
    ]
    return ScenarioSpec(
        "single-phase-paper", 1, 6400.0, 4.6, 50.1, tones, events, snr_db, seed, "peak",
        "Twelve-component voltage/current with nine transient events",
    )


# representative three-phase base case (RMS): fundamental magnitude, angle
_TP_BASE_V = {"a": (272.45, 0.0), "b": (268.9, -120.8), "c": (275.1, 119.5)}
_TP_BASE_I = {"a": (133.92, -25.0), "b": (128.4, -146.0), "c": (137.6, 94.0)}
# harmonic order -> (% of phase fundamental, angle offset deg) added to order * fundamental angle
_TP_HARM_V = {3: (2.0, 10.0), 5: (1.5, -15.0), 7: (1.0, 25.0)}
_TP_HARM_I = {3: (8.0, 30.0), 5: (5.0, -20.0), 7: (3.0, 45.0)}
# interharmonic rows: freq -> phase -> (V % of U_al, V deg, I % of I_al, I deg)
_TP_IH = {
    42.0: {"a": (2.01, 66, 4.92, 34), "b": (2.03, -50, 4.95, -66), "c": (1.99, 178, 4.07, 161)},
    161.0: {"a": (2.16, 37.4, 4.55, 85), "b": (2.14, 156, 4.23, -157), "c": (2.17, -85, 4.28, -40)},
    259.0: {"a": (1.98, 42, 5, 12), "b": (2.01, -88, 4.87, -98), "c": (1.96, 170, 5, 143)},
}
_TP_SEQ = {42.0: "positive", 161.0: "negative", 259.0: "positive"}
U_AL, I_AL = 272.45, 133.92


def three_phase_paper(snr_db: float | None = 40.0, seed: int = 0) -> ScenarioSpec:
    tones = []
    for ph in "abc":
        for ch, base, harm, ref in (("v", _TP_BASE_V, _TP_HARM_V, U_AL), ("i", _TP_BASE_I, _TP_HARM_I, I_AL)):
            rms, ang = base[ph]
            name = f"{ch}{ph}"
            tones.append(Tone(f"{name}_h1", name, rms * SQRT2, ang, order=1))
            for h, (pct, off) in harm.items():
                tones.append(Tone(f"{name}_h{h}", name, pct / 100 * rms * SQRT2, h * ang + off, order=h))
            for f, rows in _TP_IH.items():
                vp, vd, ip, idg = rows[ph]
                pct, deg = (vp, vd) if ch == "v" else (ip, idg)
                tones.append(Tone(f"{name}_ih{f:g}", name, pct / 100 * ref * SQRT2, deg, freq=f, sequence=_TP_SEQ[f]))
    chan = lambda c: [t.name for t in tones if t.channel == c]  # noqa: E731
    currents = chan("ia") + chan("ib") + chan("ic")
    keep = [t.name for t in tones if t.key in (("h", 1), ("ih", 42.0))]
    drop = [t.name for t in tones if t.name not in keep]
    events = [
        Event(1.5, [Action("scale", chan("vc"), 0.9), Action("scale", chan("ic"), 1.1)]),
        Event(1.7, [Action("scale", chan("vc"), 1 / 0.9), Action("scale", chan("ic"), 1 / 1.1)]),
        Event(2.7, [Action("scale", currents, 0.5)]),
        Event(3.8, [Action("scale", keep, 0.9), Action("phase_step", keep, -20.0), Action("disable", drop)]),
    ]
    return ScenarioSpec(
        "three-phase-paper", 3, 6400.0, 4.6, 50.0, tones, events, snr_db, seed, "peak",
        "Four-wire three-phase system with 42/161/259 Hz interharmonics (representative base case)",
    )


def two_tone_56hz() -> ScenarioSpec:
    tones = [Tone("v_h1", "v", 1.0, 0.0, order=1), Tone("v_ih56", "v", 0.1, 0.0, freq=56.0)]
    return ScenarioSpec("two-tone-56hz", 1, 1600.0, 2.0, 50.0, tones, (), None, 0, "peak",
                        "Unit fundamental plus a 10 % interharmonic at 56 Hz")


def builtin_scenarios() -> dict:
    return {
        "single-phase-paper": single_phase_paper(),
        "three-phase-paper": three_phase_paper(),
        "two-tone-56hz": two_tone_56hz(),
    }


# ----------------------------------------------------------------------------
# waveform CSV


class CsvFormatError(ValueError):
    pass


def waveform_csv_text(times: np.ndarray, channels: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(channels)
    w.writerow(["time_s", *names])
    cols = [np.asarray(channels[c], dtype=float) for c in names]
    for k, tk in enumerate(times):
        w.writerow([repr(float(tk)), *(repr(float(c[k])) for c in cols)])
    return buf.getvalue()


def write_waveform_csv(path, times, channels: dict) -> None:
    from .filters import atomic_write_text

    atomic_write_text(path, waveform_csv_text(times, channels))


def read_waveform_csv(path) -> tuple[np.ndarray, dict]:
    """Read ``time_s,<channel>...``; raises ``CsvFormatError`` naming the bad line."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if not header or header[0].strip() != "time_s":
            raise CsvFormatError(f"{path}:1: first column must be time_s")
        names = [h.strip() for h in header[1:]]
        if not names:
            raise CsvFormatError(f"{path}:1: no channel columns")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise CsvFormatError(f"{path}:{line_no}: non-numeric field") from None
    if len(rows) < 2:
        raise CsvFormatError(f"{path}: fewer than two samples")
    data = np.array(rows)
    return data[:, 0], {n: data[:, i + 1] for i, n in enumerate(names)}


def sample_rate(times: np.ndarray) -> float:
    """Sample rate implied by a uniform time column."""
    dt = np.diff(times)
    step = float(np.median(dt))
    if step <= 0 or np.max(np.abs(dt - step)) > 1e-6 * step + 1e-12:
        raise CsvFormatError("time_s column is not uniformly increasing")
    return round(1.0 / step, 6)


__all__ = [
    "Tone",
    "Action",
    "Event",
    "ScenarioSpec",
    "TruthOracle",
    "synthesize",
    "builtin_scenarios",
    "single_phase_paper",
    "three_phase_paper",
    "two_tone_56hz",
    "save_scenario",
    "load_scenario",
    "write_waveform_csv",
    "read_waveform_csv",
    "waveform_csv_text",
    "sample_rate",
    "CsvFormatError",
]
