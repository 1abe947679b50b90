"""Undecimated packet tree: structure, band map, extraction, spectral shortcut."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqwave.dsp import SampleWindow, analytic_spectrum, hilbert_analytic, ssm_shift
from pqwave.errors import TargetOnBandEdge, WindowTooShort
from pqwave.filters import qmf_pair
from pqwave.pipeline import compute_fssm
from pqwave.uwpt import (
    extract_band,
    leaf_for_frequency,
    mask_extract,
    min_length,
    node_band_map,
    upsample_filter,
    uwpt_decompose,
)

FS = 1600.0
N = 3200  # 0.5 Hz bins, so band-centre tones such as 87.5 Hz sit on the grid


def tone(f, amp=1.0, phase=0.0, n=N):
    t = np.arange(n) / FS
    return amp * np.cos(2 * np.pi * f * t + phase)


def test_upsample_identity_level():
    assert np.array_equal(upsample_filter([1.0, 2.0, 3.0], 1), [1.0, 2.0, 3.0])


def test_upsample_inserts_zeros():
    out = upsample_filter([1.0, 2.0], 3)
    assert np.array_equal(out, [1.0, 0, 0, 0, 2.0])
    assert out.size == 2 ** 2 * (2 - 1) + 1


def test_impulse_gives_filters(paper_pair):
    x = np.zeros(128)
    x[0] = 1.0
    tree = uwpt_decompose(SampleWindow(x, FS), paper_pair, 1)
    assert np.allclose(tree.node(1, 0).coeffs[:50], paper_pair.h0, atol=1e-14)
    assert np.allclose(tree.node(1, 1).coeffs[:50], paper_pair.h1, atol=1e-14)


def test_level_matches_explicit_convolution(db40):
    r = np.random.default_rng(2).normal(size=400)
    tree = uwpt_decompose(SampleWindow(r, FS), db40, 2)
    parent = tree.node(1, 1).coeffs
    h = upsample_filter(db40.h0, 2)
    direct = np.zeros(400)
    for k, hk in enumerate(h):
        direct += hk * np.roll(parent, k)
    assert np.allclose(tree.node(2, 2).coeffs, direct, atol=1e-12)


def test_constant_input(paper_pair):
    tree = uwpt_decompose(SampleWindow(np.full(N, 3.0), FS), paper_pair, 5)
    dc = leaf_for_frequency(paper_pair, 5, FS, 0.0)
    for leaf in tree.levels[-1]:
        expect = 3.0 if leaf.index == dc else 0.0
        assert np.allclose(leaf.coeffs, expect, atol=1e-9)


def test_length_preserved_everywhere(paper_pair):
    tree = uwpt_decompose(SampleWindow(tone(60.0), FS), paper_pair, 5)
    assert all(len(node) == N for level in tree.levels for node in level)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31 - 1))
def test_linearity(alpha, beta, seed):
    from pqwave.filters import builtin_pair

    pair = builtin_pair("db40")
    r = np.random.default_rng(seed)
    x, y = r.normal(size=700), r.normal(size=700)
    tx = uwpt_decompose(SampleWindow(x, FS), pair, 3)
    ty = uwpt_decompose(SampleWindow(y, FS), pair, 3)
    txy = uwpt_decompose(SampleWindow(alpha * x + beta * y, FS), pair, 3)
    for key, node in txy.nodes.items():
        ref = alpha * tx.nodes[key].coeffs + beta * ty.nodes[key].coeffs
        assert np.max(np.abs(node.coeffs - ref)) <= 1e-10 * (1 + np.max(np.abs(ref)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 699), st.integers(0, 2**31 - 1))
def test_time_invariance(shift, seed):
    from pqwave.filters import builtin_pair

    pair = builtin_pair("db40")
    x = np.random.default_rng(seed).normal(size=700)
    a = uwpt_decompose(SampleWindow(x, FS), pair, 3)
    b = uwpt_decompose(SampleWindow(np.roll(x, shift), FS), pair, 3)
    for key, node in a.nodes.items():
        assert np.max(np.abs(np.roll(node.coeffs, shift) - b.nodes[key].coeffs)) < 1e-12


def test_energy_tiling(paper_pair):
    tree = uwpt_decompose(SampleWindow(tone(87.5), FS), paper_pair, 5)
    energy = {leaf.index: np.sum(leaf.coeffs**2) for leaf in tree.levels[-1]}
    own = leaf_for_frequency(paper_pair, 5, FS, 87.5)
    assert energy[own] / sum(energy.values()) >= 0.99


def test_band_map_level_one(paper_pair):
    bands = node_band_map(paper_pair, 1, FS)
    assert bands[0][0] == 0 and bands[1][1] == FS / 2
    assert abs(bands[0][1] - FS / 4) < 0.5 and bands[0][1] == bands[1][0]


def test_band_map_paper_level_five(paper_pair):
    bands = node_band_map(paper_pair, 5, FS)
    assert len(bands) == 32
    edges = sorted(lo for lo, _ in bands.values())
    assert np.allclose(edges, np.arange(32) * 25.0, atol=1.5)


def test_band_map_db45_level_three(db45):
    bands = node_band_map(db45, 3, FS)
    widths = sorted(hi - lo for lo, hi in bands.values())
    assert len(bands) == 8
    assert np.allclose(widths, 100.0, atol=2.0)


def test_extract_band_centre_tone(paper_pair):
    x = SampleWindow(tone(87.5, 1.0, 0.4), FS)
    out = extract_band(uwpt_decompose(x, paper_pair, 5), 87.5)
    tr = hilbert_analytic(out)
    inner = slice(200, -200)
    assert np.max(np.abs(tr.amplitude[inner] - 1)) < 0.005
    t = np.arange(N) / FS
    dphi = np.angle(np.exp(1j * (tr.phase - 2 * np.pi * 87.5 * t - 0.4)))[inner]
    assert np.degrees(np.max(np.abs(dphi))) < 1.0


def test_tone_on_band_edge_rejected(paper_pair):
    tree = uwpt_decompose(SampleWindow(tone(75.0), FS), paper_pair, 5)
    with pytest.raises(TargetOnBandEdge):
        extract_band(tree, 75.0)


def test_leakage_from_other_band(paper_pair):
    x = SampleWindow(tone(112.5), FS)
    out = extract_band(uwpt_decompose(x, paper_pair, 5), 87.5)
    assert np.sqrt(np.mean(out.samples**2)) < 0.01 * np.sqrt(0.5)


def test_zero_signal(paper_pair):
    out = extract_band(uwpt_decompose(SampleWindow(np.zeros(N), FS), paper_pair, 5), 87.5)
    assert not np.any(out.samples)


def test_window_too_short(paper_pair):
    need = min_length(paper_pair, 5)
    with pytest.raises(WindowTooShort):
        uwpt_decompose(SampleWindow(np.zeros(need - 1), FS), paper_pair, 5)


def test_pruned_tree_matches_full(paper_pair):
    x = SampleWindow(tone(60.0) + tone(130.0, 0.3), FS)
    full = uwpt_decompose(x, paper_pair, 4)
    part = uwpt_decompose(x, paper_pair, 4, targets=[3])
    assert set(part.nodes) == {(1, 0), (2, 0), (3, 1), (4, 3)}
    assert np.array_equal(part.leaf(3).coeffs, full.leaf(3).coeffs)
    with pytest.raises(KeyError):
        part.leaf(0)


def test_two_tones_split(paper_pair):
    assert leaf_for_frequency(paper_pair, 5, FS, 72.0) != leaf_for_frequency(paper_pair, 5, FS, 78.0)


def test_spectral_shortcut_matches_time_domain_route(paper_pair):
    # shift, decompose, extract, shift back == one multiplication of the analytic spectrum
    x = SampleWindow(tone(50.0) + tone(56.0, 0.1), FS)
    shift = compute_fssm(56.0, 50.0, 25.0)
    slow = ssm_shift(extract_band(uwpt_decompose(ssm_shift(x, shift), paper_pair, 5), 50.0 + shift), -shift)
    spec = analytic_spectrum(x.samples)
    fast = np.fft.ifft(mask_extract(spec, paper_pair, 5, FS, 50.0, int(round(shift * N / FS)))).real
    assert np.max(np.abs(fast - slow.samples)) < 1e-9


def test_mask_of_mirror_pair_is_complementary():
    # a Haar tree splits everything between its two leaves
    pair = qmf_pair([0.5, 0.5])
    x = tone(100.0) + tone(600.0)
    spec = analytic_spectrum(x)
    lo = mask_extract(spec, pair, 1, FS, 100.0, strict=False)
    hi = mask_extract(spec, pair, 1, FS, 600.0, strict=False)
    assert np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
