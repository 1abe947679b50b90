"""Half-band design, lift, factorization, QMF mirror, Daubechies pairs, level responses."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqwave.dsp import freq_response
from pqwave.filters import (
    HalfBandFilter,
    design_daubechies,
    design_halfband,
    design_paper_pair,
    frequency_response,
    load_pair,
    nonnegative_lift,
    orthogonality_residual,
    qmf_pair,
    save_pair,
    spectral_factorize,
    transition_width_hz,
    zero_phase_amplitude,
)

W = np.linspace(0, np.pi, 8001)


def test_halfband_structure():
    hlf = design_halfband(99, 0.47)
    h = hlf.coeffs
    c = h.size // 2
    assert h.size == 99
    assert h[c] == 0.5
    # every second tap off the centre vanishes
    assert np.all(h[c + 2 :: 2] == 0) and np.all(h[c - 2 :: -2] == 0)
    assert np.allclose(h, h[::-1], atol=0)


def test_halfband_complementarity():
    hlf = design_halfband(99, 0.47)
    a = hlf.amplitude(W) + hlf.amplitude(np.pi - W)
    assert np.max(np.abs(a - 1)) <= 2 * hlf.delta


def test_halfband_ripple_is_measured_in_stopband():
    hlf = design_halfband(99, 0.47)
    ws = np.linspace(0.53 * np.pi, np.pi, 20001)
    assert abs(np.max(np.abs(hlf.amplitude(ws))) - hlf.delta) < 1e-9


def test_smallest_halfband():
    h = design_halfband(7, 0.4).coeffs
    assert h.size == 7 and h[3] == 0.5 and h[1] == h[5] == 0


@pytest.mark.parametrize("order", [98, 100])
def test_even_order_rejected(order):
    with pytest.raises(ValueError, match="odd"):
        design_halfband(order)


def test_bad_passband_edge_rejected():
    with pytest.raises(ValueError):
        design_halfband(99, 0.5)


def test_cqmf_needs_zero_at_nyquist():
    with pytest.raises(ValueError, match="3 mod 8"):
        design_paper_pair(95, 0.47)


def test_lift_is_nonnegative_and_complementary():
    hlf = design_halfband(99, 0.47)
    p = nonnegative_lift(hlf)
    a = zero_phase_amplitude(p, W)
    assert a.min() >= -1e-12
    assert np.max(np.abs(a + zero_phase_amplitude(p, np.pi - W) - 1)) < 1e-12


def test_lift_without_ripple_is_identity():
    p = nonnegative_lift(HalfBandFilter(np.array([0.25, 0.5, 0.25]), 0.25, 0.0))
    assert np.array_equal(p, [0.25, 0.5, 0.25])


def test_factorization_round_trip(designed_pair):
    p = nonnegative_lift(design_halfband(99, 0.47))
    h0 = designed_pair.h0
    assert np.max(np.abs(np.convolve(h0, h0[::-1]) - p)) < 1e-8
    assert abs(h0.sum() - 1) < 1e-12


def test_factorization_degree_two():
    assert np.allclose(spectral_factorize([0.25, 0.5, 0.25]), [0.5, 0.5], atol=1e-14)


def test_factor_is_minimum_phase(designed_pair):
    assert np.max(np.abs(np.roots(designed_pair.h0))) <= 1 + 1e-6


def test_factorization_rejects_asymmetric():
    with pytest.raises(ValueError):
        spectral_factorize([0.1, 0.5, 0.4])


def test_builtin_pair_matches_fresh_design(paper_pair, designed_pair):
    assert np.max(np.abs(paper_pair.h0 - designed_pair.h0)) < 1e-12


def test_qmf_mirror_of_two_taps():
    pair = qmf_pair([0.3, 0.7])
    assert np.array_equal(pair.h1, [-0.7, 0.3])


def test_qmf_identities(paper_pair):
    h0, h1 = paper_pair.h0, paper_pair.h1
    assert paper_pair.n_fb == 50
    assert abs(h0.sum() - 1) < 1e-10
    assert abs(h1.sum()) < 1e-10
    m0 = np.abs(freq_response(h0, W))
    m1 = np.abs(freq_response(h1, W))
    assert np.max(np.abs(m1 - np.abs(freq_response(h0, np.pi - W)))) < 1e-10
    # power complementarity with the DC-gain-1 convention
    assert np.max(np.abs(m0**2 + m1**2 - 1)) < 1e-8


def test_product_identity(paper_pair):
    p = np.convolve(paper_pair.h0, paper_pair.h0[::-1])
    c = p.size // 2
    # half-band product: zero even-offset lags, 0.5 at the centre (1e-8)
    assert abs(p[c] - 0.5) < 1e-8
    assert np.max(np.abs(p[c + 2 :: 2])) < 1e-8


def test_haar():
    pair = design_daubechies(1)
    assert np.allclose(pair.h0, [0.5, 0.5], atol=1e-15)
    assert np.allclose(pair.h1, [-0.5, 0.5], atol=1e-15)


def test_db2_closed_form():
    s3 = math.sqrt(3)
    expect = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / 8
    assert np.allclose(design_daubechies(2).h0, expect, atol=1e-14)


def test_db40_orthogonality(db40):
    assert db40.n_fb == 80
    assert orthogonality_residual(db40.h0) < 1e-8
    assert abs(db40.h0.sum() - 1) < 1e-12


def test_daubechies_bad_order():
    with pytest.raises(ValueError):
        design_daubechies(0)


@pytest.mark.parametrize("K", [3, 8, 20])
def test_daubechies_vanishing_moments(K):
    h1 = design_daubechies(K).h1
    n = np.arange(h1.size, dtype=float)
    n -= n.mean()
    for m in range(min(K, 4)):
        assert abs(np.sum(h1 * n**m)) < 1e-8 * np.sum(np.abs(h1) * np.abs(n) ** m + 1)


def test_level5_widths(paper_pair, db45):
    paper = transition_width_hz(paper_pair, 5, 1600)
    db = transition_width_hz(db45, 5, 1600)
    assert 2 <= paper <= 4
    assert 8 <= db <= 12
    assert paper < db


def test_ripple_tradeoff(paper_pair, db45):
    # the narrow transition is bought with a higher stopband floor
    assert paper_pair.stopband_ripple > db45.stopband_ripple


def test_level_response_bands_tile(paper_pair):
    resp = frequency_response(paper_pair, 3, 1600, 1 << 13)
    lows = sorted(b[0] for b in resp.bands)
    assert lows[0] == 0.0
    assert len(resp.bands) == 8


def test_coefficient_file_round_trip(tmp_path, paper_pair):
    path = tmp_path / "pair.json"
    save_pair(paper_pair, path)
    back = load_pair(path)
    assert back == paper_pair
    assert back.wp == paper_pair.wp


@settings(max_examples=12, deadline=None)
@given(st.sampled_from([11, 19, 27, 35, 43, 51, 59, 67]), st.floats(0.40, 0.49))
def test_design_chain_properties(order, wp):
    hlf = design_halfband(order, wp)
    a = hlf.amplitude(W) + hlf.amplitude(np.pi - W)
    assert np.max(np.abs(a - 1)) <= 2 * hlf.delta + 1e-12
    p = nonnegative_lift(hlf)
    assert zero_phase_amplitude(p, W).min() >= -1e-12
    h0 = spectral_factorize(p)
    assert np.max(np.abs(np.convolve(h0, h0[::-1]) - p)) < 1e-8
    pair = qmf_pair(h0)
    assert abs(pair.h0.sum() - 1) < 1e-8 and abs(pair.h1.sum()) < 1e-8
