"""Remez exchange for linear-phase FIR filters (types I and II).

The amplitude response is written as ``A(w) = sum_m b[m] cos(c[m] w)`` with
``c[m] = m`` for odd lengths and ``c[m] = m + 1/2`` for even lengths. Extremal
frequencies are refined off-grid with Newton steps on ``A'(w)``, so on
convergence the continuous error peaks equal the levelled ripple to working
precision rather than to grid resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure


@dataclass(frozen=True)
class RemezResult:
    taps: np.ndarray
    ripple: float  # levelled weighted error |delta|
    extremal: np.ndarray  # radian frequencies of the final alternation set
    iterations: int


def _basis_orders(numtaps: int) -> np.ndarray:
    if numtaps % 2:
        return np.arange((numtaps + 1) // 2, dtype=float)
    return np.arange(numtaps // 2) + 0.5


def _taps_from_coeffs(b: np.ndarray, numtaps: int) -> np.ndarray:
    h = np.zeros(numtaps)
    if numtaps % 2:
        c = numtaps // 2
        h[c] = b[0]
        h[c + 1 :] = b[1:] / 2
        h[:c] = b[1:][::-1] / 2
    else:
        r = numtaps // 2
        h[r:] = b / 2
        h[:r] = b[::-1] / 2
    return h


def _amplitude(b, c, w, deriv=0):
    arg = np.outer(w, c)
    if deriv == 0:
        return np.cos(arg) @ b
    if deriv == 1:
        return -np.sin(arg) @ (b * c)
    return -np.cos(arg) @ (b * c * c)


def _alternating_subset(w, e, size):
    """Reduce sorted candidate extrema to an alternating set of ``size`` points."""
    # merge runs of equal sign, keeping the largest magnitude
    keep_w, keep_e = [w[0]], [e[0]]
    for wi, ei in zip(w[1:], e[1:]):
        if np.sign(ei) == np.sign(keep_e[-1]):
            if abs(ei) > abs(keep_e[-1]):
                keep_w[-1], keep_e[-1] = wi, ei
        else:
            keep_w.append(wi)
            keep_e.append(ei)
    while len(keep_e) > size:
        excess = len(keep_e) - size
        mags = np.abs(keep_e)
        if excess == 1:
            drop = 0 if mags[0] < mags[-1] else len(keep_e) - 1
            del keep_w[drop], keep_e[drop]
            continue
        i = int(np.argmin(mags))
        if i in (0, len(keep_e) - 1):
            del keep_w[i], keep_e[i]
        else:
            # removing an interior point makes its neighbours share a sign
            lo, hi = i - 1, i + 1
            loser = lo if mags[lo] < mags[hi] else hi
            for j in sorted((i, loser), reverse=True):
                del keep_w[j], keep_e[j]
    return np.array(keep_w), np.array(keep_e)


def remez_linear_phase(
    numtaps: int,
    bands,
    desired,
    weight=None,
    grid_density: int = 32,
    maxiter: int = 100,
    tol: float = 1e-12,
) -> RemezResult:
    """Minimax linear-phase FIR design.

    Parameters
    ----------
    numtaps : int
        Filter length. Even lengths give type-II filters (zero at w = pi).
    bands : sequence of (lo, hi)
        Band edges in radians within [0, pi].
    desired, weight : sequence of float
        Constant desired amplitude and weight per band.
    """
    c = _basis_orders(numtaps)
    r = c.size
    bands = [(float(lo), float(hi)) for lo, hi in bands]
    desired = np.asarray(desired, dtype=float)
    weight = np.ones(len(bands)) if weight is None else np.asarray(weight, dtype=float)
    total = sum(hi - lo for lo, hi in bands)

    grid, band_id = [], []
    for k, (lo, hi) in enumerate(bands):
        npts = max(int(np.ceil(grid_density * r * (hi - lo) / total)), 8)
        grid.append(np.linspace(lo, hi, npts))
        band_id.append(np.full(npts, k))
    grid = np.concatenate(grid)
    band_id = np.concatenate(band_id)
    D = desired[band_id]
    W = weight[band_id]

    # ripple this small is indistinguishable from rounding noise
    floor = 1e-13 * max(float(np.max(np.abs(desired) * weight)), 1.0)

    ext_w = grid[np.round(np.linspace(0, grid.size - 1, r + 1)).astype(int)]
    ext_b = band_id[np.round(np.linspace(0, grid.size - 1, r + 1)).astype(int)]

    for it in range(1, maxiter + 1):
        signs = (-1.0) ** np.arange(r + 1)
        A = np.hstack([np.cos(np.outer(ext_w, c)), (signs / weight[ext_b])[:, None]])
        sol = np.linalg.solve(A, desired[ext_b])
        b, delta = sol[:-1], sol[-1]

        err = W * (D - _amplitude(b, c, grid))
        cand_w, cand_b = [], []
        for k, (lo, hi) in enumerate(bands):
            sel = np.flatnonzero(band_id == k)
            e = err[sel]
            g = grid[sel]
            cand_w.append(g[0])
            cand_b.append(k)
            interior = np.flatnonzero(
                (np.abs(e[1:-1]) >= np.abs(e[:-2])) & (np.abs(e[1:-1]) > np.abs(e[2:]))
            ) + 1
            for i in interior:
                # bracket by the neighbouring grid points so Newton cannot jump to the next extremum
                cand_w.append(_refine_extremum(b, c, g[i], g[i - 1], g[i + 1]))
                cand_b.append(k)
            cand_w.append(g[-1])
            cand_b.append(k)
        # the current reference alternates at |delta|, so it always completes the set
        cand_w = np.concatenate((cand_w, ext_w))
        cand_b = np.concatenate((cand_b, ext_b))
        order = np.argsort(cand_w, kind="stable")
        cand_w, cand_b = cand_w[order], cand_b[order]
        cand_e = weight[cand_b] * (desired[cand_b] - _amplitude(b, c, cand_w))

        peak = np.abs(cand_e).max()
        if peak - abs(delta) <= max(tol * abs(delta), floor):
            return RemezResult(_taps_from_coeffs(b, numtaps), abs(delta), ext_w, it)
        new_w, new_e = _alternating_subset(cand_w, cand_e, r + 1)
        if new_w.size < r + 1:
            hint = "; the ripple is near double-precision rounding" if abs(delta) < 1e-9 else ""
            raise ConvergenceFailure(f"lost alternation while exchanging extremal points{hint}")
        ext_w = new_w
        ext_b = np.array([_band_of(w, bands) for w in new_w])
    raise ConvergenceFailure(f"equiripple exchange did not converge in {maxiter} iterations")


def _band_of(w, bands):
    for k, (lo, hi) in enumerate(bands):
        if lo - 1e-12 <= w <= hi + 1e-12:
            return k
    raise ValueError(f"frequency {w} outside all bands")


def _refine_extremum(b, c, w0, lo, hi, steps=8):
    w = w0
    for _ in range(steps):
        d1 = _amplitude(b, c, np.array([w]), 1)[0]
        d2 = _amplitude(b, c, np.array([w]), 2)[0]
        if d2 == 0:
            break
        step = d1 / d2
        w_new = min(max(w - step, lo), hi)
        if abs(w_new - w) < 1e-15:
            w = w_new
            break
        w = w_new
    return w
