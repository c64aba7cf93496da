"""Exact Fourier-multiplier solution of u_tt - Delta u + u_t = 0.

Each Fourier mode obeys the damped oscillator w'' + w' + |xi|^2 w = 0
with characteristic roots lambda = -1/2 +- sqrt(1/4 - |xi|^2).  The
data-to-solution multipliers

    u_hat(t) = K0(|xi|, t) phi_hat + K1(|xi|, t) psi_hat

are evaluated in cancellation-free forms: exp(-t/2) cosh/sinh below the
resonance |xi| = 1/2, exp(-t/2) cos/sin above, and a power series in
sigma t^2 (sigma = 1/4 - |xi|^2) close to it.  The time derivatives
follow from the exact identities dK0 = -|xi|^2 K1 and dK1 = K0 - K1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridField, WaveState, hdot_norm, lp_norm

__all__ = [
    "RESONANT_HALF_WIDTH",
    "PropagatorSymbols",
    "propagator_symbols",
    "multipliers",
    "propagate",
    "linear_norm_series",
    "energy",
    "DecayFit",
    "decay_fit",
]

RESONANT_HALF_WIDTH = 1e-4

_LOW, _RESONANT, _HIGH = "LowFreq", "Resonant", "HighFreq"


@dataclass
class PropagatorSymbols:
    """Characteristic roots and regime tags per grid frequency."""

    xi_sq: np.ndarray
    lam_plus: np.ndarray
    lam_minus: np.ndarray
    regime: np.ndarray  # of strings {LowFreq, Resonant, HighFreq}


def propagator_symbols(spec):
    xi_sq = spec.wavenumber_sq()
    root = np.sqrt(np.asarray(0.25 - xi_sq, dtype=complex))
    lam_plus = -0.5 + root
    lam_minus = -0.5 - root
    xi = np.sqrt(xi_sq)
    regime = np.where(np.abs(xi - 0.5) < RESONANT_HALF_WIDTH, _RESONANT,
                      np.where(xi < 0.5, _LOW, _HIGH))
    return PropagatorSymbols(xi_sq, lam_plus, lam_minus, regime)


def _phi_series(z):
    """phi0(z) = sum z^m/(2m)!, phi1(z) = sum z^m/(2m+1)!  (|z| small)."""
    phi0 = np.ones_like(z)
    phi1 = np.ones_like(z)
    term0 = np.ones_like(z)
    term1 = np.ones_like(z)
    for m in range(1, 40):
        term0 = term0 * z / ((2 * m - 1) * (2 * m))
        term1 = term1 * z / ((2 * m) * (2 * m + 1))
        phi0 += term0
        phi1 += term1
        if np.max(np.abs(term0)) < 1e-18 and np.max(np.abs(term1)) < 1e-18:
            break
    return phi0, phi1


def multipliers(xi_sq, t):
    """Return (K0, K1, dK0, dK1) for |xi|^2 array at time t >= 0."""
    if t < 0:
        raise ValueError(f"propagation time must be non-negative, got {t}")
    xi_sq = np.asarray(xi_sq, dtype=float)
    sigma = 0.25 - xi_sq
    envelope = math.exp(-0.5 * t)

    K0 = np.empty_like(sigma)
    K1 = np.empty_like(sigma)
    z = sigma * t * t
    near = np.abs(z) < 0.25
    low = (sigma > 0) & ~near
    high = (sigma < 0) & ~near

    if near.any():
        phi0, phi1 = _phi_series(z[near])
        K1[near] = t * phi1
        K0[near] = phi0 + 0.5 * t * phi1
    if low.any():
        b = np.sqrt(sigma[low])
        sh, ch = np.sinh(b * t), np.cosh(b * t)
        K1[low] = sh / b
        K0[low] = ch + 0.5 * sh / b
    if high.any():
        b = np.sqrt(-sigma[high])
        sn, cs = np.sin(b * t), np.cos(b * t)
        K1[high] = sn / b
        K0[high] = cs + 0.5 * sn / b

    K0 *= envelope
    K1 *= envelope
    return K0, K1, -xi_sq * K1, K0 - K1


def propagate(state, dt):
    """Evolve Cauchy data exactly by dt under the linear damped flow."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if not (state.u.is_finite() and state.v.is_finite()):
        raise ValueError("cannot propagate a non-finite state")
    if dt == 0.0:
        return state.copy()
    spec = state.spec
    xi_sq = spec.wavenumber_sq()
    K0, K1, dK0, dK1 = multipliers(xi_sq, dt)
    u_hat = np.fft.fftn(state.u.values)
    v_hat = np.fft.fftn(state.v.values)
    u_new = np.fft.ifftn(K0 * u_hat + K1 * v_hat).real
    v_new = np.fft.ifftn(dK0 * u_hat + dK1 * v_hat).real
    return WaveState(state.time + dt, GridField(spec, u_new), GridField(spec, v_new))


def energy(state):
    """E = 1/2 |u_t|_{L2}^2 + 1/2 |grad u|_{L2}^2 (non-increasing linearly)."""
    return 0.5 * lp_norm(state.v, 2) ** 2 + 0.5 * hdot_norm(state.u, 1) ** 2


def linear_norm_series(state, times):
    """Norm diagnostics of the linear flow at the requested times.

    Propagation is sample-to-sample (the exact flow is a semigroup), so
    the cost is one transform pair per sample regardless of spacing.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] < state.time:
        raise ValueError("times must be increasing and start at or after the state time")
    out = {key: [] for key in ("t", "L1", "L2", "Linf", "H1dot", "energy")}
    current = state
    for t in times:
        current = propagate(current, t - current.time)
        out["t"].append(t)
        out["L1"].append(lp_norm(current.u, 1))
        out["L2"].append(lp_norm(current.u, 2))
        out["Linf"].append(lp_norm(current.u, np.inf))
        out["H1dot"].append(hdot_norm(current.u, 1))
        out["energy"].append(energy(current))
    return {key: np.asarray(vals) for key, vals in out.items()}


@dataclass
class DecayFit:
    """Least-squares slope of log(norm) against log(1+t)."""

    norm: str
    window: tuple
    exponent: float
    residual: float
    n_points: int


def decay_fit(series, norm, window):
    """Fit the decay exponent of a norm series over a (1+t) window.

    Requires at least 20 samples spanning a decade of 1+t, matching how
    the decay estimates are stated (in powers of 1+t, not t).
    """
    t = series["t"]
    values = series[norm]
    t_min, t_max = window
    mask = (t >= t_min) & (t <= t_max) & (values > 0)
    if np.count_nonzero(mask) < 20:
        raise ValueError("window holds fewer than 20 usable samples")
    x = np.log1p(t[mask])
    if x[-1] - x[0] < math.log(10.0):
        raise ValueError("window spans less than one decade of 1+t")
    y = np.log(values[mask])
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return DecayFit(norm=norm, window=(t_min, t_max), exponent=float(coef[1]),
                    residual=float(np.sqrt(np.mean(resid ** 2))), n_points=int(mask.sum()))
