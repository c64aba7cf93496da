"""Time integration of u_tt - Delta u + u_t = h(u) and blow-up detection.

The stepper is Strang splitting around the exact linear propagator:

    kick   v <- v + (dt/2) h(u)
    drift  exact linear flow over dt
    kick   v <- v + (dt/2) h(u)

which is second order and inherits the linear decay structure exactly
(h = 0 reduces to the exact flow).  Blow-up is detected operationally:
the sup norm crossing a threshold, non-finite values, or the adaptive
step collapsing.  True nonexistence is asymptotic and the detected time
is an upper proxy for the lifespan, not a sharp estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridError, GridField, WaveState, hdot_norm, lp_norm, sobolev_norm
from .linear import linear_norm_series, multipliers, propagate

__all__ = [
    "EvolveConfig",
    "Trajectory",
    "Outcome",
    "BlowupSignal",
    "step",
    "evolve",
    "xnorm",
    "xnorm_weight",
    "picard_verify",
    "lifespan_sweep",
    "a_norm",
    "make_data",
]

T_INFINITE = math.inf


class BlowupSignal(RuntimeError):
    """Raised internally when a step produces non-finite values."""

    def __init__(self, time):
        super().__init__(f"non-finite values at t={time}")
        self.time = time


class Outcome:
    COMPLETED = "CompletedHorizon"
    BLEW_UP = "BlewUpAt"
    STEP_COLLAPSE = "StepCollapse"


@dataclass
class EvolveConfig:
    grid: "GridSpec"
    nonlinearity: object  # anything with h_eval
    data: WaveState
    dt: float
    t_max: float
    blowup_threshold: float = 1e6
    dt_min: float = 1e-10
    sample_stride: int = 10
    keep_fields: bool = True

    def __post_init__(self):
        if self.dt <= 0 or self.t_max <= 0:
            raise ValueError("dt and t_max must be positive")
        if self.blowup_threshold <= 1:
            raise ValueError("blowup_threshold must exceed 1")
        if self.data.spec != self.grid:
            raise ValueError("data grid does not match configured grid")

    @property
    def sample_dt(self):
        return self.dt * self.sample_stride


@dataclass
class Trajectory:
    """Sampled states plus per-sample norm diagnostics."""

    spec: "GridSpec"
    times: np.ndarray
    norms: dict
    xnorm_running: np.ndarray
    outcome: str
    t_est: float
    u_samples: list = field(default_factory=list)
    v_samples: list = field(default_factory=list)

    @property
    def xnorm(self):
        return float(self.xnorm_running[-1]) if len(self.xnorm_running) else 0.0

    def state_at(self, index):
        return WaveState(float(self.times[index]),
                         GridField(self.spec, self.u_samples[index]),
                         GridField(self.spec, self.v_samples[index]))


def step(state, dt, nonlinearity):
    """One Strang split step; raises BlowupSignal on non-finite output."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    half = 0.5 * dt * nonlinearity.h_eval(state.u.values)
    kicked = WaveState(state.time, state.u, GridField(state.spec, state.v.values + half))
    drifted = propagate(kicked, dt)
    half = 0.5 * dt * nonlinearity.h_eval(drifted.u.values)
    out = WaveState(drifted.time, drifted.u, GridField(state.spec, drifted.v.values + half))
    if not (out.u.is_finite() and out.v.is_finite()):
        raise BlowupSignal(state.time)
    return out


def xnorm_weight(state, dimension):
    """The time-weighted sum tracked by the solution-space norm:

    sum_{k=0,1} (1+t)^{(n+2k)/4} |grad^k u|_{L2} + (1+t)^{n/2} |u|_{Linf}.
    """
    n = dimension
    t = state.time
    return ((1.0 + t) ** (n / 4.0) * lp_norm(state.u, 2)
            + (1.0 + t) ** ((n + 2.0) / 4.0) * hdot_norm(state.u, 1)
            + (1.0 + t) ** (n / 2.0) * lp_norm(state.u, np.inf))


def _record(traj_norms, state, dimension):
    traj_norms["L1"].append(lp_norm(state.u, 1))
    traj_norms["L2"].append(lp_norm(state.u, 2))
    traj_norms["Linf"].append(lp_norm(state.u, np.inf))
    traj_norms["H1dot"].append(hdot_norm(state.u, 1))
    return xnorm_weight(state, dimension)


def evolve(config):
    """Advance to the horizon or until blow-up is detected.

    The step halves whenever the sup norm more than doubles across one
    step (growth control near blow-up); a step below dt_min is reported
    as StepCollapse with the last reliable time.
    """
    n = config.grid.dimension
    state = config.data.copy()
    dt = config.dt
    times = [state.time]
    norms = {key: [] for key in ("L1", "L2", "Linf", "H1dot")}
    xrun = [_record(norms, state, n)]
    u_samples = [state.u.values.copy()] if config.keep_fields else []
    v_samples = [state.v.values.copy()] if config.keep_fields else []
    next_sample = state.time + config.sample_dt
    outcome, t_est = Outcome.COMPLETED, T_INFINITE

    while state.time < config.t_max - 1e-12:
        dt_step = min(dt, config.t_max - state.time, next_sample - state.time)
        if dt_step <= 0:
            dt_step = min(dt, config.t_max - state.time)
        size_before = float(np.max(np.abs(state.u.values)) + np.max(np.abs(state.v.values)))
        try:
            candidate = step(state, dt_step, config.nonlinearity)
        except BlowupSignal:
            outcome, t_est = Outcome.BLEW_UP, state.time
            break
        sup_after = float(np.max(np.abs(candidate.u.values)))
        size_after = sup_after + float(np.max(np.abs(candidate.v.values)))
        if size_after > 2.0 * max(size_before, 1e-14) and dt_step > config.dt_min:
            dt = 0.5 * dt_step
            if dt < config.dt_min:
                outcome, t_est = Outcome.STEP_COLLAPSE, state.time
                break
            continue
        state = candidate
        if sup_after > config.blowup_threshold:
            outcome, t_est = Outcome.BLEW_UP, state.time
            break
        if state.time >= next_sample - 1e-12 or state.time >= config.t_max - 1e-12:
            times.append(state.time)
            xrun.append(max(xrun[-1], _record(norms, state, n)))
            if config.keep_fields:
                u_samples.append(state.u.values.copy())
                v_samples.append(state.v.values.copy())
            while next_sample <= state.time + 1e-12:
                next_sample += config.sample_dt

    return Trajectory(
        spec=config.grid,
        times=np.asarray(times),
        norms={key: np.asarray(vals) for key, vals in norms.items()},
        xnorm_running=np.asarray(xrun),
        outcome=outcome,
        t_est=t_est,
        u_samples=u_samples,
        v_samples=v_samples,
    )


def xnorm(trajectory):
    """Running supremum of the weighted norm over the sampled trajectory."""
    if len(trajectory.xnorm_running) == 0:
        raise ValueError("trajectory has no samples")
    return trajectory.xnorm


# -- Picard / Duhamel cross-validation --------------------------------


def _duhamel_u(spec, h_hat_list, t_grid, i):
    """u-component of int_0^{t_i} Phi(t_i - s) * h(u(s)) ds by trapezoid."""
    xi_sq = spec.wavenumber_sq()
    acc = np.zeros(spec.shape, dtype=complex)
    if i == 0:
        return np.zeros(spec.shape)
    dt_loc = t_grid[1] - t_grid[0]
    for j in range(i + 1):
        w = 0.5 if j in (0, i) else 1.0
        _, K1, _, _ = multipliers(xi_sq, t_grid[i] - t_grid[j])
        acc += w * dt_loc * K1 * h_hat_list[j]
    return np.fft.ifftn(acc).real


def picard_verify(config, window_T=1.0, iterations=4):
    """Successive-approximation check of the Duhamel fixed point.

    Builds u^0 = linear flow, u^{k+1} = u^lin + int Phi * h(u^k) on a
    uniform grid over [0, window_T], and reports the contraction factor
    in the weighted trajectory norm together with the mismatch against
    the split-step solution at the window end.
    """
    if iterations < 3:
        raise ValueError("need at least 3 iterations")
    spec = config.grid
    n = spec.dimension
    m = max(int(round(window_T / config.dt)), 4)
    t_grid = np.linspace(0.0, window_T, m + 1)

    lin = [config.data.copy()]
    for i in range(m):
        lin.append(propagate(lin[-1], t_grid[i + 1] - t_grid[i]))
    u_lin = [s.u.values for s in lin]

    def weighted_norm(diff_fields):
        best = 0.0
        for t, vals in zip(t_grid, diff_fields):
            f = GridField(spec, vals)
            st = WaveState(t, f, GridField.zeros(spec))
            best = max(best, xnorm_weight(st, n))
        return best

    current = [u.copy() for u in u_lin]
    increments = []
    for _ in range(iterations):
        h_hat = [np.fft.fftn(config.nonlinearity.h_eval(u)) for u in current]
        nxt = [u_lin[i] + _duhamel_u(spec, h_hat, t_grid, i) for i in range(m + 1)]
        increments.append(weighted_norm([a - b for a, b in zip(nxt, current)]))
        current = nxt

    factors = [increments[k + 1] / increments[k] if increments[k] > 0 else 0.0
               for k in range(len(increments) - 1)]
    split_cfg = EvolveConfig(grid=spec, nonlinearity=config.nonlinearity,
                             data=config.data, dt=config.dt, t_max=window_T,
                             blowup_threshold=config.blowup_threshold,
                             sample_stride=max(m, 1), keep_fields=True)
    split = evolve(split_cfg)
    mismatch = float(np.max(np.abs(current[-1] - split.u_samples[-1])))
    return {
        "increments": increments,
        "contraction_factors": factors,
        "contraction_factor": max(factors) if factors else 0.0,
        "mismatch_linf": mismatch,
        "first_correction": increments[0],
    }


def lifespan_sweep(config_template, epsilons):
    """Run the same setup across amplitudes; returns [(eps, T_est, outcome)].

    The template's data is rescaled linearly per amplitude; detected
    lifespans must be non-increasing in the amplitude (checked by the
    caller up to one sample stride of jitter).
    """
    epsilons = list(epsilons)
    if not epsilons or any(e <= 0 for e in epsilons) or any(np.diff(epsilons) <= 0):
        raise ValueError("epsilons must be positive and increasing")
    base = config_template.data
    base_eps = a_norm(base)
    rows = []
    for eps in epsilons:
        scale = eps / base_eps
        data = WaveState(base.time,
                         GridField(base.spec, base.u.values * scale),
                         GridField(base.spec, base.v.values * scale))
        cfg = EvolveConfig(grid=config_template.grid,
                           nonlinearity=config_template.nonlinearity,
                           data=data, dt=config_template.dt,
                           t_max=config_template.t_max,
                           blowup_threshold=config_template.blowup_threshold,
                           dt_min=config_template.dt_min,
                           sample_stride=config_template.sample_stride,
                           keep_fields=False)
        traj = evolve(cfg)
        rows.append((eps, traj.t_est, traj.outcome))
    return rows


# -- data construction ------------------------------------------------


def a_norm(state):
    """Data-space norm: |phi|_{H^{1+[n/2]}} + |phi|_{L1} + |psi|_{H^{[n/2]}} + |psi|_{L1}."""
    n = state.spec.dimension
    k_phi = 1 + n // 2
    k_psi = n // 2
    return (sobolev_norm(state.u, k_phi) + lp_norm(state.u, 1)
            + sobolev_norm(state.v, k_psi) + lp_norm(state.v, 1))


def make_data(spec, shape="gaussian", amplitude=1.0, width=1.0, center=0.0,
              component="psi"):
    """Gaussian-type Cauchy data normalized so the data norm equals amplitude.

    shape 'gaussian' has positive mean; 'dgaussian' (first derivative
    along x) integrates to zero.  The bump goes into phi or psi per
    `component`; the other field is zero.
    """
    if shape not in ("gaussian", "dgaussian"):
        raise ValueError(f"unknown data shape {shape!r}")
    if component not in ("phi", "psi"):
        raise ValueError(f"component must be phi or psi, got {component!r}")

    def bump(*coords):
        r_sq = sum((c - center) ** 2 for c in coords)
        g = np.exp(-r_sq / width ** 2)
        if shape == "dgaussian":
            g = -2.0 * (coords[0] - center) / width ** 2 * g
        return g

    f = GridField.from_function(spec, bump)
    zero = GridField.zeros(spec)
    state = WaveState(0.0, f, zero) if component == "phi" else WaveState(0.0, zero, f)
    norm = a_norm(state)
    if norm == 0.0:
        raise GridError("data bump vanished on the grid; refine the resolution")
    scale = amplitude / norm
    return WaveState(0.0, GridField(spec, state.u.values * scale),
                     GridField(spec, state.v.values * scale))


def check_torus_size(spec, t_max, data_radius, margin=2.0):
    """Wrap-around guard: unit speed propagation must not reach the boundary."""
    needed = data_radius + t_max + margin
    if spec.half_length < needed:
        raise GridError(
            f"half_length {spec.half_length} too small: need >= {needed} "
            f"(data radius {data_radius} + horizon {t_max} + margin {margin})")
