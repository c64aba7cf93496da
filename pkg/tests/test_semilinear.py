"""Tests for the split-step integrator, fixed-point checks and lifespans."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from dwlab.grid import GridError, GridField, GridSpec, WaveState
from dwlab.linear import propagate
from dwlab.modulus import Nonlinearity, PowerForcing, catalog_make
from dwlab.semilinear import (
    EvolveConfig,
    Outcome,
    a_norm,
    check_torus_size,
    evolve,
    lifespan_sweep,
    make_data,
    picard_verify,
    step,
    xnorm,
)


class ZeroForcing:
    def h_eval(self, s):
        return np.zeros_like(s)


def _spec():
    return GridSpec(1, 64.0, 512)


def _ode_reference(forcing, u0, t_end):
    sol = solve_ivp(
        lambda t, y: [y[1], -y[1] + float(forcing.h_eval(np.array(y[0])))],
        (0.0, t_end), [u0, 0.0], rtol=1e-12, atol=1e-14)
    return sol.y[0, -1]


# -- stepping ---------------------------------------------------------


def test_step_reduces_to_linear_flow_without_forcing():
    spec = _spec()
    data = make_data(spec, amplitude=0.5, width=2.0)
    split = step(data, 0.1, ZeroForcing())
    exact = propagate(data, 0.1)
    assert np.max(np.abs(split.u.values - exact.u.values)) < 1e-12
    assert np.max(np.abs(split.v.values - exact.v.values)) < 1e-12


def test_step_matches_scalar_ode():
    spec = _spec()
    forcing = PowerForcing(1.5)
    u0 = 0.3
    const = WaveState(0.0, GridField(spec, np.full(spec.shape, u0)),
                      GridField.zeros(spec))
    cfg = EvolveConfig(grid=spec, nonlinearity=forcing, data=const, dt=0.01,
                       t_max=2.0, sample_stride=200)
    traj = evolve(cfg)
    assert traj.u_samples[-1].flat[0] == pytest.approx(
        _ode_reference(forcing, u0, 2.0), abs=1e-5)


def test_step_order_two_convergence():
    spec = _spec()
    forcing = PowerForcing(1.5)
    u0 = 0.3
    const = WaveState(0.0, GridField(spec, np.full(spec.shape, u0)),
                      GridField.zeros(spec))
    ref = _ode_reference(forcing, u0, 1.0)
    errors = []
    for dt in (0.04, 0.02, 0.01):
        cfg = EvolveConfig(grid=spec, nonlinearity=forcing, data=const, dt=dt,
                           t_max=1.0, sample_stride=int(round(1.0 / dt)))
        traj = evolve(cfg)
        errors.append(abs(traj.u_samples[-1].flat[0] - ref))
    for coarse, fine in zip(errors, errors[1:]):
        assert 3.5 < coarse / fine < 4.5


# -- evolve -----------------------------------------------------------


def test_zero_data_stays_zero():
    spec = _spec()
    zero = WaveState(0.0, GridField.zeros(spec), GridField.zeros(spec))
    cfg = EvolveConfig(grid=spec, nonlinearity=PowerForcing(1.5), data=zero,
                       dt=0.1, t_max=5.0)
    traj = evolve(cfg)
    assert traj.outcome == Outcome.COMPLETED
    assert traj.t_est == math.inf
    assert xnorm(traj) == 0.0


def test_global_class_run_completes_with_decay():
    spec = GridSpec(1, 128.0, 1024)
    nl = Nonlinearity(catalog_make("invlog", p=2.0), 1)
    data = make_data(spec, amplitude=1e-2, width=2.0)
    cfg = EvolveConfig(grid=spec, nonlinearity=nl, data=data, dt=0.05,
                       t_max=100.0, sample_stride=40, keep_fields=False)
    traj = evolve(cfg)
    assert traj.outcome == Outcome.COMPLETED
    linf = traj.norms["Linf"]
    assert linf[-1] < 0.2 * np.max(linf)
    assert np.all(np.diff(traj.xnorm_running) >= 0)


def test_blowup_oracle_detects_finite_lifespan():
    spec = _spec()
    data = make_data(spec, amplitude=20.0, width=2.0)
    cfg = EvolveConfig(grid=spec, nonlinearity=PowerForcing(1.5), data=data,
                       dt=0.005, t_max=50.0, keep_fields=False)
    traj = evolve(cfg)
    assert traj.outcome == Outcome.BLEW_UP
    assert 0.0 < traj.t_est < 50.0
    # the weighted norm diverges on the way to blow-up
    assert traj.xnorm_running[-1] > 100.0 * traj.xnorm_running[0]


def test_times_strictly_increasing():
    spec = _spec()
    data = make_data(spec, amplitude=0.5, width=2.0)
    cfg = EvolveConfig(grid=spec, nonlinearity=PowerForcing(1.5), data=data,
                       dt=0.05, t_max=10.0, sample_stride=7)
    traj = evolve(cfg)
    assert np.all(np.diff(traj.times) > 0)


def test_config_validation():
    spec = _spec()
    data = make_data(spec, amplitude=1.0, width=2.0)
    with pytest.raises(ValueError):
        EvolveConfig(grid=spec, nonlinearity=PowerForcing(1.5), data=data,
                     dt=-0.1, t_max=1.0)
    other = GridSpec(1, 64.0, 256)
    with pytest.raises(ValueError):
        EvolveConfig(grid=other, nonlinearity=PowerForcing(1.5), data=data,
                     dt=0.1, t_max=1.0)


# -- Picard / Duhamel -------------------------------------------------


def test_picard_zero_forcing_fixed_point():
    spec = _spec()
    data = make_data(spec, amplitude=0.1, width=2.0)
    cfg = EvolveConfig(grid=spec, nonlinearity=ZeroForcing(), data=data,
                       dt=0.02, t_max=1.0)
    report = picard_verify(cfg, window_T=1.0, iterations=3)
    assert report["first_correction"] == 0.0
    assert report["contraction_factor"] == 0.0


def test_picard_small_data_contraction_and_mismatch():
    spec = _spec()
    nl = Nonlinearity(catalog_make("power", p=1.0), 1)
    data = make_data(spec, amplitude=1e-3, width=2.0)
    cfg = EvolveConfig(grid=spec, nonlinearity=nl, data=data, dt=0.01, t_max=1.0)
    report = picard_verify(cfg, window_T=1.0, iterations=4)
    assert report["contraction_factor"] < 0.1
    assert report["mismatch_linf"] < 1e-4


def test_picard_correction_scales_superlinearly():
    # n=1, power modulus p=1: h(u) = u^4, so amplitude doubling should
    # multiply the first Picard correction by about 2^4 = 16
    spec = _spec()
    nl = Nonlinearity(catalog_make("power", p=1.0), 1)
    firsts = []
    for eps in (1e-3, 2e-3):
        data = make_data(spec, amplitude=eps, width=2.0)
        cfg = EvolveConfig(grid=spec, nonlinearity=nl, data=data, dt=0.02, t_max=1.0)
        firsts.append(picard_verify(cfg, window_T=1.0, iterations=3)["first_correction"])
    ratio = firsts[1] / firsts[0]
    assert 12.0 < ratio < 20.0


# -- lifespan sweeps --------------------------------------------------


def test_lifespan_monotone_in_amplitude():
    spec = _spec()
    data = make_data(spec, amplitude=5.0, width=2.0)
    template = EvolveConfig(grid=spec, nonlinearity=PowerForcing(1.5), data=data,
                            dt=0.01, t_max=50.0, sample_stride=50,
                            keep_fields=False)
    rows = lifespan_sweep(template, [5.0, 10.0, 20.0])
    t_ests = [t for _, t, _ in rows]
    assert all(outcome == Outcome.BLEW_UP for _, _, outcome in rows)
    stride = template.sample_dt
    for bigger_eps_t, smaller_eps_t in zip(t_ests[1:], t_ests):
        assert bigger_eps_t <= smaller_eps_t + stride


def test_lifespan_sweep_rejects_bad_lists():
    spec = _spec()
    data = make_data(spec, amplitude=1.0, width=2.0)
    template = EvolveConfig(grid=spec, nonlinearity=PowerForcing(1.5), data=data,
                            dt=0.05, t_max=1.0)
    for bad in ([], [2.0, 1.0], [-1.0, 1.0]):
        with pytest.raises(ValueError):
            lifespan_sweep(template, bad)


# -- data construction ------------------------------------------------


def test_make_data_normalized_amplitude():
    spec = _spec()
    for eps in (1e-3, 1.0, 7.5):
        data = make_data(spec, amplitude=eps, width=2.0)
        assert a_norm(data) == pytest.approx(eps, rel=1e-12)


def test_make_data_zero_mean_variant():
    spec = _spec()
    data = make_data(spec, shape="dgaussian", amplitude=1.0, width=2.0)
    mean = float(np.sum(data.v.values)) * spec.cell
    assert abs(mean) < 1e-12
    with pytest.raises(ValueError):
        make_data(spec, shape="box")


def test_torus_size_guard():
    spec = _spec()  # half_length 64
    check_torus_size(spec, t_max=50.0, data_radius=8.0)
    with pytest.raises(GridError):
        check_torus_size(spec, t_max=100.0, data_radius=8.0)
