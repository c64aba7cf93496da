"""Tests for the cut-off weights, the trajectory functionals and the
averaged blow-up chain."""

import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from dwlab.grid import GridSpec
from dwlab.modulus import Nonlinearity, catalog_make, check_h_convexity
from dwlab.semilinear import EvolveConfig, Trajectory, evolve, make_data
from dwlab.testfunction import (
    blowup_certificate,
    eta,
    eta_d1,
    eta_d2,
    eta_star,
    functional_ir,
    functional_y,
    functional_y_exchanged,
    jensen_check,
    kernel_k,
    psi_weights,
    wave_operator_on_weight,
    weight_bound_constant,
)


# -- the smooth step --------------------------------------------------


def test_eta_plateau_and_support():
    s = np.array([0.0, 0.3, 0.5])
    assert np.all(eta(s) == 1.0)
    assert np.all(eta(np.array([1.0, 2.0, 50.0])) == 0.0)
    mid = eta(np.linspace(0.51, 0.99, 100))
    assert np.all((0.0 < mid) & (mid <= 1.0))
    assert np.all(np.diff(mid) <= 0.0)
    # strictly interior away from the flat tails of the transition
    core = eta(np.linspace(0.6, 0.9, 50))
    assert np.all((0.0 < core) & (core < 1.0))
    assert np.all(np.diff(core) < 0.0)


def test_eta_star_matches_on_annulus():
    assert eta_star(0.3) == 0.0
    assert eta_star(0.49999) == 0.0
    s = np.linspace(0.5, 1.2, 50)
    assert np.allclose(eta_star(s), eta(s))


def test_eta_derivatives_match_finite_differences():
    s = np.linspace(0.501, 0.999, 1501)
    h = 1e-6
    fd1 = (eta(s + h) - eta(s - h)) / (2.0 * h)
    fd2 = (eta_d1(s + h) - eta_d1(s - h)) / (2.0 * h)
    assert np.max(np.abs(fd1 - eta_d1(s))) < 1e-8
    assert np.max(np.abs(fd2 - eta_d2(s))) < 1e-6


def test_eta_derivatives_vanish_outside_transition():
    s = np.array([0.0, 0.2, 0.5, 1.0, 3.0])
    assert np.all(eta_d1(s) == 0.0)
    assert np.all(eta_d2(s) == 0.0)


def test_eta_second_derivative_bounded():
    s = np.linspace(0.5, 1.0, 20001)
    assert np.max(np.abs(eta_d2(s))) < 200.0


# -- weights and the pointwise operator bound -------------------------


def test_psi_weights_plateau_and_outside():
    psi, psi_star = psi_weights(np.array([3.0]), 10.0, 1)  # z = 0.3
    assert psi[0] == 1.0 and psi_star[0] == 0.0
    psi, psi_star = psi_weights(np.array([12.0]), 10.0, 1)  # z = 1.2
    assert psi[0] == 0.0 and psi_star[0] == 0.0
    assert wave_operator_on_weight(1.0, 2.0, 10.0, 1) == 0.0  # z = 0.3


def test_wave_operator_matches_finite_differences():
    rng = np.random.default_rng(2)
    for n in (1, 2):
        for _ in range(200):
            big_r = math.exp(rng.uniform(math.log(8.0), math.log(200.0)))
            z = rng.uniform(0.55, 0.95)
            t = rng.uniform(0.0, 0.9 * z * big_r)  # keep x away from 0
            x_sq = z * big_r - t
            x = math.sqrt(x_sq)
            # steps chosen so the increment of z = (x^2+t)/R is ~1e-4
            # in both directions (the weight only depends on z)
            h_t = 1e-4 * big_r
            h_x = 1e-4 * big_r / (2.0 * x)

            def psi(tt, xx):
                return float(eta((xx ** 2 + tt) / big_r) ** (n + 2))

            d_tt = (psi(t + h_t, x) - 2 * psi(t, x) + psi(t - h_t, x)) / h_t ** 2
            d_t = (psi(t + h_t, x) - psi(t - h_t, x)) / (2 * h_t)
            # radial Laplacian: psi'' in x plus (n-1)/x psi'
            d_xx = (psi(t, x + h_x) - 2 * psi(t, x) + psi(t, x - h_x)) / h_x ** 2
            d_x = (psi(t, x + h_x) - psi(t, x - h_x)) / (2 * h_x)
            lap = d_xx + (n - 1) / x * d_x
            expected = d_tt - lap - d_t
            got = wave_operator_on_weight(t, x_sq, big_r, n)
            scale = abs(expected) + (n + 2) / big_r ** 2
            assert abs(got - expected) <= 1e-3 * scale


def test_pointwise_bound_with_calibrated_constant():
    rng = np.random.default_rng(0)
    for n in (1, 2):
        constant = weight_bound_constant(n, r0=16.0)
        for _ in range(5000):
            big_r = 16.0 * math.exp(rng.uniform(0.0, 6.0))
            t = rng.uniform(0.0, big_r)
            x_sq = rng.uniform(0.0, max(big_r - t, 0.0))
            lhs = abs(wave_operator_on_weight(t, x_sq, big_r, n))
            z = (x_sq + t) / big_r
            rhs = constant / big_r * eta_star(z) ** n
            assert lhs <= rhs + 1e-14


def test_weight_bound_constant_rejects_bad_r0():
    with pytest.raises(ValueError):
        weight_bound_constant(1, r0=0.0)


# -- functionals ------------------------------------------------------


def _constant_trajectory(spec, value, t_end, samples):
    times = np.linspace(0.0, t_end, samples)
    fields = [np.full(spec.shape, value) for _ in times]
    return Trajectory(spec=spec, times=times,
                      norms={}, xnorm_running=np.zeros(samples),
                      outcome="CompletedHorizon", t_est=math.inf,
                      u_samples=fields, v_samples=fields)


def _real_trajectory(amplitude=2.0, t_max=64.0):
    spec = GridSpec(1, 128.0, 1024)
    nl = Nonlinearity(catalog_make("invlog", p=2.0), 1)
    data = make_data(spec, amplitude=amplitude, width=2.0)
    cfg = EvolveConfig(grid=spec, nonlinearity=nl, data=data, dt=0.05,
                       t_max=t_max, sample_stride=8, keep_fields=True)
    return evolve(cfg), nl


def test_functional_ir_zero_trajectory():
    spec = GridSpec(1, 64.0, 512)
    traj = _constant_trajectory(spec, 0.0, 16.0, 30)
    nl = Nonlinearity(catalog_make("power", p=1.0), 1)
    assert functional_ir(traj, nl, 16.0) == 0.0


def test_functional_ir_constant_field_factorizes():
    # for u = const c: I_R = h(c) * integral of psi_R over Q_R, with the
    # weight integral evaluated by an independent 2-d quadrature
    spec = GridSpec(1, 64.0, 2048)
    c, big_r = 0.5, 16.0
    traj = _constant_trajectory(spec, c, big_r, 257)
    nl = Nonlinearity(catalog_make("power", p=1.0), 1)
    got = functional_ir(traj, nl, big_r)
    weight_integral, _ = dblquad(
        lambda x, t: eta((x * x + t) / big_r) ** 3,
        0.0, big_r, -spec.half_length, spec.half_length,
        epsabs=1e-10, epsrel=1e-10)
    assert got == pytest.approx(float(nl.h_eval(c)) * weight_integral, rel=1e-4)


def test_functional_ir_rejects_short_trajectory():
    spec = GridSpec(1, 64.0, 512)
    traj = _constant_trajectory(spec, 0.1, 8.0, 20)
    nl = Nonlinearity(catalog_make("power", p=1.0), 1)
    with pytest.raises(ValueError):
        functional_ir(traj, nl, 16.0)


def test_functional_ir_increases_with_r_on_blowup_class_run():
    spec = GridSpec(1, 128.0, 1024)
    nl = Nonlinearity(catalog_make("invlog", p=1.0), 1)
    data = make_data(spec, amplitude=2.0, width=2.0)
    cfg = EvolveConfig(grid=spec, nonlinearity=nl, data=data, dt=0.05,
                       t_max=64.0, sample_stride=8, keep_fields=True)
    traj = evolve(cfg)
    values = [functional_ir(traj, nl, r) for r in (8.0, 16.0, 32.0, 64.0)]
    assert np.all(np.diff(values) > 0)


def test_functional_y_chain_on_trajectory():
    traj, nl = _real_trajectory()
    for big_r in (16.0, 64.0):
        i_r = functional_ir(traj, nl, big_r)
        r_grid = np.geomspace(big_r / 256.0, big_r, 65)
        rep = functional_y(traj, nl, r_grid)
        assert np.all(rep["y"] >= 0.0)
        assert np.all(np.diff(rep["Y_cum"]) >= -1e-15)
        assert rep["Y"] <= math.log(2.0) * i_r
        swapped = functional_y_exchanged(traj, nl, r_grid)
        assert abs(rep["Y"] - swapped) <= 1e-6 * abs(swapped)


def test_kernel_pointwise_identity():
    # K(z) <= log(2) eta(z)^{n+2} at sample points (paper's kernel bound)
    for n in (1, 2):
        for z in (0.05, 0.3, 0.55, 0.7, 0.9):
            assert kernel_k(z, n) <= math.log(2.0) * eta(z) ** (n + 2) + 1e-12
    assert kernel_k(1.5, 1) == 0.0
    # plateau value equals the full annulus integral
    full, _ = quad(lambda s: eta_star(s) ** 3 / s, 0.5, 1.0)
    assert kernel_k(0.1, 1) == pytest.approx(full, rel=1e-10)


# -- Jensen -----------------------------------------------------------


def test_jensen_equality_for_constant_argument():
    weights = np.array([0.2, 1.3, 0.0, 2.0])
    values = np.full(4, 1.7)
    assert jensen_check(lambda t: t ** 2, values, weights) == pytest.approx(0.0, abs=1e-14)


def test_jensen_variance_identity():
    rng = np.random.default_rng(4)
    values = rng.uniform(0.0, 2.0, size=500)
    weights = np.ones_like(values)
    slack = jensen_check(np.square, values, weights)
    assert slack == pytest.approx(np.var(values), rel=1e-12)
    assert slack >= 0.0


def test_jensen_with_catalog_nonlinearity_and_weight():
    nl = Nonlinearity(catalog_make("invlog", p=1.0), 1)
    assert check_h_convexity(nl).convexity_min >= -1e-10
    rng = np.random.default_rng(8)
    values = rng.uniform(0.0, 0.04, size=400)
    weights = eta_star(np.linspace(0.45, 1.05, 400)) ** 1  # psi*-derived
    slack = jensen_check(lambda t: nl.h_eval(t), values, weights)
    assert slack >= -1e-12


def test_jensen_rejects_bad_weights():
    with pytest.raises(ValueError):
        jensen_check(np.square, np.ones(3), np.zeros(3))
    with pytest.raises(ValueError):
        jensen_check(np.square, np.ones(3), np.array([1.0, -0.5, 0.2]))


# -- the certificate --------------------------------------------------


def test_certificate_convergent_class_bounded():
    mu = catalog_make("invlog", p=2.0)
    constant = weight_bound_constant(1, 16.0)
    report = blowup_certificate(mu, 1, y_r0=0.02, constant=constant, r0=16.0)
    assert report.verdict == "bounded-no-witness"
    assert not report.witness_in_principle
    assert report.lhs_final < report.budget


def test_certificate_divergent_class_reports_witness():
    mu = catalog_make("invlog", p=1.0)
    constant = weight_bound_constant(1, 16.0)
    report = blowup_certificate(mu, 1, y_r0=0.02, constant=constant, r0=16.0)
    assert report.witness_in_principle
    # the left side keeps growing with the scan range
    shorter = blowup_certificate(mu, 1, y_r0=0.02, constant=constant, r0=16.0,
                                 r_max=1e30)
    assert report.lhs_final > 1.5 * shorter.lhs_final


def test_certificate_power_class_bounded():
    mu = catalog_make("power", p=1.0)
    constant = weight_bound_constant(1, 16.0)
    report = blowup_certificate(mu, 1, y_r0=0.02, constant=constant, r0=16.0)
    assert report.verdict == "bounded-no-witness"


def test_certificate_crossing_when_budget_is_tiny():
    # with a large measured functional the budget shrinks and the
    # divergent integral crosses it within the scanned range
    mu = catalog_make("invlog", p=1.0)
    report = blowup_certificate(mu, 1, y_r0=5.0, constant=2.0, r0=16.0)
    assert report.certified
    assert math.isfinite(report.crossing_r)
    assert report.verdict == "witness-observed"


def test_certificate_rejects_zero_functional():
    mu = catalog_make("invlog", p=1.0)
    with pytest.raises(ValueError):
        blowup_certificate(mu, 1, y_r0=0.0, constant=10.0, r0=16.0)
