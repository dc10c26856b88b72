"""Energy, conformal moduli, the d-bar potential, and deformed immersions."""

import numpy as np
import pytest

from cwtori.spectral import FourierField, basis_field, fd_second_derivative
from cwtori.surface import (ConformalClass, conformal_class, dbar_solve,
                            deformed_surface_data, first_order_tau,
                            metric_expansion, nonlocal_form,
                            pi2_of_deformation, reduce_modular,
                            second_fundamental_form, second_order_tau,
                            tau_of_metric, willmore_energy,
                            willmore_of_deformation)


def test_willmore_energy_of_the_square_torus(homogeneous):
    t = homogeneous(1.0)
    assert willmore_energy(t) == pytest.approx(2.0 * np.pi ** 2, rel=1e-10)
    assert t.energy == willmore_energy(t)


def test_shape_operator_of_the_undeformed_torus(two_lobe):
    t = two_lobe(2.0)
    sff = second_fundamental_form(t)
    assert sff.shape == (2048, 2, 2)
    assert np.array_equal(sff[:, 0, 0], t.curve.kappa)
    assert not np.any(sff[:, 0, 1]) and not np.any(sff[:, 1, 1])


def test_conformal_class_of_undeformed_tori(two_lobe, homogeneous):
    for t in (two_lobe(2.5), homogeneous(1.3)):
        cc = conformal_class(t)
        assert abs(cc.tau - 1j * t.b) < 1e-9
        assert cc.pi1 == cc.tau.real and cc.pi2 == cc.tau.imag
        assert cc.residual < 1e-10
    with pytest.raises(ValueError, match="Im tau"):
        ConformalClass(tau=1.0 - 1j, pi1=1.0, pi2=-1.0)


def test_modular_reduction():
    tau = 2.3 + 0.7j
    red = reduce_modular(tau)
    assert -0.5 < red.real <= 0.5 and red.imag > 0.0 and abs(red) >= 1.0 - 1e-12
    assert reduce_modular(tau + 3.0) == pytest.approx(red)
    assert reduce_modular(-1.0 / tau) == pytest.approx(red)
    assert reduce_modular(0.1 + 2.0j) == 0.1 + 2.0j


def test_dbar_solver_on_manufactured_solution():
    b = 1.4
    nx, ny = 64, 32
    x = np.arange(nx) * (2.0 * np.pi * b / nx)
    y = np.arange(ny) * (2.0 * np.pi / ny)
    X, Y = np.meshgrid(x, y, indexing="ij")
    p_exact = np.cos(2 * X / b) * np.sin(Y)
    px = -(2.0 / b) * np.sin(2 * X / b) * np.sin(Y)
    py = np.cos(2 * X / b) * np.cos(Y)
    sol = dbar_solve(0.5 * (px + 1j * py), b)
    assert np.max(np.abs(sol.p - p_exact)) < 1e-12
    assert sol.residual < 1e-12
    assert sol.cycle < 1e-12
    assert abs(sol.removed_mean) < 1e-15


def test_dbar_rejects_rhs_with_mean():
    with pytest.raises(ValueError, match="unsolvable"):
        dbar_solve(np.ones((16, 8)) + 0j, 1.0)


def test_first_order_modulus_identities(two_lobe):
    t = two_lobe(2.0)
    rng = np.random.default_rng(2)
    z = np.zeros((5, 5))
    phi = FourierField(t.b, rng.normal(size=(5, 5)), rng.normal(size=(5, 5)),
                       z.copy(), z.copy())
    dtau, constraint = first_order_tau(t, phi)
    # the constraint is 4 pi times the imaginary part of the modulus rate
    assert constraint == pytest.approx(4.0 * np.pi * dtau.imag, rel=1e-12)
    assert dtau.real == 0.0
    # fields with no revolution-invariant part do not move the modulus
    pure = basis_field(t.b, 4, 4, 1, 2, 1)
    dtau, constraint = first_order_tau(t, pure)
    assert abs(dtau) < 1e-14 and abs(constraint) < 1e-14


def test_first_order_modulus_matches_length_rate(two_lobe):
    # constant displacement: Im tau' = -(1/2 pi) int kappa dx, the rate of
    # change of the profile length
    t = two_lobe(2.0)
    phi = basis_field(t.b, 2, 2, 1, 0, 0)
    dtau, _ = first_order_tau(t, phi)
    dx = t.curve.x[1] - t.curve.x[0]
    want = -float(np.sum(t.curve.kappa)) * dx / (2.0 * np.pi)
    assert dtau.imag == pytest.approx(want, rel=1e-12)


def test_second_order_modulus_scaling_and_admissibility(two_lobe):
    t = two_lobe(2.0)
    phi = basis_field(t.b, 4, 4, 1, 2, 1)
    one = second_order_tau(t, phi)
    four = second_order_tau(t, basis_field(t.b, 4, 4, 1, 2, 1, 2.0))
    assert four == pytest.approx(4.0 * one, rel=1e-12)
    with pytest.raises(ValueError, match="not admissible"):
        second_order_tau(t, basis_field(t.b, 4, 4, 1, 0, 0))


def test_second_order_modulus_matches_deformed_period_map(two_lobe):
    # quadrature formula versus finite displacements pushed through the
    # exact induced metric and the period map
    t = two_lobe(2.0)
    phi = basis_field(t.b, 4, 4, 1, 2, 1)
    tt = second_order_tau(t, phi)
    cache = {}

    def tau_at(s):
        if s not in cache:
            if s == 0.0:
                cache[s] = 1j * t.b
            else:
                d = deformed_surface_data(t, phi, s)
                cache[s] = tau_of_metric(d["E"], d["F"], d["G"], t.b)[0]
        return cache[s]

    re, re_err = fd_second_derivative(lambda s: tau_at(s).real, 1e-3)
    im, im_err = fd_second_derivative(lambda s: tau_at(s).imag, 1e-3)
    assert max(re_err, im_err) < 1e-6
    assert tt.real == pytest.approx(re, abs=2e-7)
    assert tt.imag == pytest.approx(im, abs=2e-7)


def test_nonlocal_form_closed_values(homogeneous):
    # alpha = -2 k0 cos(jx/b) cos(ky) couples to its potential with the
    # hand-reduced value -pi^2 b k0^2 k^2/(k^2 + (j/b)^2); the zero
    # x-frequency column is a single traveling wave and doubles
    b = 1.5
    t = homogeneous(b)
    k0sq = 1.0 + 1.0 / b ** 2
    j, k = 3, 2
    got = nonlocal_form(t, basis_field(b, 4, 4, 1, j, k))
    want = -np.pi ** 2 * b * k0sq * k ** 2 / (k ** 2 + (j / b) ** 2)
    assert got == pytest.approx(want, rel=1e-12)
    got0 = nonlocal_form(t, basis_field(b, 4, 4, 1, 0, 1))
    assert got0 == pytest.approx(-2.0 * np.pi ** 2 * b * k0sq, rel=1e-12)


def test_nonlocal_form_sign_and_degeneracies(two_lobe):
    t = two_lobe(2.5)
    rng = np.random.default_rng(9)
    for _ in range(5):
        phi = FourierField(t.b, *(rng.normal(size=(7, 5)) for _ in range(4)))
        assert nonlocal_form(t, phi) <= 0.0
    # revolution-invariant fields decouple from the potential entirely
    flat = basis_field(t.b, 6, 4, 1, 3, 0)
    assert nonlocal_form(t, flat) == 0.0


def test_metric_expansion_leading_coefficient(two_lobe):
    t = two_lobe(2.0)
    phi = basis_field(t.b, 4, 4, 1, 1, 1)
    me = metric_expansion(t, phi, nx=128, ny=16)
    kap = t.curve.kappa[:: 2048 // 128][:, None]
    want = -2.0 * kap * phi.synthesize(128, 16)
    assert np.max(np.abs(me.alpha - want)) < 1e-12
    with pytest.raises(ValueError, match="divide"):
        metric_expansion(t, phi, nx=100, ny=16)


def test_deformed_surface_reduces_to_product_metric(two_lobe):
    t = two_lobe(2.0)
    phi = basis_field(t.b, 4, 4, 1, 2, 1)
    d = deformed_surface_data(t, phi, 0.0)
    assert np.max(np.abs(d["E"] - 1.0)) < 1e-11
    assert np.max(np.abs(d["G"] - 1.0)) < 1e-11
    assert np.max(np.abs(d["F"])) < 1e-11
    assert willmore_of_deformation(t, phi, 0.0) \
        == pytest.approx(willmore_energy(t), rel=1e-11)
    assert pi2_of_deformation(t, phi, 0.0) == t.b


def test_willmore_grows_under_generic_deformation(two_lobe):
    # b = 2.0 two-lobe tori are strictly stable transverse to the
    # invariance directions, so a generic small displacement raises energy
    t = two_lobe(2.0)
    phi = basis_field(t.b, 4, 4, 1, 2, 2)
    w0 = willmore_energy(t)
    assert willmore_of_deformation(t, phi, 1e-3) > w0
    assert willmore_of_deformation(t, phi, -1e-3) > w0
