"""Acceptance battery for the torus families and their stability analysis.

One test per headline property, in dependency order: energy normalization,
bifurcation constants, branch construction, operator cross-validation,
kernel structure, the stability verdict, and reproduction of every
classification at doubled cutoffs.  Tolerances are pinned; a failure here
means a quantitative claim of the library no longer holds as stated.
"""

import math

import numpy as np

from cwtori.errors import ConditioningError
from cwtori.geometry import ambient_mobius_normal_fields
from cwtori.spectral import FourierField, basis_field
from cwtori.stability import (_basis_rows, _kernel_tol, assemble_blocks,
                              bifurcation_scan, hessian_quadratic_form,
                              kernel_ode_residual, kernel_vector_field,
                              mobius_block_spans, mode_operator,
                              pi1_second_variation, profile_to_field,
                              q1op_kernel, q_apply)
from cwtori.surface import (conformal_class, first_order_tau, nonlocal_form,
                            pi2_of_deformation, willmore_of_deformation)

TWO_LOBE_BS = (1.8, 2.0, 2.5, 3.0, 4.0)
KERNEL_BS = (2.0, 2.5, 3.0)
VERDICT_BS = (2.0, 2.5, 3.0, 4.0)


def test_clifford_energy_normalization(homogeneous):
    w = homogeneous(1.0).energy
    assert abs(w - 2.0 * math.pi ** 2) / (2.0 * math.pi ** 2) < 1e-8


def test_homogeneous_energy_closed_form(homogeneous):
    for b in (1.0, 1.5, math.sqrt(3.0), 2.0, 3.0):
        target = math.pi ** 2 * (b + 1.0 / b)
        assert abs(homogeneous(b).energy - target) / target < 1e-8


def test_bifurcation_constants():
    hits = {mode: b_star for b_star, mode in bifurcation_scan((1.6, 4.05))}
    assert sorted(hits) == [2, 3, 4]
    for k in (2, 3, 4):
        assert abs(hits[k] - math.sqrt(k * k - 1.0)) < 1e-3


def test_homogeneous_index_ladder(spectrum_report):
    # between consecutive bifurcation parameters the index steps by two:
    # each crossing hands a cos/sin pair of profile directions to the
    # negative side
    for b, expect in ((2.0, 2), (2.9, 4), (4.0, 6)):
        rep = spectrum_report("homogeneous", b)
        assert rep.index == expect
        assert rep.verdict == "unstable"
        assert rep.kernel_dim == rep.invariance_dim == 8


def test_branch_construction(two_lobe):
    for b in TWO_LOBE_BS:
        t = two_lobe(b)
        d = t.curve.diagnostics()
        assert d["closure"] < 1e-8
        assert d["euler_lagrange"] < 1e-7
        assert d["first_integral"] < 1e-9
        cc = conformal_class(t)
        assert abs(cc.tau.imag - b) < 1e-6
        assert abs(cc.tau.real) < 1e-8


def test_energy_window_and_monotonicity(two_lobe):
    energies = [two_lobe(b).energy for b in TWO_LOBE_BS]
    betas = [two_lobe(b).beta for b in TWO_LOBE_BS]
    assert all(2.0 * math.pi ** 2 < w < 8.0 * math.pi for w in energies)
    assert all(a < b for a, b in zip(energies, energies[1:]))
    assert all(a > b for a, b in zip(betas, betas[1:]))


def test_curvature_pointwise_bound(two_lobe):
    for b in TWO_LOBE_BS:
        t = two_lobe(b)
        assert float(np.max(t.curve.kappa)) ** 2 < 4.0 - 4.0 * t.curve.mu


def _constrained_fields(t, count, J, M, seed):
    # random band-limited fields, projected against the curvature profile
    # so the first conformal constraint vanishes to first order
    c = t.curve
    rows, _, _ = _basis_rows(c.b, J, c.x)
    kf = profile_to_field(rows @ (c.kappa * (c.x[1] - c.x[0])), c.b,
                          0, "cos", J, M)
    _, con_k = first_order_tau(t, kf)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        f = FourierField(c.b, *(rng.standard_normal((J + 1, M + 1))
                                for _ in range(4)))
        _, con_f = first_order_tau(t, f)
        lam = con_f / con_k
        out.append(FourierField(c.b, f.a1 - lam * kf.a1, f.a2 - lam * kf.a2,
                                f.a3 - lam * kf.a3, f.a4 - lam * kf.a4))
    return out


def _deformed_energy_second_derivative(t, phi, h):
    # five-point second difference of the constrained energy along the
    # exact displaced immersion
    beta_w = 4.0 * math.pi ** 2 * t.beta

    def probe(s):
        return willmore_of_deformation(t, phi, s) \
            - beta_w * pi2_of_deformation(t, phi, s)

    vals = [probe(s) for s in (-2 * h, -h, 0.0, h, 2 * h)]
    return (-vals[0] + 16 * vals[1] - 30 * vals[2]
            + 16 * vals[3] - vals[4]) / (12 * h * h)


def test_hessian_matches_deformation_oracle(two_lobe):
    t = two_lobe(2.0)
    J, M = 8, 3
    blocks = assemble_blocks(t, m_max=M, J=J)
    worst = 0.0
    for phi in _constrained_fields(t, 20, J, M, seed=23):
        form = hessian_quadratic_form(t, phi, J=J, blocks=blocks)
        best = math.inf
        for h in (4e-3, 2e-3, 1e-3):
            orc = _deformed_energy_second_derivative(t, phi, h)
            best = min(best, abs(form - orc) / max(1.0, abs(orc)))
        worst = max(worst, best)
    assert worst < 1e-4, f"worst relative mismatch {worst:.3e}"


def test_nonlocal_dual_routes_and_sign(two_lobe):
    # every call cross-checks the quadrature route against the closed
    # multiplier internally and raises on disagreement beyond 1e-10
    t = two_lobe(2.5)
    count = 0
    for fam in (1, 2, 3, 4):
        for j in range(0, 9):
            for k in range(1, 9):
                phi = basis_field(t.b, 8, 8, fam, j, k)
                if phi.norm() == 0.0:
                    continue
                assert nonlocal_form(t, phi) <= 0.0
                count += 1
    assert count == 272
    rng = np.random.default_rng(11)
    for _ in range(100):
        phi = FourierField(t.b, *(rng.standard_normal((9, 9))
                                  for _ in range(4)))
        assert nonlocal_form(t, phi) <= 0.0


def test_mode_operator_positivity_and_mode0_annihilation(two_lobe,
                                                         homogeneous):
    for t in [two_lobe(b) for b in VERDICT_BS] + [homogeneous(2.0)]:
        assert not np.any(mode_operator(t, 0, J=64).matrix)
        for m in range(2, 9):
            assert mode_operator(t, m, J=64).eigenvalues()[0] > 0.0
    flat = basis_field(2.0, 4, 3, 1, 2, 0)
    assert q_apply(two_lobe(2.0), flat).norm() == 0.0


def test_mode1_kernel_dimensions(two_lobe):
    dims = {}
    for b in KERNEL_BS:
        try:
            dims[b] = q1op_kernel(two_lobe(b), J=64)
        except ConditioningError:
            dims[b] = -1
    t = two_lobe(2.5)
    x = np.linspace(-1.0, 1.0, 401)
    res = {"sinh": kernel_ode_residual(t, x, np.sinh(x)),
           "cosh": kernel_ode_residual(t, x, np.cosh(x))}
    summary = (f"per-sector kernel dims {dims} (want 2, so the full mode-1 "
               f"kernel is 4); kernel-ODE residuals {res} (want < 1e-6)")
    assert all(d == 2 for d in dims.values()) \
        and all(r < 1e-6 for r in res.values()), summary


def test_mobius_subspace_structure(two_lobe):
    for b in KERNEL_BS:
        t = two_lobe(b)
        assert len(ambient_mobius_normal_fields(t)) == 9
        z0, z1 = mobius_block_spans(t, J=64)
        assert z0.shape[1] == 3 and 2 * z1.shape[1] == 6
        q1 = mode_operator(t, 1, J=64).matrix
        tol = _kernel_tol(q1)
        restricted = z1.T @ q1 @ z1
        wr = np.linalg.eigvalsh(0.5 * (restricted + restricted.T))
        assert float(np.max(wr)) <= tol
        if b == 2.0:
            # just above onset the non-positive directions are exactly the
            # Moebius ones: their complement inside mode 1 stays positive
            proj = np.eye(q1.shape[0]) - z1 @ z1.T
            comp = proj @ q1 @ proj
            wc = np.linalg.eigvalsh(0.5 * (comp + comp.T))
            assert int(np.sum(wc < -tol)) == 0
            assert int(np.sum(np.abs(wc) <= tol)) == z1.shape[1]


def test_stability_verdict_and_class_variation(two_lobe, spectrum_report):
    for b in VERDICT_BS:
        rep = spectrum_report("two_lobe", b)
        assert rep.verdict == "stable"
        assert rep.index == 0
        assert rep.kernel_dim - rep.invariance_dim <= 1
        phi = kernel_vector_field(two_lobe(b), J=64)
        assert abs(pi1_second_variation(two_lobe(b), phi)) < 1e-6


def test_doubled_cutoffs_reproduce_classifications(two_lobe, spectrum_report):
    # halved scan spacing
    hits = {mode: b_star
            for b_star, mode in bifurcation_scan((1.6, 4.05), resolution=0.025)}
    assert sorted(hits) == [2, 3, 4]
    for k in (2, 3, 4):
        assert abs(hits[k] - math.sqrt(k * k - 1.0)) < 1e-3
    # doubled frequency cutoff: operator positivity and annihilation
    t25 = two_lobe(2.5)
    assert not np.any(mode_operator(t25, 0, J=128).matrix)
    for m in range(2, 9):
        assert mode_operator(t25, m, J=128).eigenvalues()[0] > 0.0
    # mode-1 kernel classification matches the base cutoff
    for b in KERNEL_BS:
        def dim_at(J):
            try:
                return q1op_kernel(two_lobe(b), J=J)
            except ConditioningError:
                return -1
        assert dim_at(128) == dim_at(64)
    # verdict and extra-kernel counts match the base cutoff
    for b in VERDICT_BS:
        base = spectrum_report("two_lobe", b)
        fine = spectrum_report("two_lobe", b, 128)
        assert fine.verdict == base.verdict
        assert fine.kernel_dim - fine.invariance_dim \
            == base.kernel_dim - base.invariance_dim
        assert fine.index == base.index
