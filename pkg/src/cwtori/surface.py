"""Willmore energy, conformal class, and normal-deformation expansions.

The 3-sphere minus a great circle is conformal to the product of the
hyperbolic half-plane with a circle, so every equivariant torus is treated
as curve x circle inside that product.  The Willmore integrand used
throughout is the conformally invariant one, mean curvature squared minus
extrinsic Gauss curvature, which lets all computations run in the product
model; for the undeformed torus it reduces to kappa^2 / 4 per unit of the
flat conformal area dx dy.

Normal deformations F_t = exp(t phi N) enter through the induced metric

    g_t = (1 + t a + t^2 b) dx^2 + 2 t^2 c dx dy + (1 + t^2 d) dy^2 + O(t^3)

whose coefficient fields this module assembles, and through a discrete
period map that evaluates the conformal class of any sampled metric on the
torus.  The second derivative of the class combines the coefficient fields
with the solution of a d-bar equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .elastica import TorusImmersion
from .errors import AccuracyError
from .spectral import FourierField, analyze, profile_derivative, quadrature


@dataclass(frozen=True)
class ConformalClass:
    """Point in the moduli space of conformal structures.

    tau is the representative in the standard fundamental domain
    (-1/2 < Re tau <= 1/2, Im tau > 0, |tau| >= 1); pi1 and pi2 are its
    real and imaginary parts, the two real moduli used by the constrained
    variational problem.  residual reports the defect of the period map
    that produced tau.
    """

    tau: complex
    pi1: float
    pi2: float
    residual: float = 0.0

    def __post_init__(self):
        if self.tau.imag <= 0.0:
            raise ValueError("conformal class must have Im tau > 0")

    @classmethod
    def from_tau(cls, tau: complex, residual: float = 0.0) -> "ConformalClass":
        red = reduce_modular(tau)
        return cls(tau=red, pi1=red.real, pi2=red.imag, residual=residual)


@dataclass
class MetricExpansion:
    """Sampled coefficients of the induced-metric expansion in t.

    alpha multiplies t dx^2; beta_c, gamma_c, delta_c multiply the t^2
    terms on dx^2, dx dy (symmetrized) and dy^2.
    """

    b: float
    alpha: NDArray
    beta_c: NDArray
    gamma_c: NDArray
    delta_c: NDArray


@dataclass
class DbarSolution:
    """Zero-mean solution of the d-bar equation on the torus.

    residual is the max-norm defect after re-applying the operator; cycle
    is the largest x-slice integral of p over the short homology cycle,
    which vanishes for right-hand sides that are y-derivatives.
    """

    p: NDArray
    residual: float
    removed_mean: complex
    cycle: float


def willmore_energy(torus: TorusImmersion) -> float:
    """Conformal Willmore energy; pi/2 times the curvature action."""
    c = torus.curve
    dx = c.x[1] - c.x[0]
    return 0.25 * float(np.sum(c.kappa ** 2)) * dx * 2.0 * np.pi


def second_fundamental_form(torus: TorusImmersion) -> NDArray:
    """Shape operator samples of the undeformed torus, shape (n, 2, 2).

    In the product model the revolution circles are geodesics, so the only
    nonzero entry is the profile curvature on the xx slot.
    """
    n = torus.curve.n
    out = np.zeros((n, 2, 2))
    out[:, 0, 0] = torus.curve.kappa
    return out


def _stride_profiles(curve, nx: int) -> dict:
    if curve.n % nx != 0:
        raise ValueError(f"nx={nx} must divide the stored sample count "
                         f"{curve.n}")
    step = curve.n // nx
    ddu = profile_derivative(curve.du, curve.b, 1, threshold=1e-12)
    ddv = profile_derivative(curve.dv, curve.b, 1, threshold=1e-12)
    sl = slice(None, None, step)
    return {
        "u": curve.u[sl], "v": curve.v[sl], "du": curve.du[sl],
        "dv": curve.dv[sl], "ddu": ddu[sl], "ddv": ddv[sl],
        "kappa": curve.kappa[sl],
    }


def metric_expansion(torus: TorusImmersion, phi: FourierField,
                     nx: int = 256, ny: int = 64) -> MetricExpansion:
    """Expansion coefficients of the induced metric under t phi N."""
    pr = _stride_profiles(torus.curve, nx)
    kap, v, du, dv = pr["kappa"], pr["v"], pr["du"], pr["dv"]
    f = phi.synthesize(nx, ny)
    fx = phi.derivative(dx=1).synthesize(nx, ny)
    fy = phi.derivative(dy=1).synthesize(nx, ny)
    kap_c, v_c, du_c, dv_c = (q[:, None] for q in (kap, v, du, dv))
    alpha = -2.0 * kap_c * f
    beta_c = (fx ** 2 + kap_c ** 2 * f ** 2 + (dv_c / v_c) ** 2 * f ** 2
              + (2.0 / v_c) * (kap_c * du_c * f ** 2 + dv_c * f * fx))
    gamma_c = (dv_c / v_c) * f * fy + fx * fy
    delta_c = fy ** 2
    return MetricExpansion(b=torus.curve.b, alpha=alpha, beta_c=beta_c,
                           gamma_c=gamma_c, delta_c=delta_c)


def dbar_solve(rhs: NDArray, b: float) -> DbarSolution:
    """Solve d-bar p = rhs on the torus with zero mean.

    d-bar is (d/dx + i d/dy) / 2.  The constant mode of rhs is not in the
    range of the operator on periodic functions; a mean above 1e-10
    relative to the data size is rejected, smaller roundoff-level means
    are removed and reported.
    """
    nx, ny = rhs.shape
    spec = np.fft.fft2(rhs) / (nx * ny)
    mean = spec[0, 0]
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if abs(mean) > 1e-10 * scale:
        raise ValueError(
            f"d-bar equation is unsolvable: rhs has mean {mean:.3e}")
    spec[0, 0] = 0.0
    wx = 2.0 * np.pi * np.fft.fftfreq(nx, d=2.0 * np.pi * b / nx)
    wy = 2.0 * np.pi * np.fft.fftfreq(ny, d=2.0 * np.pi / ny)
    sym = 0.5 * (1j * wx[:, None] - wy[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        phat = np.where(sym != 0.0, spec / np.where(sym == 0.0, 1.0, sym),
                        0.0)
    p = np.fft.ifft2(phat) * (nx * ny)
    back = np.fft.ifft2(phat * sym) * (nx * ny)
    residual = float(np.max(np.abs(back - (rhs - mean))))
    cycle = float(np.max(np.abs(p.mean(axis=1)))) * 2.0 * np.pi
    return DbarSolution(p=p, residual=residual, removed_mean=complex(mean),
                        cycle=cycle)


def _alpha_and_p(torus, phi, nx, ny):
    pr = _stride_profiles(torus.curve, nx)
    kap = pr["kappa"][:, None]
    f = phi.synthesize(nx, ny)
    fy = phi.derivative(dy=1).synthesize(nx, ny)
    alpha = -2.0 * kap * f
    alpha_y = -2.0 * kap * fy
    sol = dbar_solve(-0.25j * alpha_y, torus.curve.b)
    return alpha, sol


def first_order_tau(torus: TorusImmersion, phi: FourierField,
                    nx: int = 256, ny: int = 64):
    """First derivative of the conformal class along t phi N.

    Returns (dtau, constraint) with constraint = -(1/pi) int kappa phi,
    which equals 4 pi times the imaginary part of dtau.  Variations that
    preserve the second conformal modulus to first order are exactly the
    kernel of the constraint.
    """
    pr = _stride_profiles(torus.curve, nx)
    kap = pr["kappa"][:, None]
    f = phi.synthesize(nx, ny)
    alpha = -2.0 * kap * f
    b = torus.curve.b
    dtau = 0.125j / np.pi ** 2 * quadrature(alpha, b)
    constraint = -quadrature(kap * f, b) / np.pi
    return complex(dtau), float(constraint)


def second_order_tau(torus: TorusImmersion, phi: FourierField,
                     nx: int = 256, ny: int = 64) -> complex:
    """Second derivative of the conformal class along an admissible t phi N.

    The variation must preserve the second modulus to first order; the
    first-order constraint value is checked against an absolute 1e-8
    before the quadratic terms are assembled.
    """
    _, constraint = first_order_tau(torus, phi, nx, ny)
    if abs(constraint) > 1e-8:
        raise ValueError(
            f"variation is not admissible: first-order constraint "
            f"{constraint:.3e}")
    me = metric_expansion(torus, phi, nx, ny)
    alpha, sol = _alpha_and_p(torus, phi, nx, ny)
    integrand = (-0.125 * alpha ** 2 + 0.5 * me.beta_c - 0.5 * me.delta_c
                 + 1j * me.gamma_c + 0.5 * alpha * sol.p)
    b = torus.curve.b
    val = 0.5j / np.pi ** 2 * (quadrature(integrand.real, b)
                               + 1j * quadrature(integrand.imag, b))
    return complex(val)


def nonlocal_form(torus: TorusImmersion, phi: FourierField,
                  nx: int = 256, ny: int = 64) -> float:
    """Quadratic form coupling a variation to its d-bar potential.

    Equals Re of int alpha p / 2, with alpha = -2 kappa phi and p the
    zero-mean d-bar potential of -alpha_y / 4 i.  Evaluated twice: by
    quadrature against the solved p, and mode by mode through the closed
    multiplier -k^2 / (k^2 + (j/b)^2) on the coefficients of alpha.  The
    two routes must agree to 1e-10; the form is never positive.
    """
    alpha, sol = _alpha_and_p(torus, phi, nx, ny)
    b = torus.curve.b
    direct = 0.5 * quadrature((alpha * sol.p).real, b)

    co = analyze(alpha, b)
    j = np.arange(co.J + 1)[:, None] / b
    k = np.arange(co.M + 1)[None, :].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        mult = np.where(k > 0.0, k ** 2 / (k ** 2 + j ** 2), 0.0)
    weight = np.full((co.J + 1, 1), -0.25 * np.pi ** 2 * b)
    weight[0, 0] = -0.5 * np.pi ** 2 * b  # lone traveling wave at j = 0
    power = co.a1 ** 2 + co.a2 ** 2 + co.a3 ** 2 + co.a4 ** 2
    modal = float(np.sum(weight * mult * power))

    if abs(direct - modal) > 1e-10 * max(1.0, abs(direct)):
        raise AccuracyError(
            f"d-bar quadrature and modal sum disagree: "
            f"{direct:.15e} vs {modal:.15e}")
    return direct


# ---------------------------------------------------------------------------
# deformed immersions: exact fundamental forms in the product model

def deformed_surface_data(torus: TorusImmersion, phi: FourierField,
                          t: float, nx: int = 256, ny: int = 64) -> dict:
    """Metric and shape data of the normally displaced immersion.

    The displacement moves each point by t phi along the curve normal in
    the half-plane factor; the fundamental forms are computed exactly at
    the displaced position with the product-model connection.
    """
    pr = _stride_profiles(torus.curve, nx)
    f = phi.synthesize(nx, ny)
    fx = phi.derivative(dx=1).synthesize(nx, ny)
    fy = phi.derivative(dy=1).synthesize(nx, ny)
    fxx = phi.derivative(dx=2).synthesize(nx, ny)
    fxy = phi.derivative(dx=1, dy=1).synthesize(nx, ny)
    fyy = phi.derivative(dy=2).synthesize(nx, ny)
    u, v, du, dv, ddu, ddv = (pr[q][:, None] for q in
                              ("u", "v", "du", "dv", "ddu", "ddv"))
    d3u = profile_derivative(torus.curve.du, torus.curve.b, 2,
                             threshold=1e-12)[::torus.curve.n // nx][:, None]
    d3v = profile_derivative(torus.curve.dv, torus.curve.b, 2,
                             threshold=1e-12)[::torus.curve.n // nx][:, None]

    U = u - t * f * dv
    V = v + t * f * du
    Ux = du - t * (fx * dv + f * ddv)
    Vx = dv + t * (fx * du + f * ddu)
    Uy = -t * fy * dv
    Vy = t * fy * du
    Uxx = ddu - t * (fxx * dv + 2.0 * fx * ddv + f * d3v)
    Vxx = ddv + t * (fxx * du + 2.0 * fx * ddu + f * d3u)
    Uxy = -t * (fxy * dv + fy * ddv)
    Vxy = t * (fxy * du + fy * ddu)
    Uyy = -t * fyy * dv
    Vyy = t * fyy * du

    E = (Ux ** 2 + Vx ** 2) / V ** 2
    F = (Ux * Uy + Vx * Vy) / V ** 2
    G = (Uy ** 2 + Vy ** 2) / V ** 2 + 1.0

    det = E * G - F ** 2
    # unit normal (NU, NV, NY): orthogonal complement of span(F_x, F_y)
    # in the product metric diag(1/V^2, 1/V^2, 1)
    nu_raw = -Vx
    nv_raw = Ux
    nyc = -(nu_raw * Uy + nv_raw * Vy) / V ** 2
    nrm = np.sqrt((nu_raw ** 2 + nv_raw ** 2) / V ** 2 + nyc ** 2)
    NU, NV, NY = nu_raw / nrm, nv_raw / nrm, nyc / nrm

    def two_form(Wab_u, Wab_v):
        return (Wab_u * NU + Wab_v * NV) / V ** 2

    LUxx = Uxx - (Ux * Vx + Vx * Ux) / V
    LVxx = Vxx + (Ux * Ux - Vx * Vx) / V
    LUxy = Uxy - (Ux * Vy + Vx * Uy) / V
    LVxy = Vxy + (Ux * Uy - Vx * Vy) / V
    LUyy = Uyy - (Uy * Vy + Vy * Uy) / V
    LVyy = Vyy + (Uy * Uy - Vy * Vy) / V
    IIxx = two_form(LUxx, LVxx)
    IIxy = two_form(LUxy, LVxy)
    IIyy = two_form(LUyy, LVyy)

    H = 0.5 * (G * IIxx - 2.0 * F * IIxy + E * IIyy) / det
    Kext = (IIxx * IIyy - IIxy ** 2) / det
    return {"E": E, "F": F, "G": G, "det": det, "H": H, "Kext": Kext,
            "II": (IIxx, IIxy, IIyy)}


def willmore_of_deformation(torus: TorusImmersion, phi: FourierField,
                            t: float, nx: int = 256, ny: int = 64) -> float:
    """Willmore energy of the displaced immersion, exact in t."""
    d = deformed_surface_data(torus, phi, t, nx, ny)
    dens = (d["H"] ** 2 - d["Kext"]) * np.sqrt(d["det"])
    return quadrature(dens, torus.curve.b)


def tau_of_metric(E: NDArray, F: NDArray, G: NDArray, b: float,
                  max_iter: int = 80, tol: float = 1e-14):
    """Period map: unreduced conformal class of a sampled metric.

    Builds a closed complex one-form of type (1, 0) for the metric by a
    spectral fixed-point iteration and takes the ratio of its two cycle
    periods.  Works for metrics reasonably close to conformal-flat, which
    covers every small deformation used here.  Returns (tau, residual)
    before modular reduction so derivative probes stay smooth.
    """
    nx, ny = E.shape
    m = (F + 1j * np.sqrt(E * G - F ** 2)) / E
    dm = m - 1j
    wx = 2.0 * np.pi * np.fft.fftfreq(nx, d=2.0 * np.pi * b / nx)
    wy = 2.0 * np.pi * np.fft.fftfreq(ny, d=2.0 * np.pi / ny)
    sym = -(wx[:, None] + 1j * wy[None, :])  # of i d/dx - d/dy
    w = np.zeros_like(m)
    for _ in range(max_iter):
        rhs = _ddx_samples(-(1.0 + w) * dm, b)
        spec = np.fft.fft2(rhs) / (nx * ny)
        spec[0, 0] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            what = np.where(sym != 0.0,
                            spec / np.where(sym == 0.0, 1.0, sym), 0.0)
        w_new = np.fft.ifft2(what) * (nx * ny)
        delta = np.max(np.abs(w_new - w))
        w = w_new
        if delta < tol:
            break
    f = 1.0 + w
    closed = _ddx_samples(f * m, b) - _ddy_samples(f)
    residual = float(np.max(np.abs(closed)))
    px = np.mean(np.sum(f, axis=0)) * (2.0 * np.pi * b / nx)
    py = np.mean(np.sum(f * m, axis=1)) * (2.0 * np.pi / ny)
    tau = complex(-px / py)
    if tau.imag < 0.0:
        tau = -tau.conjugate()
    return tau, residual


def _ddx_samples(s: NDArray, b: float) -> NDArray:
    nx = s.shape[0]
    wx = 2.0 * np.pi * np.fft.fftfreq(nx, d=2.0 * np.pi * b / nx)
    return np.fft.ifft(1j * wx[:, None] * np.fft.fft(s, axis=0), axis=0)


def _ddy_samples(s: NDArray) -> NDArray:
    ny = s.shape[1]
    wy = 2.0 * np.pi * np.fft.fftfreq(ny, d=2.0 * np.pi / ny)
    return np.fft.ifft(1j * wy[None, :] * np.fft.fft(s, axis=1), axis=1)


def conformal_class(torus: TorusImmersion, phi: FourierField = None,
                    t: float = 0.0, nx: int = 256,
                    ny: int = 64) -> ConformalClass:
    """Conformal class of the torus, optionally displaced by t phi N.

    The length normalization of the profile curve makes the undeformed
    class exactly i b, already in the fundamental domain for b >= 1.
    """
    if phi is None or t == 0.0:
        one = np.ones((nx, ny))
        tau, residual = tau_of_metric(one, np.zeros((nx, ny)), one,
                                      torus.curve.b)
    else:
        d = deformed_surface_data(torus, phi, t, nx, ny)
        tau, residual = tau_of_metric(d["E"], d["F"], d["G"], torus.curve.b)
    return ConformalClass.from_tau(tau, residual)


def pi2_of_deformation(torus: TorusImmersion, phi: FourierField, t: float,
                       nx: int = 256, ny: int = 64) -> float:
    """Second modulus of the displaced torus, before modular reduction."""
    if t == 0.0:
        return torus.curve.b
    d = deformed_surface_data(torus, phi, t, nx, ny)
    tau, _ = tau_of_metric(d["E"], d["F"], d["G"], torus.curve.b)
    return tau.imag


def reduce_modular(tau: complex) -> complex:
    """Move a class into the standard fundamental domain."""
    tau = complex(tau)
    for _ in range(128):
        tau = complex(tau.real - np.round(tau.real), tau.imag)
        if abs(tau) < 1.0 - 1e-14:
            tau = -1.0 / tau
        else:
            return tau
    return tau
