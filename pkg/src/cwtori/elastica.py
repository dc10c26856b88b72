"""Closed elastic curves in the half-plane and the equivariant tori over them.

A curve with geodesic curvature kappa is elastic for multiplier mu when

    kappa'' + kappa^3 / 2 + (mu - 1) kappa = 0,

which integrates once to kappa'^2 + kappa^4 / 4 + (mu - 1) kappa^2 + nu = 0.
The pair (mu, nu) fixes a biquadratic with roots +-r3, +-r4; orbit-like
solutions oscillate in [r3, r4] with kappa > 0.  Closed curves come in two
families: the constant-curvature circles, and for each conformal parameter
b > sqrt(3) a two-lobed curve of length 2 pi b singled out by a shooting
problem.  Every closed curve here spins into an immersed torus in the
3-sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import solve_ivp

from .errors import ShootingError
from .geometry import embed_in_sphere, geodesic_curvature
from .spectral import TrigSeries, profile_derivative

TWO_LOBE_MIN_B = np.sqrt(3.0)

# (d/dt)^2 of the Willmore energy equals HESSIAN_SCALE times the quadratic
# form of the bending operator; the torus multiplier is mu / HESSIAN_SCALE.
HESSIAN_SCALE = 2.0

_IVP_OPTS = dict(method="DOP853", rtol=1e-13, atol=1e-14)


@dataclass(frozen=True)
class ElasticaParams:
    """Invariants (mu, nu) of the curvature quartic."""

    mu: float
    nu: float

    def roots(self) -> NDArray:
        return quartic_roots(self)


def quartic_roots(params, nu: float = None) -> NDArray:
    """Real roots of kappa^4/4 + (mu-1) kappa^2 + nu, ascending.

    Accepts an ElasticaParams or the pair (mu, nu).  Raises if the
    polynomial has fewer than four real roots (counted with multiplicity),
    i.e. outside the orbit-like regime.
    """
    if nu is None:
        mu, nu = params.mu, params.nu
    else:
        mu = float(params)
    if mu > 1.0 + 1e-12:
        raise ValueError(f"no orbit-like regime: mu = {mu} > 1")
    disc = (1.0 - mu) ** 2 - nu
    if disc < 0.0:
        raise ValueError("quartic has complex roots: nu exceeds (1 - mu)^2")
    if nu < 0.0:
        raise ValueError("quartic has only two real roots: nu < 0")
    hi = 2.0 * (1.0 - mu) + 2.0 * np.sqrt(disc)
    lo = 2.0 * (1.0 - mu) - 2.0 * np.sqrt(disc)
    hi = max(hi, 0.0)  # guards roundoff at the mu = 1 corner
    lo = min(max(lo, 0.0), hi)
    r4 = np.sqrt(hi)
    r3 = np.sqrt(lo)
    return np.array([-r4, -r3, r3, r4])


def _params_from_roots(r3: float, r4: float) -> tuple[float, float]:
    # biquadratic with positive roots r3 <= r4
    mu = 1.0 - 0.25 * (r3 ** 2 + r4 ** 2)
    nu = 0.25 * (r3 * r4) ** 2
    return mu, nu


def kappa_period(r3: float, r4: float, n: int = 256) -> float:
    """Arclength period of the curvature oscillation between r3 and r4.

    The substitution kappa = m + a cos(theta) removes both square-root
    endpoints, so the trapezoid rule converges spectrally.
    """
    if r4 - r3 < 1e-14:
        # degenerate orbit: linearized oscillation about the constant
        # solution at fixed multiplier has frequency k0, the continuous
        # limit of the integral below
        k0 = r4
        return 2.0 * np.pi / max(k0, 1e-300)
    theta = np.linspace(0.0, np.pi, n + 1)
    kap = 0.5 * (r4 + r3) + 0.5 * (r4 - r3) * np.cos(theta)
    f = 4.0 / np.sqrt((kap + r3) * (kap + r4))
    return float(np.trapezoid(f, theta))


def _rhs(x, s, mu):
    kap, dk, u, v, du, dv = s
    return (
        dk,
        -0.5 * kap ** 3 + (1.0 - mu) * kap,
        du,
        dv,
        -kap * dv + 2.0 * du * dv / v,
        kap * du - (du ** 2 - dv ** 2) / v,
    )


def _integrate_state(mu: float, state0, x_end: float, t_eval=None):
    sol = solve_ivp(_rhs, (0.0, x_end), state0, args=(mu,),
                    t_eval=t_eval, dense_output=False, **_IVP_OPTS)
    if not sol.success:
        raise RuntimeError(f"curve integration failed: {sol.message}")
    return sol


def integrate_kappa(params: ElasticaParams, kappa0: float, dkappa0: float,
                    length: float, n: int = 1024):
    """Curvature and its derivative along the flow, on a uniform x grid.

    The initial data must sit on the level set of the first integral fixed
    by nu.  Also reports the worst drift of the conserved quartic, a direct
    measure of integration error.
    """
    gap = abs(dkappa0 ** 2 + 0.25 * kappa0 ** 4
              + (params.mu - 1.0) * kappa0 ** 2 + params.nu)
    if gap > 1e-10:
        raise ValueError(
            f"initial data off the first-integral level set by {gap:.3e}")
    x = np.linspace(0.0, length, n + 1)

    def rhs(t, s):
        kap, dk = s
        return (dk, -0.5 * kap ** 3 + (1.0 - params.mu) * kap)

    sol = solve_ivp(rhs, (0.0, length), (kappa0, dkappa0), t_eval=x,
                    **_IVP_OPTS)
    if not sol.success:
        raise RuntimeError(f"curvature integration failed: {sol.message}")
    kap, dk = sol.y
    drift = np.max(np.abs(dk ** 2 + 0.25 * kap ** 4
                          + (params.mu - 1.0) * kap ** 2 + params.nu))
    return x, kap, dk, float(drift)


@dataclass
class ProfileCurve:
    """Arclength-parametrized curve sampled on a uniform grid.

    x runs over [0, 2 pi b); the stored end state is the integrated state
    at x = 2 pi b and backs the closure diagnostic.  lobes counts curvature
    maxima for the closed families (1 for circles, 2 for two-lobed curves)
    and is 0 for curves rebuilt from raw curvature samples.
    """

    b: float
    x: NDArray
    kappa: NDArray
    dkappa: NDArray
    u: NDArray
    v: NDArray
    du: NDArray
    dv: NDArray
    mu: float
    nu: float
    lobes: int = 0
    end_state: NDArray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]

    @property
    def length(self) -> float:
        return 2.0 * np.pi * self.b

    def closure_gap(self) -> float:
        if self.end_state is None:
            return np.nan
        s0 = np.array([self.kappa[0], self.dkappa[0], self.u[0],
                       self.v[0], self.du[0], self.dv[0]])
        return float(np.max(np.abs(self.end_state - s0)))

    def diagnostics(self) -> dict:
        """Residuals of the structural identities the curve must satisfy.

        Closed curves are differentiated spectrally; open arcs fall back to
        five-point finite differences on interior samples.
        """
        arc = np.max(np.abs(self.du ** 2 + self.dv ** 2 - self.v ** 2))
        first = np.max(np.abs(self.dkappa ** 2 + 0.25 * self.kappa ** 4
                              + (self.mu - 1.0) * self.kappa ** 2 + self.nu))
        closure = self.closure_gap()
        if not np.isnan(closure) and closure < 1e-5:
            d2k = profile_derivative(self.dkappa, self.b, order=1,
                                     threshold=1e-12)
            # differentiate the tangent angle rather than the coordinates:
            # the angle is O(1) everywhere, so its spectral derivative is
            # insensitive to the large dynamic range of v along the curve
            theta = np.unwrap(np.arctan2(self.dv, self.du))
            step = np.arctan2(self.du[-1] * self.dv[0]
                              - self.dv[-1] * self.du[0],
                              self.du[-1] * self.du[0]
                              + self.dv[-1] * self.dv[0])
            winding = round((theta[-1] - theta[0] + step) / (2.0 * np.pi))
            ramp = winding * self.x / self.b
            dtheta = (profile_derivative(theta - ramp, self.b, 1,
                                         threshold=1e-12)
                      + winding / self.b)
            ddu = self.du * self.dv / self.v - self.dv * dtheta
            ddv = self.dv ** 2 / self.v + self.du * dtheta
            sl = slice(None)
        else:
            dx = self.x[1] - self.x[0]
            d2k = _fd_second(self.kappa, dx)
            ddu = _fd_second(self.u, dx)
            ddv = _fd_second(self.v, dx)
            sl = slice(2, -2)
        euler = np.max(np.abs((d2k + 0.5 * self.kappa ** 3
                               + (self.mu - 1.0) * self.kappa)[sl]))
        kap_geo = geodesic_curvature(self.u[sl], self.v[sl], self.du[sl],
                                     self.dv[sl], ddu[sl], ddv[sl])
        return {
            "arclength": float(arc),
            "first_integral": float(first),
            "euler_lagrange": float(euler),
            "curvature_match": float(np.max(np.abs(kap_geo
                                                   - self.kappa[sl]))),
            "closure": closure,
        }


def _fd_second(ys: NDArray, dx: float) -> NDArray:
    """Five-point second derivative; endpoints copied from their neighbors
    (callers restrict to interior samples)."""
    out = np.empty_like(ys)
    out[2:-2] = (-ys[4:] + 16.0 * ys[3:-1] - 30.0 * ys[2:-2]
                 + 16.0 * ys[1:-3] - ys[:-4]) / (12.0 * dx ** 2)
    out[:2] = out[2]
    out[-2:] = out[-3]
    return out


def reconstruct_curve(x: NDArray, kappa: NDArray,
                      start=(0.0, 1.0, 1.0, 0.0)) -> ProfileCurve:
    """Integrate the frame equations for a given curvature profile.

    kappa is taken as samples on the uniform grid x and interpolated
    trigonometrically over the spanned window; start is the initial frame
    (u, v, du, dv), which must satisfy the arclength relation.  The result
    need not close up; its (mu, nu) are least-squares fits to the first
    integral and are only meaningful if the input was elastic.
    """
    x = np.asarray(x, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    u0, v0, du0, dv0 = (float(q) for q in start)
    if abs(du0 ** 2 + dv0 ** 2 - v0 ** 2) > 1e-8 * v0 ** 2:
        raise ValueError("start frame violates the arclength relation")
    dx = x[1] - x[0]
    span = x[-1] - x[0] + dx
    series = TrigSeries(kappa, span)

    def rhs(t, s):
        u, v, du, dv = s
        kap = series(t - x[0])
        return (du, dv, -kap * dv + 2.0 * du * dv / v,
                kap * du - (du ** 2 - dv ** 2) / v)

    sol = solve_ivp(rhs, (x[0], x[0] + span), (u0, v0, du0, dv0),
                    t_eval=np.concatenate([x, [x[0] + span]]), **_IVP_OPTS)
    if not sol.success:
        raise RuntimeError(f"frame integration failed: {sol.message}")
    if np.any(sol.y[1] <= 0.0):
        raise RuntimeError("curve hit the boundary v = 0")
    u, v, du, dv = sol.y[:, :-1]
    dk = series.derivative(x - x[0])
    # least-squares (mu, nu) from dk^2 + kappa^4/4 + (mu-1) kappa^2 + nu = 0
    a_mat = np.column_stack([kappa ** 2, np.ones_like(kappa)])
    rhs_fit = -dk ** 2 - 0.25 * kappa ** 4
    coef, *_ = np.linalg.lstsq(a_mat, rhs_fit, rcond=None)
    mu, nu = float(coef[0] + 1.0), float(coef[1])
    end = np.concatenate([[series(span), series.derivative(span)],
                          sol.y[:, -1]])
    return ProfileCurve(b=span / (2.0 * np.pi), x=x, kappa=kappa, dkappa=dk,
                        u=u, v=v, du=du, dv=dv, mu=mu, nu=nu, lobes=0,
                        end_state=end)


# ---------------------------------------------------------------------------
# closure classification over one curvature period

def closure_residual(params: ElasticaParams = None, *, mu: float = None,
                     nu: float = None,
                     start=(0.0, 1.0, 1.0, 0.0)) -> tuple[float, float, float]:
    """Holonomy of one curvature period as a half-plane isometry.

    Integrates the frame over a single period of kappa (between consecutive
    curvature maxima, starting at the largest quartic root with kappa'=0),
    writes the state transport as a Moebius matrix, and classifies it.
    Returns (gap_translation, gap_frame, lobe_angle):

    - gap_translation: translation length of the holonomy, zero when it is
      a rotation;
    - gap_frame: how far the smallest power of the holonomy that should
      close the curve is from the identity;
    - lobe_angle: rotation angle of the holonomy about its fixed point, in
      (0, pi] folded, or 2 pi for a constant-curvature circle.
    """
    if params is not None:
        mu, nu = params.mu, params.nu
    u0, v0, du0, dv0 = (float(q) for q in start)
    if abs(du0 ** 2 + dv0 ** 2 - v0 ** 2) > 1e-8 * v0 ** 2:
        raise ValueError("start frame violates the arclength relation")
    roots = quartic_roots(mu, nu)
    r3, r4 = roots[2], roots[3]
    if r4 - r3 < 1e-8:
        return 0.0, 0.0, 2.0 * np.pi
    if r3 < 1e-10:
        raise ValueError("separatrix parameters: curvature period diverges")
    period = kappa_period(r3, r4)
    sol = _integrate_state(mu, (r4, 0.0, u0, v0, du0, dv0), period)
    kap, dk, u, v, du, dv = sol.y[:, -1]
    m_start = _frame_matrix(u0, v0, du0, dv0)
    m_end = _frame_matrix(u, v, du, dv) @ np.linalg.inv(m_start)
    tr = m_end[0, 0] + m_end[1, 1]
    if abs(tr) >= 2.0 - 1e-12:
        gap_t = 2.0 * np.arccosh(max(abs(tr) / 2.0, 1.0))
        gap_f = float(np.linalg.norm(m_end - np.eye(2)))
        return float(gap_t), gap_f, 0.0
    a, bb = m_end[0]
    c, d = m_end[1]
    zs = ((a - d) + np.sqrt(complex((a - d) ** 2 + 4.0 * bb * c))) / (2.0 * c)
    if zs.imag < 0.0:
        zs = ((a - d) - np.sqrt(complex((a - d) ** 2 + 4.0 * bb * c))) \
            / (2.0 * c)
    angle = abs(-2.0 * np.angle(c * zs + d))
    angle = min(angle, 2.0 * np.pi - angle)
    n_close = max(int(round(2.0 * np.pi / angle)), 1) if angle > 1e-9 else 1
    m_pow = np.linalg.matrix_power(m_end, n_close)
    if m_pow[0, 0] + m_pow[1, 1] < 0.0:
        m_pow = -m_pow  # projective sign
    gap_f = float(np.linalg.norm(m_pow - np.eye(2)))
    return 0.0, gap_f, float(angle)


def _frame_matrix(u, v, du, dv):
    """Moebius matrix taking the reference state at i to the given state."""
    theta = np.arctan2(dv, du)
    ch, sh = np.cos(-theta / 2.0), np.sin(-theta / 2.0)
    rot = np.array([[ch, sh], [-sh, ch]])
    sv = np.sqrt(v)
    move = np.array([[sv, u / sv], [0.0, 1.0 / sv]])
    return move @ rot


# ---------------------------------------------------------------------------
# the two-lobed branch

_branch_cache: dict[float, tuple[float, float]] = {}


def _two_lobe_residual(r3: float, r4: float, b: float) -> NDArray:
    """Shooting residuals: curvature period fits b, and the curve's normal
    geodesic at the quarter point passes through the rotation center.

    The curve starts at a curvature maximum on the v axis; reflectional
    symmetry then demands the curvature minimum sit on a geodesic through
    the origin, which is the second component.  The first is the period
    mismatch: two lobes of total length 2 pi b.
    """
    mu, _ = _params_from_roots(r3, r4)
    period = kappa_period(r3, r4)
    sol = _integrate_state(mu, (r4, 0.0, 0.0, 1.0, 1.0, 0.0), period / 2.0)
    _, _, u, v, du, dv = sol.y[:, -1]
    axis = (v * du - u * dv) / (v * np.hypot(u, v))
    return np.array([axis, period - np.pi * b])


def _newton_two_lobe(r3: float, r4: float, b: float,
                     tol: float = 5e-12, max_iter: int = 40):
    s = np.array([r3, r4])
    res = _two_lobe_residual(*s, b)
    for _ in range(max_iter):
        nrm = np.max(np.abs(res))
        if nrm < tol:
            return s
        jac = np.empty((2, 2))
        for j in range(2):
            h = 1e-7 * max(abs(s[j]), 0.1)
            sp = s.copy()
            sp[j] += h
            jac[:, j] = (_two_lobe_residual(*sp, b) - res) / h
        step = np.linalg.solve(jac, res)
        lam = 1.0
        for _ in range(8):
            cand = s - lam * step
            if 0.0 < cand[0] < cand[1] and cand[0] > 1e-6:
                try:
                    cres = _two_lobe_residual(*cand, b)
                except (ValueError, RuntimeError):
                    lam *= 0.5
                    continue
                if np.max(np.abs(cres)) < nrm or lam < 0.2:
                    s, res = cand, cres
                    break
            lam *= 0.5
        else:
            raise ShootingError(f"line search stalled at b={b}")
    raise ShootingError(f"shooting did not converge at b={b}: "
                        f"residual {np.max(np.abs(res)):.3e}")


def _seed_near_onset(b: float) -> tuple[float, float]:
    k0 = np.sqrt(1.0 + 1.0 / b ** 2)
    amp = 0.35 * np.sqrt(max(b - TWO_LOBE_MIN_B, 1e-4))
    return k0 - amp, k0 + amp


def _branch_point(b: float, tol: float = 5e-12) -> tuple[float, float]:
    key = round(b, 12)
    if key in _branch_cache:
        return _branch_cache[key]
    if not b > TWO_LOBE_MIN_B:
        raise ValueError(
            f"two-lobed curves exist for b > sqrt(3) ~ 1.7320508, got {b}")
    if _branch_cache:
        b_near = min(_branch_cache, key=lambda q: abs(q - b))
        s = np.array(_branch_cache[b_near])
    else:
        b_near = min(TWO_LOBE_MIN_B + 0.05, 0.5 * (TWO_LOBE_MIN_B + b))
        s = np.array(_seed_near_onset(b_near))
        s = _newton_two_lobe(s[0], s[1], b_near)
        _branch_cache[round(b_near, 12)] = (s[0], s[1])
    db = 0.05
    cur = b_near
    while abs(cur - b) > 1e-13:
        step = np.clip(b - cur, -db, db)
        try:
            nxt = _newton_two_lobe(s[0], s[1], cur + step)
        except ShootingError:
            if abs(step) < 1e-3:
                raise
            db = abs(step) / 2.0
            continue
        cur += step
        s = nxt
        _branch_cache[round(cur, 12)] = (s[0], s[1])
    s = _newton_two_lobe(s[0], s[1], b, tol=tol)
    _branch_cache[key] = (s[0], s[1])
    return _branch_cache[key]


@dataclass
class TorusImmersion:
    """Equivariant torus in the 3-sphere swept out by a closed profile curve.

    beta is the multiplier coupling the conformal constraint into the
    stability operator, normalized so that the mode blocks of the torus
    Hessian read as curve block plus twice the bending operator; energy is
    the Willmore energy.
    """

    curve: ProfileCurve
    beta: float
    energy: float
    family: str = "two_lobe"

    @property
    def b(self) -> float:
        return self.curve.b

    @property
    def mu(self) -> float:
        return self.curve.mu

    def embed(self, ny: int = 64) -> NDArray:
        """Sample the immersion into the unit sphere in R^4, shape (n, ny, 4)."""
        y = np.arange(ny) * (2.0 * np.pi / ny)
        return embed_in_sphere(self.curve.u[:, None],
                               self.curve.v[:, None], y[None, :])


def _build_curve(mu: float, nu: float, b: float, n: int,
                 lobes: int) -> ProfileCurve:
    roots = quartic_roots(mu, nu)
    length = 2.0 * np.pi * b
    x = np.arange(n) * (length / n)
    sol = _integrate_state(mu, (roots[3], 0.0, 0.0, 1.0, 1.0, 0.0), length,
                           t_eval=np.concatenate([x, [length]]))
    kap, dk, u, v, du, dv = sol.y[:, :-1]
    end = sol.y[:, -1].copy()
    # recenter with the dilation z -> z / s: balances the coordinate
    # magnitudes so later spectral differentiation stays well conditioned
    s = np.sqrt(v.min() * v.max())
    u, v, du, dv = u / s, v / s, du / s, dv / s
    end[2:] /= s
    return ProfileCurve(b=b, x=x, kappa=kap, dkappa=dk, u=u, v=v, du=du,
                        dv=dv, mu=mu, nu=nu, lobes=lobes, end_state=end)


def _finish_torus(curve: ProfileCurve, family: str) -> TorusImmersion:
    dx = curve.x[1] - curve.x[0]
    energy = 0.25 * float(np.sum(curve.kappa ** 2)) * dx * 2.0 * np.pi
    return TorusImmersion(curve=curve, beta=curve.mu / HESSIAN_SCALE,
                          energy=energy, family=family)


def shoot_two_lobe(b: float, n: int = 2048, tol: float = 5e-12) -> TorusImmersion:
    """Two-lobed elastic torus at conformal parameter b > sqrt(3).

    Solves the closure problem by a damped Newton iteration on the two
    positive quartic roots, walking along the branch from the last solved
    parameter.  The returned curve is resampled on a uniform grid of n
    points over its full length 2 pi b, with shooting residuals below tol.
    """
    r3, r4 = _branch_point(b, tol=tol)
    mu, nu = _params_from_roots(r3, r4)
    curve = _build_curve(mu, nu, b, n, lobes=2)
    return _finish_torus(curve, "two_lobe")


def homogeneous_torus(b: float, n: int = 2048) -> TorusImmersion:
    """Constant-curvature torus: the profile is a hyperbolic circle.

    Curvature sqrt(1 + 1/b^2), length 2 pi b; b = 1 is the square torus.
    The circle is centered at i, and the arclength parametrization comes
    from a one-dimensional angular quadrature.
    """
    if b < 1.0 - 1e-12:
        raise ValueError("need b >= 1 (smaller b repeats classes above 1)")
    k0 = np.sqrt(1.0 + 1.0 / b ** 2)
    mu = (b ** 2 - 1.0) / (2.0 * b ** 2)
    nu = (1.0 - mu) ** 2
    center = b * k0
    radius = b
    length = 2.0 * np.pi * b
    x = np.arange(n) * (length / n)

    def rhs(t, s):
        return ((center + radius * np.cos(s[0])) / radius,)

    sol = solve_ivp(rhs, (0.0, length), (0.0,),
                    t_eval=np.concatenate([x, [length]]), **_IVP_OPTS)
    if not sol.success:
        raise RuntimeError(sol.message)
    phi = sol.y[0, :-1]
    phi_end = sol.y[0, -1]
    v = center + radius * np.cos(phi)
    v_end = center + radius * np.cos(phi_end)
    curve = ProfileCurve(
        b=b, x=x, kappa=np.full(n, k0), dkappa=np.zeros(n),
        u=-radius * np.sin(phi), v=v, du=-v * np.cos(phi),
        dv=-v * np.sin(phi), mu=mu, nu=nu, lobes=1,
        end_state=np.array([k0, 0.0, -radius * np.sin(phi_end), v_end,
                            -v_end * np.cos(phi_end),
                            -v_end * np.sin(phi_end)]))
    return _finish_torus(curve, "homogeneous")


def family_sweep(b_grid, family: str = "two_lobe") -> list[TorusImmersion]:
    """March along a family of tori in order of increasing b.

    The two-lobed sweep continues each solve from its predecessor; a failed
    continuation step is bisected down to a floor of 1e-3 in b before the
    shooting error propagates.
    """
    b_grid = np.asarray(b_grid, dtype=float)
    if b_grid.ndim != 1 or np.any(np.diff(b_grid) <= 0.0):
        raise ValueError("b grid must be strictly increasing")
    if family == "two_lobe":
        return [shoot_two_lobe(float(b)) for b in b_grid]
    if family == "homogeneous":
        return [homogeneous_torus(float(b)) for b in b_grid]
    raise ValueError(f"unknown family {family!r}")
