"""Hyperbolic upper half-plane primitives.

Model: H2 = {(u, v) : v > 0} with metric (du^2 + dv^2) / v^2, curvature -1.
Profile curves of equivariant tori live here; the ambient conformal group
of the 3-sphere shows up only through the normal components its generators
induce on a torus of revolution, which is what the Moebius field helpers
return.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import qr, svd

from .errors import ConditioningError
from .spectral import FourierField, analyze

if TYPE_CHECKING:
    from .elastica import TorusImmersion


@dataclass(frozen=True)
class HPoint:
    u: float
    v: float

    def __post_init__(self):
        if not self.v > 0.0:
            raise ValueError("half-plane point needs v > 0")


@dataclass(frozen=True)
class TangentVec:
    """Tangent vector (du, dv) anchored at a half-plane point."""
    at: HPoint
    du: float
    dv: float


def hyp_norm(vec: TangentVec) -> float:
    return float(np.hypot(vec.du, vec.dv) / vec.at.v)


def hyp_dist(u1, v1, u2, v2):
    """Geodesic distance; works elementwise on arrays."""
    q = 1.0 + ((u1 - u2) ** 2 + (v1 - v2) ** 2) / (2.0 * v1 * v2)
    return np.arccosh(q)


def geodesic_curvature(u, v, du, dv, ddu, ddv, tol=1e-6):
    """Signed curvature of an arclength curve from one frame sample.

    The two second-order frame equations

        ddu = -kappa dv + 2 du dv / v
        ddv =  kappa du - (du^2 - dv^2) / v

    are each solved for kappa wherever their coefficient is away from zero,
    and the two values must agree to 1e-8 relative; the returned value is
    the combination (du ddv - dv ddu + du v) / v^2, which equals both when
    the arclength relation holds.  Elementwise on arrays.

    Raises if the arclength relation du^2 + dv^2 = v^2 fails beyond tol, or
    if the two back-solved values disagree.
    """
    u, v, du, dv, ddu, ddv = np.broadcast_arrays(
        *(np.asarray(q, dtype=float) for q in (u, v, du, dv, ddu, ddv)))
    arc = np.abs(du ** 2 + dv ** 2 - v ** 2)
    if np.any(arc > tol * v ** 2):
        raise ValueError(
            f"arclength relation violated: max residual {np.max(arc):.3e}")
    kap = (du * ddv - dv * ddu + du * v) / v ** 2
    scale = 1.0 + np.abs(kap)
    m1 = np.abs(dv) > 0.3 * v
    k1 = (2.0 * du * dv / v - ddu)[m1] / dv[m1]
    m2 = np.abs(du) > 0.3 * v
    k2 = (ddv + (du ** 2 - dv ** 2) / v)[m2] / du[m2]
    worst = 0.0
    if k1.size:
        worst = max(worst, float(np.max(np.abs(k1 - kap[m1]) / scale[m1])))
    if k2.size:
        worst = max(worst, float(np.max(np.abs(k2 - kap[m2]) / scale[m2])))
    if worst > 1e-8:
        raise ValueError(
            f"frame equations disagree on kappa: relative gap {worst:.3e}")
    return kap if kap.ndim else float(kap)


def curvature_general(u_x, v_x, u_xx, v_xx, v):
    """Signed geodesic curvature for an arbitrary regular parametrization.

    Sign convention: a horocycle v = const traversed toward +u has
    curvature +1; the normal is the left normal (-v_x, u_x).  Elementwise.
    """
    sp2 = u_x ** 2 + v_x ** 2
    if np.any(sp2 <= 0.0):
        raise ValueError("parametrization has a singular point")
    return v * (u_x * v_xx - v_x * u_xx) / sp2 ** 1.5 + u_x / np.sqrt(sp2)


def normal_field(du, dv):
    """Left normal of an arclength frame: (du, dv) -> (-dv, du).

    For an arclength curve the frame has euclidean length v, hence so does
    the normal, making it a hyperbolic unit normal.  Elementwise.
    """
    return -np.asarray(dv), np.asarray(du)


@dataclass(frozen=True)
class KillingField:
    """Infinitesimal isometry of the half-plane with its closed-form flow."""

    name: str
    coeffs: Callable[[NDArray, NDArray], tuple[NDArray, NDArray]]
    flow: Callable[[float, NDArray, NDArray], tuple[NDArray, NDArray]]

    def at(self, u, v):
        return self.coeffs(u, v)

    def normal_component(self, u, v, du, dv):
        """Hyperbolic inner product with the unit left normal of an
        arclength frame."""
        a, c = self.coeffs(u, v)
        return (-a * dv + c * du) / v ** 2


def _flow_translate(t, u, v):
    return u + t, v


def _flow_dilate(t, u, v):
    s = np.exp(t)
    return s * u, s * v


def _flow_special(t, u, v):
    # z -> z / (1 - t z) on z = u + i v
    z = u + 1j * v
    w = z / (1.0 - t * z)
    return w.real, w.imag


def isometry_basis() -> list[KillingField]:
    """Basis of the isometry algebra of the half-plane.

    Horizontal translation, dilation about the origin, and the special
    conformal generator z^2 d/dz; their flows are Moebius maps fixing the
    real axis.
    """
    return [
        KillingField("translate", lambda u, v: (np.ones_like(u), np.zeros_like(v)),
                     _flow_translate),
        KillingField("dilate", lambda u, v: (u, v), _flow_dilate),
        KillingField("special", lambda u, v: (u ** 2 - v ** 2, 2.0 * u * v),
                     _flow_special),
    ]


def killing_residual(field: KillingField, u, v, h: float = 1e-5) -> float:
    """Finite-difference residual of the Killing equation along the flow.

    Pushes the coordinate frame at each point through the flow for times
    +-h and measures the t-derivative of the pulled-back metric.  Zero for
    an exact isometry flow; O(1) for a generic vector field flow.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    eps = 1e-6
    worst = 0.0
    for e1, e2 in (((eps, 0.0), (0.0, eps)), ((eps, eps), (eps, -eps))):
        def gram(t):
            pu0, pv0 = field.flow(t, u, v)
            pu1, pv1 = field.flow(t, u + e1[0], v + e1[1])
            pu2, pv2 = field.flow(t, u + e2[0], v + e2[1])
            d1 = ((pu1 - pu0) ** 2 + (pv1 - pv0) ** 2) / pv0 ** 2
            d2 = ((pu2 - pu0) ** 2 + (pv2 - pv0) ** 2) / pv0 ** 2
            cr = ((pu1 - pu0) * (pu2 - pu0)
                  + (pv1 - pv0) * (pv2 - pv0)) / pv0 ** 2
            return np.stack([d1, d2, cr])
        rate = (gram(h) - gram(-h)) / (2.0 * h)
        worst = max(worst, float(np.max(np.abs(rate))) / eps ** 2)
    return worst


def embed_in_sphere(u, v, y):
    """Map half-plane points plus a revolution angle into the unit 3-sphere.

    The half-plane is the orbit space of a circle action on S^3 rotating
    about a great circle, rescaled by the inverse squared orbit radius.
    Writing S^3 in C^2 as (cos r e^{i theta}, sin r e^{i psi}), the slice
    psi = const carries the metric (dr^2 + cos^2 r dtheta^2) / sin^2 r of
    curvature -1; this routine inverts the isometry half-plane -> slice and
    uses y as the revolution angle psi.  Arrays broadcast; returns an array
    with a trailing axis of length 4.
    """
    z = np.asarray(u) + 1j * np.asarray(v)
    w = (1j - z) / (1j + z)
    R = np.abs(w)
    theta = np.angle(w)
    # hyperbolic distance d to the cap point satisfies tan(r/2) = exp(-d)
    r = 2.0 * np.arctan((1.0 - R) / (1.0 + R))
    z1 = np.cos(r) * np.exp(1j * theta)
    z2 = np.sin(r) * np.exp(1j * np.asarray(y))
    z1, z2 = np.broadcast_arrays(z1, z2)
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


def orbit_radius(u, v):
    """Radius of the revolution orbit through a half-plane point.

    Equals sin r in the embedding chart; also the conformal factor relating
    the product model to the round sphere.
    """
    z = np.asarray(u) + 1j * np.asarray(v)
    R = np.abs((1j - z) / (1j + z))
    r = 2.0 * np.arctan((1.0 - R) / (1.0 + R))
    return np.sin(r)


def _profile_to_field(profile: NDArray, b: float, J: int, M: int,
                      y_mode: int, y_family: str, label: str) -> FourierField:
    """Lift an x-profile to a torus field concentrated on one y-harmonic."""
    xf = analyze(profile[:, None].repeat(2, axis=1), b, J=J, M=0)
    a = [np.zeros((J + 1, M + 1)) for _ in range(4)]
    if y_mode == 0:
        a[0][:, 0] = xf.a1[:, 0]
        a[2][:, 0] = xf.a3[:, 0]
    elif y_family == "cos":
        a[0][:, y_mode] = xf.a1[:, 0]
        a[2][:, y_mode] = xf.a3[:, 0]
    else:
        a[1][:, y_mode] = xf.a1[:, 0]
        a[3][:, y_mode] = xf.a3[:, 0]
    return FourierField(b, *a, label=label)


def _conformal_generators():
    """The ten generators of the conformal algebra of euclidean 3-space,
    as point -> vector maps on arrays of shape (..., 3)."""
    def translate(axis):
        def gen(p):
            out = np.zeros_like(p)
            out[..., axis] = 1.0
            return out
        return gen

    def rotate(i, j):
        def gen(p):
            out = np.zeros_like(p)
            out[..., j] = p[..., i]
            out[..., i] = -p[..., j]
            return out
        return gen

    def dilate(p):
        return p.copy()

    def special(axis):
        def gen(p):
            n2 = np.sum(p ** 2, axis=-1, keepdims=True)
            out = -2.0 * p[..., axis: axis + 1] * p
            out[..., axis] += n2[..., 0]
            return out
        return gen

    gens = [("translate_x", translate(0)), ("translate_y", translate(1)),
            ("translate_z", translate(2)), ("rotate_xy", rotate(0, 1)),
            ("rotate_xz", rotate(0, 2)), ("rotate_yz", rotate(1, 2)),
            ("dilate", dilate), ("special_x", special(0)),
            ("special_y", special(1)), ("special_z", special(2))]
    return gens


def ambient_mobius_normal_fields(torus: "TorusImmersion", J: int = 48,
                                 M: int = 2) -> list[FourierField]:
    """Normal parts of the sphere's conformal generators along the torus.

    The torus is realized in R^3 as (u(x), v(x) cos y, v(x) sin y), a chart
    conformal to the 3-sphere, and each of the ten conformal generators is
    paired with the product-model unit normal.  The resulting variation
    fields have y-dependence confined to the harmonics {1, cos y, sin y};
    the rotation in the plane of the revolution orbits acts tangentially
    and drops out.  Returns a maximal numerically independent subset,
    grouped by y-harmonic, selected per harmonic by singular values with a
    relative threshold of 1e-8.

    Raises ConditioningError if the singular values leave no factor-10 gap
    between kept and discarded directions.
    """
    c = torus.curve
    b = c.b
    ny = 8
    y = np.arange(ny) * (2.0 * np.pi / ny)
    pts = np.stack([np.broadcast_to(c.u[:, None], (c.n, ny)),
                    c.v[:, None] * np.cos(y)[None, :],
                    c.v[:, None] * np.sin(y)[None, :]], axis=-1)
    nrm = np.stack([np.broadcast_to(-c.dv[:, None], (c.n, ny)),
                    c.du[:, None] * np.cos(y)[None, :],
                    c.du[:, None] * np.sin(y)[None, :]], axis=-1)
    weight = c.v[:, None] ** 2
    sectors: dict[tuple[int, str], list[tuple[str, NDArray]]] = {
        (0, "cos"): [], (1, "cos"): [], (1, "sin"): []}
    for name, gen in _conformal_generators():
        w = gen(pts)
        phi = np.sum(w * nrm, axis=-1) / weight
        # purely tangential generators (the revolution direction itself)
        # leave only rounding noise in the normal component; drop them
        ref = np.max(np.linalg.norm(w, axis=-1)
                     * np.linalg.norm(nrm, axis=-1) / weight)
        scale = max(float(np.max(np.abs(phi))), 1e-30)
        if scale <= 1e-12 * ref:
            continue
        p0 = phi.mean(axis=1)
        pc = 2.0 * (phi * np.cos(y)[None, :]).mean(axis=1)
        ps = 2.0 * (phi * np.sin(y)[None, :]).mean(axis=1)
        rebuilt = (p0[:, None] + pc[:, None] * np.cos(y)[None, :]
                   + ps[:, None] * np.sin(y)[None, :])
        if np.max(np.abs(phi - rebuilt)) > 1e-9 * scale:
            raise ConditioningError(
                f"generator {name} leaks outside y-harmonics 0 and 1")
        for prof, key in ((p0, (0, "cos")), (pc, (1, "cos")),
                          (ps, (1, "sin"))):
            if np.max(np.abs(prof)) > 1e-10 * scale:
                sectors[key].append((name, prof))
    fields: list[FourierField] = []
    for (mode, fam), cands in sectors.items():
        if not cands:
            continue
        cols = np.column_stack([p for _, p in cands])
        cols = cols / np.linalg.norm(cols, axis=0)
        s = svd(cols, compute_uv=False)
        rank = int(np.sum(s > 1e-8 * s[0]))
        if rank < len(cands) and s[rank - 1] < 10.0 * s[rank]:
            raise ConditioningError(
                f"ambiguous rank in y-harmonic sector {mode}/{fam}: "
                f"singular values {s}")
        _, _, piv = qr(cols, pivoting=True)
        for i in sorted(piv[:rank]):
            name, prof = cands[i]
            suffix = "" if mode == 0 else f"_{fam}"
            fields.append(_profile_to_field(prof, b, J, M, mode, fam,
                                            f"{name}{suffix}"))
    return fields
