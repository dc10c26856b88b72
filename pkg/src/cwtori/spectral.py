"""Double Fourier fields on a flat rectangular torus.

The torus is [0, 2*pi*b) x [0, 2*pi) with coordinates (x, y).  Admissible
x-frequencies are j/b for integer j >= 0, y-frequencies are integers
k >= 0.  A real field is stored in four coefficient families

    f(x, y) = sum_jk  a1[j,k] cos(jx/b) cos(ky) + a2[j,k] cos(jx/b) sin(ky)
            + a3[j,k] sin(jx/b) cos(ky) + a4[j,k] sin(jx/b) sin(ky)

which keeps the bookkeeping of the quadratic-form computations explicit.
Transforms go through the complex FFT internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import ResolutionError


def grid(b: float, nx: int, ny: int) -> tuple[NDArray, NDArray]:
    """Uniform periodic sample points, 'ij' indexed: X[i,j], Y[i,j]."""
    x = np.arange(nx) * (2.0 * np.pi * b / nx)
    y = np.arange(ny) * (2.0 * np.pi / ny)
    return np.meshgrid(x, y, indexing="ij")


def grid_x(b: float, n: int) -> NDArray:
    return np.arange(n) * (2.0 * np.pi * b / n)


@dataclass
class FourierField:
    """Band-limited real field on the torus, four trigonometric families.

    Attributes
    ----------
    b : conformal-rectangle parameter (x-period is 2*pi*b).
    a1, a2, a3, a4 : arrays of shape (J+1, M+1); a1 = cos*cos, a2 = cos*sin,
        a3 = sin*cos, a4 = sin*sin.  Slots with a zero sine frequency are
        identically zero.
    """

    b: float
    a1: NDArray
    a2: NDArray
    a3: NDArray
    a4: NDArray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        shapes = {self.a1.shape, self.a2.shape, self.a3.shape, self.a4.shape}
        if len(shapes) != 1:
            raise ValueError("coefficient families must share one shape")
        # zero-frequency sine slots carry no information
        self.a2[:, 0] = 0.0
        self.a3[0, :] = 0.0
        self.a4[0, :] = 0.0
        self.a4[:, 0] = 0.0

    @property
    def J(self) -> int:
        return self.a1.shape[0] - 1

    @property
    def M(self) -> int:
        return self.a1.shape[1] - 1

    def copy(self) -> "FourierField":
        return FourierField(self.b, self.a1.copy(), self.a2.copy(),
                            self.a3.copy(), self.a4.copy(), self.label)

    def synthesize(self, nx: int, ny: int) -> NDArray:
        """Evaluate on the uniform nx-by-ny grid."""
        if nx < 2 * (self.J + 1) or ny < 2 * (self.M + 1):
            raise ResolutionError("grid too coarse for the stored band limit")
        spec = np.zeros((nx, ny), dtype=complex)
        J, M = self.J, self.M
        p = 0.25 * (self.a1 - self.a4)
        q = -0.25 * (self.a2 + self.a3)
        r = 0.25 * (self.a1 + self.a4)
        s = 0.25 * (self.a2 - self.a3)
        # interior (j>0, k>0): conjugate pairs at (j, +-k)
        spec[1:J + 1, 1:M + 1] = (p + 1j * q)[1:, 1:]
        spec[1:J + 1, ny - M:] = (r + 1j * s)[1:, :0:-1]
        # axes
        spec[0, 1:M + 1] = 0.5 * (self.a1[0, 1:] - 1j * self.a2[0, 1:])
        spec[1:J + 1, 0] = 0.5 * (self.a1[1:, 0] - 1j * self.a3[1:, 0])
        spec[0, 0] = self.a1[0, 0]
        # mirror to negative frequencies for a real signal
        spec[0, ny - M:] = np.conj(spec[0, M:0:-1])
        spec[nx - J:, 0] = np.conj(spec[J:0:-1, 0])
        spec[nx - J:, 1:] = np.conj(spec[J:0:-1, 1:][:, ::-1])
        return np.fft.ifft2(spec).real * (nx * ny)

    def derivative(self, dx: int = 0, dy: int = 0) -> "FourierField":
        """Exact partial derivative d^dx/dx^dx d^dy/dy^dy as a new field."""
        out = self.copy()
        out.label = ""
        for _ in range(dx):
            out = _ddx(out)
        for _ in range(dy):
            out = _ddy(out)
        return out

    def inner(self, other: "FourierField") -> float:
        """L2 inner product over the torus via the coefficient norms."""
        if other.a1.shape != self.a1.shape or other.b != self.b:
            raise ValueError("fields live on different lattices")
        wj = np.full(self.J + 1, np.pi * self.b)
        wj[0] *= 2.0
        wk = np.full(self.M + 1, np.pi)
        wk[0] *= 2.0
        w = np.outer(wj, wk)
        tot = 0.0
        for mine, theirs in ((self.a1, other.a1), (self.a2, other.a2),
                             (self.a3, other.a3), (self.a4, other.a4)):
            tot += float(np.sum(w * mine * theirs))
        return tot

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))


def _ddx(f: FourierField) -> FourierField:
    c = np.arange(f.J + 1) / f.b
    cj = c[:, None]
    # d/dx: cos(jx/b) -> -(j/b) sin(jx/b), sin -> +(j/b) cos
    return FourierField(f.b, cj * f.a3, cj * f.a4, -cj * f.a1, -cj * f.a2)


def _ddy(f: FourierField) -> FourierField:
    k = np.arange(f.M + 1)[None, :]
    return FourierField(f.b, k * f.a2, -k * f.a1, k * f.a4, -k * f.a3)


def analyze(samples: NDArray, b: float, J: int | None = None,
            M: int | None = None) -> FourierField:
    """Project grid samples onto the four trigonometric families.

    Exact for band-limited input; for general smooth input this is the
    usual collocation truncation.  J, M default to the largest frequencies
    the grid resolves without hitting the Nyquist slot.
    """
    nx, ny = samples.shape
    if J is None:
        J = nx // 2 - 1
    if M is None:
        M = ny // 2 - 1
    if J > nx // 2 - 1 or M > ny // 2 - 1:
        raise ResolutionError("requested band limit not resolved by the grid")
    spec = np.fft.fft2(samples) / (nx * ny)
    a1 = np.zeros((J + 1, M + 1))
    a2 = np.zeros((J + 1, M + 1))
    a3 = np.zeros((J + 1, M + 1))
    a4 = np.zeros((J + 1, M + 1))
    pq = spec[1:J + 1, 1:M + 1]
    rs = spec[1:J + 1, ny - M:][:, ::-1]
    a1[1:, 1:] = 2.0 * (pq.real + rs.real)
    a2[1:, 1:] = -2.0 * (pq.imag - rs.imag)
    a3[1:, 1:] = -2.0 * (pq.imag + rs.imag)
    a4[1:, 1:] = -2.0 * (pq.real - rs.real)
    a1[0, 1:] = 2.0 * spec[0, 1:M + 1].real
    a2[0, 1:] = -2.0 * spec[0, 1:M + 1].imag
    a1[1:, 0] = 2.0 * spec[1:J + 1, 0].real
    a3[1:, 0] = -2.0 * spec[1:J + 1, 0].imag
    a1[0, 0] = spec[0, 0].real
    return FourierField(b, a1, a2, a3, a4)


def basis_field(b: float, J: int, M: int, family: int, j: int, k: int,
                amplitude: float = 1.0) -> FourierField:
    """Single basis function, family in {1,2,3,4}."""
    arrs = [np.zeros((J + 1, M + 1)) for _ in range(4)]
    arrs[family - 1][j, k] = amplitude
    return FourierField(b, *arrs)


def quadrature(samples: NDArray, b: float) -> float:
    """Integral over the torus by the trapezoid rule on the periodic grid.

    On a periodic uniform grid the trapezoid rule is the plain mean times
    the area, and is spectrally accurate.
    """
    nx, ny = samples.shape
    return float(np.sum(samples)) * (2.0 * np.pi * b / nx) * (2.0 * np.pi / ny)


def inner(f_samples: NDArray, g_samples: NDArray, b: float) -> float:
    return quadrature(f_samples * g_samples, b)


def quadrature_x(samples: NDArray, b: float) -> float:
    """Integral over one x-period of a profile sampled uniformly."""
    n = samples.shape[0]
    return float(np.sum(samples)) * (2.0 * np.pi * b / n)


def profile_derivative(samples: NDArray, b: float, order: int = 1,
                       threshold: float = 0.0) -> NDArray:
    """Spectral x-derivative of a periodic profile sampled uniformly.

    threshold > 0 zeroes Fourier coefficients below threshold * max before
    differentiating, which keeps integrator noise from being amplified by
    the frequency powers.
    """
    n = samples.shape[0]
    c = np.fft.rfft(samples)
    if threshold > 0.0:
        top = np.abs(c).max()
        c[np.abs(c) < threshold * top] = 0.0
    w = 2.0j * np.pi * np.fft.rfftfreq(n, d=2.0 * np.pi * b / n)
    return np.fft.irfft(c * w ** order, n)


class TrigSeries:
    """Trigonometric interpolant of a smooth periodic profile.

    Evaluates the band-limited interpolant (and its derivatives) at
    arbitrary points; used where integrators need off-grid values.
    """

    def __init__(self, samples: NDArray, period: float,
                 threshold: float = 1e-13):
        n = samples.shape[0]
        c = np.fft.rfft(samples) / n
        keep = np.abs(c) >= threshold * np.abs(c).max()
        keep[0] = True
        self.coef = c[keep]
        self.freq = (2.0 * np.pi / period) * np.nonzero(keep)[0]
        self.period = period
        self._half = (n % 2 == 0) and keep[-1] and self.freq[-1] > 0

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        ph = np.exp(1j * np.outer(np.atleast_1d(x), self.freq))
        amp = self.coef * (1j * self.freq) ** order
        amp = amp * 2.0
        amp[0] *= 0.5
        if self._half:
            amp[-1] *= 0.5 if order == 0 else 0.0
        out = (ph @ amp).real
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def derivative(self, x, order: int = 1):
        return self(x, order=order)


def sym_eig(mat: NDArray, tol: float = 1e-10) -> tuple[NDArray, NDArray]:
    """Eigendecomposition of a symmetric matrix, ascending eigenvalues.

    The input is checked for symmetry and symmetrized before the dense
    orthogonal reduction; eigenvectors come back as columns.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(mat))))
    asym = float(np.max(np.abs(mat - mat.T)))
    if asym > tol * scale:
        raise ValueError(f"matrix not symmetric: max asymmetry {asym:.3e}")
    w, v = np.linalg.eigh(0.5 * (mat + mat.T))
    return w, v


def fd_second_derivative(fun, h: float, levels: int = 3,
                         t0: float = 0.0) -> tuple[float, float]:
    """Second derivative of fun at t0 by central differences.

    Richardson extrapolation over the step ladder h, h/2, ..., h/2^(levels-1).
    Returns (value, error_estimate); the estimate is the last extrapolation
    update and is pessimistic for smooth integrands.
    """
    if levels < 1:
        raise ValueError("need at least one level")
    f0 = fun(t0)
    d = []
    for m in range(levels):
        hm = h / 2.0 ** m
        d.append((fun(t0 + hm) - 2.0 * f0 + fun(t0 - hm)) / hm ** 2)
    # Neville in powers of h^2
    tab = list(d)
    if levels == 1:
        return d[0], np.inf
    prev_top = tab[0]
    for m in range(1, levels):
        prev_top = tab[0]
        for i in range(levels - m):
            tab[i] = tab[i + 1] + (tab[i + 1] - tab[i]) / (4.0 ** m - 1.0)
    return tab[0], abs(tab[0] - prev_top)
