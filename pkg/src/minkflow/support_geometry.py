"""Support function geometry of planar origin-symmetric convex bodies.

A body is represented by samples of its support function h on the
uniform angular grid theta_k = 2*pi*k/M with M even.  All derivatives
are trigonometric (FFT) and therefore exact for band-limited data.
"""

import numpy as np
from dataclasses import dataclass
from scipy.interpolate import CubicSpline

from .errors import ConvexityError, InputError

CONVEXITY_FLOOR = 1e-8  # relative to max h


def circle_grid(m):
    """Angles theta_k = 2*pi*k/m, k = 0..m-1."""
    return 2.0 * np.pi * np.arange(m) / m


def periodic_integral(samples):
    """Trapezoid rule on the uniform periodic grid (spectrally accurate)."""
    samples = np.asarray(samples, dtype=float)
    return 2.0 * np.pi * samples.mean(axis=-1)


def _check_samples(samples):
    samples = np.ascontiguousarray(samples, dtype=float)
    if samples.ndim != 1:
        raise InputError("support samples must be a 1-d array")
    m = samples.size
    if m < 8 or m % 2 != 0:
        raise InputError(f"grid size must be even and >= 8, got {m}")
    if not np.all(np.isfinite(samples)):
        raise InputError("support samples must be finite")
    if np.any(samples <= 0.0):
        k = int(np.argmin(samples))
        raise InputError(f"support samples must be positive, h[{k}] = {samples[k]}")
    return samples


@dataclass(frozen=True)
class SupportFunction:
    """Support function samples on the uniform angular grid."""

    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", _check_samples(self.samples))

    @property
    def m(self):
        return self.samples.size

    @property
    def theta(self):
        return circle_grid(self.m)

    @classmethod
    def disk(cls, radius=1.0, m=256):
        return cls(np.full(m, float(radius)))

    @classmethod
    def from_function(cls, func, m=256):
        return cls(np.asarray(func(circle_grid(m)), dtype=float))

    def is_even(self, tol=0.0):
        half = self.m // 2
        return bool(np.max(np.abs(self.samples - np.roll(self.samples, half))) <= tol)


@dataclass(frozen=True)
class CurvatureData:
    """Curvature radius b = h'' + h and Gauss curvature 1/b per grid angle."""

    b: np.ndarray
    kappa: np.ndarray


@dataclass(frozen=True)
class BoundaryCurve:
    """Boundary points with outward unit normals and unit tangents."""

    points: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray


def spectral_derivative(samples, order=1):
    """Trigonometric derivative of periodic samples.

    Odd orders zero the Nyquist mode; even orders keep it.  Exact for
    functions band-limited below m/2.
    """
    samples = np.asarray(samples, dtype=float)
    m = samples.size
    coef = np.fft.rfft(samples)
    k = np.arange(m // 2 + 1)
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult = mult.copy()
        mult[-1] = 0.0
    return np.fft.irfft(coef * mult, m)


def derivatives(h):
    """First and second trigonometric derivatives of the support samples."""
    d1 = spectral_derivative(h.samples, 1)
    d2 = spectral_derivative(h.samples, 2)
    return d1, d2


def curvature(h):
    """Curvature radius and Gauss curvature; raises when convexity is lost."""
    _, d2 = derivatives(h)
    b = d2 + h.samples
    floor = CONVEXITY_FLOOR * float(np.max(h.samples))
    if np.any(b <= floor):
        k = int(np.argmin(b))
        raise ConvexityError(
            f"convexity lost: curvature radius {b[k]:.3e} at grid index {k}"
            f" is below the floor {floor:.3e}",
            index=k,
            value=float(b[k]),
        )
    return CurvatureData(b=b, kappa=1.0 / b)


def boundary_curve(h):
    """Boundary parametrized by normal angle.

    X(theta) = h * (cos, sin) + h' * (-sin, cos); the outward normal at
    X(theta_k) is exactly (cos theta_k, sin theta_k).
    """
    theta = h.theta
    d1, _ = derivatives(h)
    c, s = np.cos(theta), np.sin(theta)
    normals = np.column_stack([c, s])
    tangents = np.column_stack([-s, c])
    points = h.samples[:, None] * normals + d1[:, None] * tangents
    return BoundaryCurve(points=points, normals=normals, tangents=tangents)


def area(h):
    """Enclosed area, (1/2) * integral of h * (h'' + h)."""
    return 0.5 * periodic_integral(h.samples * curvature(h).b)


def radial_function(h):
    """Radial function sampled at the grid angles.

    The boundary point with normal angle theta sits at polar angle
    alpha(theta) = theta + atan2(h', h), strictly increasing for convex
    bodies.  Radii are interpolated back to the grid with a periodic
    cubic spline in alpha.
    """
    curvature(h)  # convexity precondition
    d1, _ = derivatives(h)
    rho = np.hypot(h.samples, d1)
    alpha = h.theta + np.arctan2(d1, h.samples)
    # unwrap so alpha is one strictly increasing revolution
    alpha = np.unwrap(alpha)
    if np.any(np.diff(alpha) <= 0.0):
        raise InputError("radial angle map is not monotone; body too degenerate")
    base = alpha[0]
    knots = np.concatenate([alpha, [alpha[0] + 2.0 * np.pi]])
    values = np.concatenate([rho, [rho[0]]])
    spline = CubicSpline(knots, values, bc_type="periodic")
    query = base + (h.theta - base) % (2.0 * np.pi)
    return spline(query)


def symmetrize(h):
    """Project onto origin-symmetric bodies by averaging antipodal samples."""
    half = h.m // 2
    sym = 0.5 * (h.samples + np.roll(h.samples, half))
    return SupportFunction(sym)
