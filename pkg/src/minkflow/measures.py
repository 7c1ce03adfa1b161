"""Boundary measure, total mass, and solvability conditions.

The density of the flow's boundary measure with respect to dtheta is
g^(p-1) * b.  The solvability checks mirror the structure of the
prescribed-measure problem: no great-circle concentration, zero
centroid, and an atom condition that holds vacuously for densities.
"""

import numpy as np
from dataclasses import dataclass

from .errors import InputError
from .support_geometry import circle_grid, periodic_integral

N_DIRECTIONS = 64
CENTROID_TOL_FACTOR = 1e-10


@dataclass(frozen=True)
class MeasureDensity:
    """Density samples of the boundary measure on the angular grid."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise InputError("measure density must be a 1-d array")
        if np.any(samples < 0.0) or not np.all(np.isfinite(samples)):
            raise InputError("measure density must be finite and nonnegative")
        object.__setattr__(self, "samples", samples)

    @property
    def m(self):
        return self.samples.size


def measure_density(grad, b, p):
    """dmu/dtheta = g^(p-1) * b on the grid."""
    grad = np.asarray(grad, dtype=float)
    b = np.asarray(b, dtype=float)
    return MeasureDensity(grad ** (p - 1.0) * b)


def mass_functional(h_samples, density):
    """integral of h dmu; equals Gamma when dmu comes from the same body."""
    return float(periodic_integral(np.asarray(h_samples, dtype=float) * density.samples))


def _abs_cos_moments(samples):
    """integral |cos(theta - phi)| f dtheta for phi over the test directions.

    Uses the Fourier series of |cos|, so the pairing with the trig
    interpolant of f is exact; a plain trapezoid rule would see the
    kinks of |cos| and lose four digits.
    """
    samples = np.asarray(samples, dtype=float)
    m = samples.size
    coef = np.fft.rfft(samples) * (2.0 * np.pi / m)  # integral f e^{-i k theta}
    phi = 2.0 * np.pi * np.arange(N_DIRECTIONS) / N_DIRECTIONS
    total = np.full(N_DIRECTIONS, (2.0 / np.pi) * coef[0].real)
    jmax = (m // 2) // 2
    for j in range(1, jmax + 1):
        a_j = (4.0 / np.pi) * (-1.0) ** (j + 1) / (4.0 * j * j - 1.0)
        k = 2 * j
        # integral f cos(k (theta - phi)) dtheta = Re[e^{i k phi} c_k]
        total += a_j * (
            np.cos(k * phi) * coef[k].real - np.sin(k * phi) * coef[k].imag
        )
    return total


@dataclass(frozen=True)
class AdmissibilityCondition:
    name: str
    passed: bool
    value: float
    note: str


@dataclass(frozen=True)
class AdmissibilityReport:
    conditions: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    def __iter__(self):
        return iter(self.conditions)


def check_admissibility(f):
    """Solvability conditions for a prescribed density.

    (i)  min over test directions of integral |<zeta, xi>| dmu > 0;
    (ii) centroid integral xi dmu = 0 within 1e-10 * total mass;
    (iii) no atom exceeds half the mass on any closed half-circle,
          vacuous for absolutely continuous densities.
    """
    samples = np.asarray(f.samples if hasattr(f, "samples") else f, dtype=float)
    if np.any(samples <= 0.0):
        raise InputError("admissibility check expects a positive density")
    mass = float(periodic_integral(samples))
    moments = _abs_cos_moments(samples)
    min_moment = float(np.min(moments))
    cond1 = AdmissibilityCondition(
        name="positive_projection",
        passed=min_moment > 0.0,
        value=min_moment,
        note=f"min over {N_DIRECTIONS} directions of integral |cos(theta-phi)| f",
    )
    theta = circle_grid(samples.size)
    cx = float(periodic_integral(samples * np.cos(theta)))
    cy = float(periodic_integral(samples * np.sin(theta)))
    cnorm = float(np.hypot(cx, cy))
    tol = CENTROID_TOL_FACTOR * mass
    cond2 = AdmissibilityCondition(
        name="zero_centroid",
        passed=cnorm <= tol,
        value=cnorm,
        note=f"|integral xi f dtheta|, tolerance {tol:.3e}",
    )
    cond3 = AdmissibilityCondition(
        name="no_dominant_atom",
        passed=True,
        value=0.0,
        note="vacuous for grid densities: every atom has zero mass",
    )
    return AdmissibilityReport(conditions=(cond1, cond2, cond3))
