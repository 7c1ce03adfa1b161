"""Input coercion helpers shared by the estimator and the CLI."""

import numbers

import numpy as np

from .errors import InputError
from .flow import PrescribedDensity
from .support_geometry import SupportFunction, circle_grid


def as_density(f, m):
    """Coerce a scalar, callable, or sample array to a PrescribedDensity."""
    if isinstance(f, PrescribedDensity):
        if f.m != m:
            raise InputError(f"density has {f.m} samples, expected {m}")
        return f
    if isinstance(f, numbers.Real):
        return PrescribedDensity.uniform(float(f), m)
    if callable(f):
        return PrescribedDensity.from_function(f, m)
    arr = np.asarray(f, dtype=float)
    if arr.ndim != 1 or arr.size != m:
        raise InputError(f"density array must have shape ({m},), got {arr.shape}")
    return PrescribedDensity(arr)


def as_support(h, m):
    """Coerce a scalar radius, callable, or sample array to a SupportFunction."""
    if h is None:
        return SupportFunction.disk(1.0, m)
    if isinstance(h, SupportFunction):
        if h.m != m:
            raise InputError(f"support function has {h.m} samples, expected {m}")
        return h
    if isinstance(h, numbers.Real):
        return SupportFunction.disk(float(h), m)
    if callable(h):
        return SupportFunction.from_function(h, m)
    arr = np.asarray(h, dtype=float)
    if arr.ndim != 1 or arr.size != m:
        raise InputError(f"support array must have shape ({m},), got {arr.shape}")
    return SupportFunction(arr)


def check_angles(theta):
    """Validate query angles for trig interpolation."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise InputError("angles must be finite")
    return theta


def trig_interpolate(samples, theta):
    """Evaluate the trigonometric interpolant of grid samples at theta."""
    samples = np.asarray(samples, dtype=float)
    m = samples.size
    coef = np.fft.rfft(samples) / m
    theta = check_angles(theta)
    out = np.full(theta.shape, coef[0].real)
    for k in range(1, m // 2):
        out += 2.0 * (
            coef[k].real * np.cos(k * theta) - coef[k].imag * np.sin(k * theta)
        )
    out += coef[m // 2].real * np.cos((m // 2) * theta)
    return out


def grid_of(samples):
    return circle_grid(np.asarray(samples).size)
