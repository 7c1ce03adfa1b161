"""Regularized p-Laplace solves on a collar mesh inside the body boundary.

The collar is the band between the boundary curve and its inward normal
offset at distance d.  Dirichlet data: u = 0 on the boundary, u = 1 on
the inner ring.  The weak form uses the regularized flux
(|grad u|^2 + eps^2)^((p-2)/2) grad u on piecewise-linear triangles.
"""

import numpy as np
from dataclasses import dataclass
from functools import lru_cache

import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from .errors import (
    CollarError,
    DegenerateGradientError,
    InputError,
    MeshError,
    SolverError,
)

EPS_REG_FACTOR = 1e-8  # times the gradient scale 1/d
MAX_PRINCIPLE_TOL = 1e-10


@dataclass(frozen=True)
class CollarMesh:
    """Structured collar triangulation, ring-major node order.

    Node (j, k) sits at index j * n_theta + k; ring j = 0 is the body
    boundary, ring j = n_r - 1 is the inner offset curve.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    n_theta: int
    n_r: int
    thickness: float

    @property
    def outer_ring(self):
        return np.arange(self.n_theta)

    @property
    def inner_ring(self):
        return np.arange((self.n_r - 1) * self.n_theta, self.n_r * self.n_theta)

    @property
    def radial_spacing(self):
        return self.thickness / (self.n_r - 1)


@dataclass(frozen=True)
class PHarmonicSolution:
    u: np.ndarray
    p: float
    eps_reg: float
    residual_norm: float
    boundary_gradient: np.ndarray
    iterations: int


@lru_cache(maxsize=64)
def _collar_topology(n_theta, n_r):
    """Triangle connectivity and scatter indices for the csr assembly."""
    k = np.arange(n_theta)
    kp = (k + 1) % n_theta
    tris = []
    for j in range(n_r - 1):
        a = j * n_theta + k
        b = j * n_theta + kp
        c = (j + 1) * n_theta + kp
        d = (j + 1) * n_theta + k
        tris.append(np.column_stack([a, b, c]))
        tris.append(np.column_stack([a, c, d]))
    tri = np.ascontiguousarray(np.concatenate(tris))
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return tri, rows, cols


def build_collar(curve, b, delta, n_r, thickness=None):
    """Collar mesh between the boundary and its inward offset.

    Parameters
    ----------
    curve : BoundaryCurve
        Boundary points and outward normals on the angular grid.
    b : array
        Curvature radius samples; the offset embeds only for d < min b.
    delta : float
        Thickness fraction, d = delta * min b.
    n_r : int
        Number of rings including both Dirichlet rings.
    thickness : float, optional
        Explicit d overriding the delta rule (the flow pins d at its
        initial value so the collar convention is fixed along a run).
    """
    points = np.asarray(curve.points, dtype=float)
    normals = np.asarray(curve.normals, dtype=float)
    n_theta = points.shape[0]
    if n_r < 4:
        raise InputError(f"n_r must be >= 4, got {n_r}")
    bmin = float(np.min(b))
    d = float(thickness) if thickness is not None else float(delta) * bmin
    if d <= 0.0:
        raise CollarError(f"collar thickness must be positive, got {d}")
    if d >= bmin:
        raise CollarError(
            f"collar thickness {d:.6g} reaches the offset cut locus"
            f" (min curvature radius {bmin:.6g}); reduce delta"
        )
    s = np.linspace(0.0, 1.0, n_r)
    nodes = points[None, :, :] - (s[:, None, None] * d) * normals[None, :, :]
    nodes = np.ascontiguousarray(nodes.reshape(-1, 2))
    tri, _, _ = _collar_topology(n_theta, n_r)
    x = nodes[tri]
    det = (x[:, 1, 0] - x[:, 0, 0]) * (x[:, 2, 1] - x[:, 0, 1]) - (
        x[:, 1, 1] - x[:, 0, 1]
    ) * (x[:, 2, 0] - x[:, 0, 0])
    if np.any(det <= 0.0):
        t = int(np.argmin(det))
        raise MeshError(
            f"degenerate collar cell: triangle {t} has signed area {0.5 * det[t]:.3e}"
        )
    return CollarMesh(
        nodes=nodes, triangles=tri, n_theta=n_theta, n_r=n_r, thickness=d
    )


class _Assembler:
    """Per-mesh geometry used by every Newton iteration."""

    def __init__(self, mesh):
        tri, rows, cols = _collar_topology(mesh.n_theta, mesh.n_r)
        self.tri = tri
        self.rows = rows
        self.cols = cols
        self.n = mesh.nodes.shape[0]
        x = mesh.nodes[tri]
        det = (x[:, 1, 0] - x[:, 0, 0]) * (x[:, 2, 1] - x[:, 0, 1]) - (
            x[:, 1, 1] - x[:, 0, 1]
        ) * (x[:, 2, 0] - x[:, 0, 0])
        self.area = 0.5 * det
        grads = np.empty((tri.shape[0], 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            grads[:, i, 0] = (x[:, j, 1] - x[:, k, 1]) / det
            grads[:, i, 1] = (x[:, k, 0] - x[:, j, 0]) / det
        self.grads = grads
        self.free = slice(mesh.n_theta, (mesh.n_r - 1) * mesh.n_theta)

    def weights(self, u, p, eps2):
        gu = np.einsum("ti,tid->td", u[self.tri], self.grads)
        q2 = gu[:, 0] ** 2 + gu[:, 1] ** 2 + eps2
        w = q2 ** (0.5 * (p - 2.0))
        return gu, q2, w

    def residual(self, u, p, eps2):
        gu, _, w = self.weights(u, p, eps2)
        gdot = np.einsum("tid,td->ti", self.grads, gu)
        contrib = (self.area * w)[:, None] * gdot
        r = np.bincount(self.tri.ravel(), weights=contrib.ravel(), minlength=self.n)
        return r

    def residual_norm(self, u, p, eps2):
        r = self.residual(u, p, eps2)
        return float(np.linalg.norm(r[self.free]))

    def tangent(self, u, p, eps2, picard=False):
        """Residual and (Newton or Picard) matrix at u."""
        gu, q2, w = self.weights(u, p, eps2)
        gdot = np.einsum("tid,td->ti", self.grads, gu)
        contrib = (self.area * w)[:, None] * gdot
        r = np.bincount(self.tri.ravel(), weights=contrib.ravel(), minlength=self.n)
        gg = np.einsum("tid,tjd->tij", self.grads, self.grads)
        data = (self.area * w)[:, None, None] * gg
        if not picard and p != 2.0:
            w2 = (p - 2.0) * q2 ** (0.5 * (p - 4.0))
            data = data + (self.area * w2)[:, None, None] * np.einsum(
                "ti,tj->tij", gdot, gdot
            )
        mat = sp.coo_matrix(
            (data.ravel(), (self.rows, self.cols)), shape=(self.n, self.n)
        ).tocsr()
        return r, mat


def _ramp_guess(mesh):
    s = np.linspace(0.0, 1.0, mesh.n_r)
    return np.repeat(s, mesh.n_theta)


def solve_p_laplace(mesh, p, tol=1e-10, initial_guess=None, max_iter=60):
    """Damped Newton solve of the regularized p-Laplace collar problem.

    The convergence measure is the free-node residual norm relative to
    the residual of the linear radial ramp.  Falls back to Picard
    iterations after 3 failed Newton line searches.  For p = 2 the
    first Newton step is the exact linear solve.
    """
    p = float(p)
    if not p > 1.0:
        raise InputError(f"p must exceed 1, got {p}")
    asm = _Assembler(mesh)
    eps = EPS_REG_FACTOR / mesh.thickness
    eps2 = eps * eps
    free = asm.free

    u = _ramp_guess(mesh) if initial_guess is None else np.array(
        initial_guess, dtype=float
    )
    if u.shape != (asm.n,):
        raise InputError("initial guess has wrong shape for the mesh")
    u[mesh.outer_ring] = 0.0
    u[mesh.inner_ring] = 1.0

    ref = asm.residual_norm(_ramp_guess(mesh), p, eps2)
    ref = max(ref, np.finfo(float).tiny)

    rel = asm.residual_norm(u, p, eps2) / ref
    iterations = 0
    newton_failures = 0
    use_picard = False
    while rel > tol:
        if iterations >= max_iter:
            raise SolverError(
                f"p-Laplace solve stalled at relative residual {rel:.3e}"
                f" after {max_iter} iterations",
                residual=rel,
            )
        r, mat = asm.tangent(u, p, eps2, picard=use_picard)
        a_ff = mat[free, :][:, free]
        rhs = -r[free]
        delta = spla.spsolve(a_ff.tocsc(), rhs)
        alpha = 1.0
        improved = False
        for _ in range(9):  # unit step plus 8 halvings
            trial = u.copy()
            trial[free] += alpha * delta
            rel_trial = asm.residual_norm(trial, p, eps2) / ref
            if rel_trial < rel:
                u, rel = trial, rel_trial
                improved = True
                break
            alpha *= 0.5
        iterations += 1
        if not improved:
            newton_failures += 1
            if use_picard or newton_failures > 3 + 3:
                raise SolverError(
                    f"line search stalled at relative residual {rel:.3e}",
                    residual=rel,
                )
            if newton_failures >= 3:
                use_picard = True

    if np.min(u) < -MAX_PRINCIPLE_TOL or np.max(u) > 1.0 + MAX_PRINCIPLE_TOL:
        raise SolverError(
            f"discrete maximum principle violated: u in"
            f" [{np.min(u):.3e}, {1.0 - np.max(u):.3e} + 1]",
            residual=rel,
        )

    grad = boundary_gradient(u, mesh)
    return PHarmonicSolution(
        u=u,
        p=p,
        eps_reg=eps,
        residual_norm=rel,
        boundary_gradient=grad,
        iterations=iterations,
    )


def boundary_gradient(u, mesh):
    """|grad u| on the outer ring by a second-order one-sided difference.

    The radial mesh line at theta_k follows the inward normal, and u
    vanishes on the boundary, so the one-sided derivative along the
    line equals |grad u| there.
    """
    ug = np.asarray(u, dtype=float).reshape(mesh.n_r, mesh.n_theta)
    dr = mesh.radial_spacing
    g = (-3.0 * ug[0] + 4.0 * ug[1] - ug[2]) / (2.0 * dr)
    if np.any(g <= 0.0):
        k = int(np.argmin(g))
        raise DegenerateGradientError(
            f"boundary gradient {g[k]:.3e} at grid index {k} is not positive",
            index=k,
            value=float(g[k]),
        )
    return g


@dataclass(frozen=True)
class GradientBoundReport:
    """Range of |grad u| * dist / u over interior collar nodes."""

    min_ratio: float
    max_ratio: float
    ratios: np.ndarray


def gradient_bound_check(solution, mesh):
    """Two-sided gradient bound diagnostic.

    Reports the observed range of |grad u(x)| * d(x) / u(x) on interior
    rings, where d(x) is the distance to the body boundary (exact along
    normal offsets).  No constants are asserted; the range is data.
    """
    ug = solution.u.reshape(mesh.n_r, mesh.n_theta)
    nodes = mesh.nodes.reshape(mesh.n_r, mesh.n_theta, 2)
    dr = mesh.radial_spacing
    inner = slice(1, mesh.n_r - 1)
    radial = (ug[2:, :] - ug[:-2, :]) / (2.0 * dr)
    chord = np.linalg.norm(
        np.roll(nodes[inner], -1, axis=1) - np.roll(nodes[inner], 1, axis=1), axis=2
    )
    tangential = (np.roll(ug[inner], -1, axis=1) - np.roll(ug[inner], 1, axis=1)) / chord
    grad = np.hypot(radial, tangential)
    dist = (dr * np.arange(1, mesh.n_r - 1))[:, None]
    ratios = grad * dist / ug[inner]
    return GradientBoundReport(
        min_ratio=float(ratios.min()), max_ratio=float(ratios.max()), ratios=ratios
    )


@dataclass(frozen=True)
class RadialOracle:
    """Closed-form annulus profile with u = 0 at R and u = 1 at r0."""

    n: int
    p: float
    outer_radius: float
    inner_radius: float
    grad_at_outer: float

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        n, p, big_r, small_r = self.n, self.p, self.outer_radius, self.inner_radius
        if abs(p - n) < 1e-12:
            return np.log(big_r / r) / np.log(big_r / small_r)
        a = (p - n) / (p - 1.0)
        return (r**a - big_r**a) / (small_r**a - big_r**a)


def radial_oracle(n, p, outer_radius, inner_radius):
    """Exact rotationally symmetric p-harmonic profile in an annulus."""
    n = int(n)
    p = float(p)
    big_r = float(outer_radius)
    small_r = float(inner_radius)
    if n < 2:
        raise InputError(f"dimension must be >= 2, got {n}")
    if not p > 1.0:
        raise InputError(f"p must exceed 1, got {p}")
    if not 0.0 < small_r < big_r:
        raise InputError(
            f"need 0 < inner < outer radius, got {small_r}, {big_r}"
        )
    if abs(p - n) < 1e-12:
        grad = 1.0 / (big_r * np.log(big_r / small_r))
    else:
        a = (p - n) / (p - 1.0)
        grad = abs(a) * big_r ** (a - 1.0) / abs(small_r**a - big_r**a)
    return RadialOracle(
        n=n,
        p=p,
        outer_radius=big_r,
        inner_radius=small_r,
        grad_at_outer=float(grad),
    )


def solve_radial_profile(n, p, outer_radius, inner_radius, n_points=129):
    """1-d finite element solve of the radial p-Laplace two-point problem.

    Minimizes the weighted energy with density r^(n-1), u(inner) = 1,
    u(outer) = 0.  Used by the oracle command for n != 2 and as an
    independent cross-check of the closed form.
    """
    n = int(n)
    p = float(p)
    if n_points < 5:
        raise InputError("need at least 5 radial points")
    r = np.linspace(float(inner_radius), float(outer_radius), n_points)
    href = np.diff(r)
    rmid = 0.5 * (r[:-1] + r[1:])
    weight = rmid ** (n - 1)
    eps2 = (EPS_REG_FACTOR / (outer_radius - inner_radius)) ** 2

    u = np.linspace(1.0, 0.0, n_points)

    def assemble(uvec):
        slope = np.diff(uvec) / href
        q2 = slope**2 + eps2
        w = q2 ** (0.5 * (p - 2.0))
        flux = weight * w * slope  # hat test function: the h_e factors cancel
        res = np.zeros(n_points)
        res[:-1] -= flux
        res[1:] += flux
        dw = weight * (w + (p - 2.0) * q2 ** (0.5 * (p - 4.0)) * slope**2) / href
        return res, dw

    norm0 = None
    for _ in range(80):
        res, dw = assemble(u)
        interior = res[1:-1]
        norm = np.linalg.norm(interior)
        if norm0 is None:
            norm0 = max(norm, np.finfo(float).tiny)
        # rounding floor: residual entries are differences of O(max dw) terms
        if norm <= 1e-11 * norm0 + 1e3 * np.finfo(float).eps * np.max(dw):
            break
        main = dw[:-1] + dw[1:]
        band = np.zeros((3, n_points - 2))
        band[0, 1:] = -dw[1:-1]
        band[1, :] = main
        band[2, :-1] = -dw[1:-1]
        delta = solve_banded((1, 1), band, -interior)
        u[1:-1] += delta
    else:
        raise SolverError("radial profile solve did not converge", residual=norm)

    grad_outer = -(3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * href[-1])
    return r, u, float(grad_outer)
