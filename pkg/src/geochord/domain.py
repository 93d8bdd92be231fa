"""Implicit regions with a regularized signed boundary distance.

A ``Domain`` wraps a scalar field phi that equals minus the metric distance
to the boundary on a strip of width ``delta_star`` inside the region, is
zero exactly on the boundary, positive outside, and is smoothly saturated
deeper inside (only strip values enter any of the geometry downstream, so
the interior extension is free as long as it stays below ``-delta_star``
and remains C^2).

Supported region kinds:

* ``disk``     -- phi is the exact global signed distance, no saturation;
* ``ellipse``  -- exact signed distance on the strip via the nearest-point
  parameter equation, saturated inside (2-D and 3-D semi-axes);
* ``implicit`` -- smooth polynomial level set f < 0 (2-D, star-shaped with
  respect to the origin), nearest point by Gauss-Newton;
* ``jacobi``   -- conformal-metric distance shell around a potential well,
  built by :func:`geochord.brake.build_omega_delta`.

Gradients and Hessians of phi are exposed as 4th/2nd-order finite
differences of the field itself; every field here is a smooth function of
the query point (fixed iteration counts everywhere), which keeps those
stencils clean of amplification noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from ._num import fd_grad, fd_hess, smoothstep, snap_axes, unit_rows
from .metric import MetricField, christoffel_at, euclidean_metric, integrate_geodesic

__all__ = [
    "Domain", "DomainError", "build_domain", "concavity_margin",
    "compute_delta0", "compute_K0", "choose_delta1",
    "scan_special_geodesics_2d", "certify_domain", "default_exclusion_ball",
]


class DomainError(ValueError):
    pass


@dataclass
class Domain:
    kind: str
    dim: int
    delta_star: float
    metric: MetricField
    phi_fn: Callable[[np.ndarray], np.ndarray]
    boundary_point: Callable[[np.ndarray], np.ndarray]
    diameter: float
    params: dict = field(default_factory=dict)
    h_grad: float = 1e-5
    h_hess: float = 1e-3
    center: Optional[np.ndarray] = None

    # constants filled in by the certification pipeline
    delta0: Optional[float] = None
    delta1: Optional[float] = None
    K0: Optional[float] = None
    x0: Optional[np.ndarray] = None
    rho0: Optional[float] = None
    concave: Optional[bool] = None
    margin0: Optional[float] = None
    grad_norm_defect: Optional[float] = None

    def phi(self, X: np.ndarray) -> np.ndarray:
        return self.phi_fn(np.atleast_2d(np.asarray(X, dtype=float)))

    def grad_phi(self, X: np.ndarray) -> np.ndarray:
        return fd_grad(self.phi_fn, X, self.h_grad)

    def hess_phi(self, X: np.ndarray) -> np.ndarray:
        return fd_hess(self.phi_fn, X, self.h_hess)

    def boundary_normal(self, X: np.ndarray) -> np.ndarray:
        """Chart-unit exterior normal direction (unit multiple of grad phi)."""
        return unit_rows(self.grad_phi(X), eps=1e-300)

    def project_to_boundary(self, X: np.ndarray, iters: int = 4) -> np.ndarray:
        """Newton projection onto phi = 0 along the gradient direction.

        The gradient is refreshed every other step (chord Newton): phi is a
        near-unit-gradient distance field on the strip, so frozen directions
        cost little accuracy and halve the stencil work.
        """
        Y = np.atleast_2d(np.asarray(X, dtype=float)).copy()
        g = None
        for k in range(iters):
            p = self.phi(Y)
            if k % 2 == 0:
                g = fd_grad(self.phi_fn, Y, self.h_grad, order=2)
                g2 = np.maximum((g * g).sum(axis=1), 1e-300)
            Y -= (p / g2)[:, None] * g
        return Y

    # -- samplers ----------------------------------------------------------

    def boundary_param_grid(self, counts) -> np.ndarray:
        """Canonical boundary parameter grid: angles (2-D) or (polar, azim)."""
        if self.dim == 2:
            k = int(counts if np.isscalar(counts) else counts[0])
            return np.arange(k) * (2.0 * np.pi / k)
        polar, azim = counts
        thetas = np.linspace(0.0, np.pi, int(polar))
        out = []
        for t in thetas:
            if t <= 1e-12 or t >= np.pi - 1e-12:
                out.append((t, 0.0))  # poles once
                continue
            for j in range(int(azim)):
                out.append((t, 2.0 * np.pi * j / azim))
        return np.array(out)

    def sample_boundary(self, k: int, rng) -> np.ndarray:
        if self.dim == 2:
            return self.boundary_point(rng.uniform(0.0, 2 * np.pi, k))
        u = rng.normal(size=(k, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        th = np.arccos(np.clip(u[:, 2], -1, 1))
        ph = np.mod(np.arctan2(u[:, 1], u[:, 0]), 2 * np.pi)
        return self.boundary_point(np.column_stack([th, ph]))

    def sample_strip(self, delta: float, k: int, rng, max_tries: int = 60) -> np.ndarray:
        """Points with phi in [-delta, 0): boundary samples offset inward."""
        pts = []
        need = k
        for _ in range(max_tries):
            b = self.sample_boundary(2 * need, rng)
            n = self.boundary_normal(b)
            t = rng.uniform(0.0, delta, len(b))
            cand = b - (t / np.maximum(np.linalg.norm(self.grad_phi(b), axis=1), 1e-12))[:, None] * n
            p = self.phi(cand)
            ok = (p >= -delta) & (p < -1e-12)
            pts.append(cand[ok])
            need = k - sum(len(a) for a in pts)
            if need <= 0:
                break
        out = np.concatenate(pts) if pts else np.empty((0, self.dim))
        if len(out) < k:
            raise DomainError("could not sample %d strip points at delta=%g" % (k, delta))
        return out[:k]


# ---------------------------------------------------------------------------
# kind: disk
# ---------------------------------------------------------------------------

def _build_disk(desc):
    r = float(desc.get("radius", 1.0))
    dim = int(desc.get("dim", 2))
    if r <= 0:
        raise DomainError("disk radius must be positive")

    def phi(X):
        return np.linalg.norm(np.atleast_2d(X), axis=1) - r

    def boundary_point(params):
        return _angles_to_points(params, dim) * r

    return Domain(kind="disk", dim=dim, delta_star=float(desc.get("delta_star", r)),
                  metric=euclidean_metric(dim), phi_fn=phi,
                  boundary_point=boundary_point, diameter=2 * r,
                  params={"radius": r}, h_grad=1e-5 * r, h_hess=1e-3 * r,
                  center=np.zeros(dim))


def _angles_to_points(params, dim):
    params = np.asarray(params, dtype=float)
    if dim == 2:
        th = np.atleast_1d(params)
        return snap_axes(np.column_stack([np.cos(th), np.sin(th)]))
    params = np.atleast_2d(params)
    th, ph = params[:, 0], params[:, 1]
    return snap_axes(np.column_stack([np.sin(th) * np.cos(ph),
                                      np.sin(th) * np.sin(ph),
                                      np.cos(th)]))


# ---------------------------------------------------------------------------
# kind: ellipse / ellipsoid
# ---------------------------------------------------------------------------

def _build_ellipse(desc):
    axes = np.asarray(desc["semi_axes"], dtype=float)
    if np.any(axes <= 0):
        raise DomainError("semi-axes must be positive")
    dim = axes.size
    if dim not in (2, 3):
        raise DomainError("ellipse supports 2 or 3 semi-axes")
    axes2 = axes * axes
    reach = float((axes.min() ** 2) / axes.max())  # min curvature radius
    delta_star = float(desc.get("delta_star",
                                min(0.25 * axes.min(), 0.5 * reach)))

    def boundary_point(params):
        return _angles_to_points(params, dim) * axes

    if dim == 2:
        # foot-point Newton kernel from the scaled-angle seed; a coarse
        # polyline minimum guards the deep interior (wrong-basin seeds past
        # the curvature reach), where only coarse values are ever consumed
        th_init = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        b_init = boundary_point(th_init)
        a, bb = axes

        def phi(X):
            X = np.atleast_2d(np.asarray(X, dtype=float))
            d_newton = _kernels.ellipse_newton_dist(X, a, bb)
            d2 = ((X[:, None, :] - b_init[None, :, :]) ** 2).sum(axis=2)
            d = np.minimum(d_newton, np.sqrt(d2.min(axis=1)))
            inside = (X * X / axes2).sum(axis=1) < 1.0
            return np.where(inside, -d, d)
    else:
        pol = np.linspace(0, np.pi, 25)
        azi = np.linspace(0, 2 * np.pi, 48, endpoint=False)
        P, A = np.meshgrid(pol, azi, indexing="ij")
        prm = np.column_stack([P.ravel(), A.ravel()])
        b_init = _angles_to_points(prm, 3) * axes

        def phi(X):
            X = np.atleast_2d(np.asarray(X, dtype=float))
            d2 = ((X[:, None, :] - b_init[None, :, :]) ** 2).sum(axis=2)
            t = prm[np.argmin(d2, axis=1)].copy()
            a1, a2_, a3 = axes
            for _ in range(8):
                st, ct = np.sin(t[:, 0]), np.cos(t[:, 0])
                sp, cp = np.sin(t[:, 1]), np.cos(t[:, 1])
                bpt = np.column_stack([a1 * st * cp, a2_ * st * sp, a3 * ct])
                dt = np.column_stack([a1 * ct * cp, a2_ * ct * sp, -a3 * st])
                dp = np.column_stack([-a1 * st * sp, a2_ * st * cp, np.zeros(len(t))])
                r = X - bpt
                g1 = (r * dt).sum(axis=1)
                g2 = (r * dp).sum(axis=1)
                h11 = -(dt * dt).sum(axis=1)
                h22 = -(dp * dp).sum(axis=1)
                h12 = -(dt * dp).sum(axis=1)
                det = h11 * h22 - h12 * h12
                ok = np.abs(det) > 1e-12
                s1 = np.where(ok, (g1 * h22 - g2 * h12) / np.where(ok, det, 1.0), 0.0)
                s2 = np.where(ok, (g2 * h11 - g1 * h12) / np.where(ok, det, 1.0), 0.0)
                t = t - np.column_stack([np.clip(s1, -0.2, 0.2),
                                         np.clip(s2, -0.2, 0.2)])
            st, ct = np.sin(t[:, 0]), np.cos(t[:, 0])
            sp, cp = np.sin(t[:, 1]), np.cos(t[:, 1])
            bpt = np.column_stack([a1 * st * cp, a2_ * st * sp, a3 * ct])
            d_newton = np.linalg.norm(X - bpt, axis=1)
            d = np.minimum(d_newton, np.sqrt(d2.min(axis=1)))
            inside = (X * X / axes2).sum(axis=1) < 1.0
            return np.where(inside, -d, d)

    return Domain(kind="ellipse", dim=dim, delta_star=delta_star,
                  metric=euclidean_metric(dim), phi_fn=phi,
                  boundary_point=boundary_point, diameter=2 * axes.max(),
                  params={"semi_axes": axes.tolist()},
                  h_grad=1e-5 * axes.max(), h_hess=1e-3 * axes.max(),
                  center=np.zeros(dim))


# ---------------------------------------------------------------------------
# kind: radial graph boundary r = R(theta) (2-D, star shaped)
# ---------------------------------------------------------------------------

class _RadialProfile:
    """R(theta) = base + sum amp * cos^power(theta - theta0), even powers."""

    def __init__(self, base, bumps):
        self.base = float(base)
        self.bumps = [(float(a), int(p), float(t0)) for a, p, t0 in bumps]
        for _, p, _ in self.bumps:
            if p < 1:
                raise DomainError("bump powers must be >= 1")

    def r(self, th):
        out = np.full_like(np.asarray(th, dtype=float), self.base)
        for a, p, t0 in self.bumps:
            out = out + a * np.cos(th - t0) ** p
        return out

    def dr(self, th):
        out = np.zeros_like(np.asarray(th, dtype=float))
        for a, p, t0 in self.bumps:
            out = out - a * p * np.cos(th - t0) ** (p - 1) * np.sin(th - t0)
        return out

    def ddr(self, th):
        out = np.zeros_like(np.asarray(th, dtype=float))
        for a, p, t0 in self.bumps:
            c, s = np.cos(th - t0), np.sin(th - t0)
            if p == 1:
                out = out - a * c
            else:
                out = out + a * p * c ** (p - 2) * ((p - 1) * s * s - c * c)
        return out


def _build_radial(desc):
    prof = _RadialProfile(desc.get("base", 1.0), desc.get("bumps", []))
    th_s = np.linspace(0, 2 * np.pi, 384, endpoint=False)
    rs = prof.r(th_s)
    if rs.min() <= 1e-6:
        raise DomainError("radial profile reaches the origin; not a disk")

    def boundary_point(params):
        th = np.atleast_1d(np.asarray(params, dtype=float))
        u = snap_axes(np.column_stack([np.cos(th), np.sin(th)]))
        return prof.r(th)[:, None] * u

    b_dense = boundary_point(th_s)

    def phi(X):
        # dense-polyline seed, then Newton on the foot-point condition
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d2 = ((X[:, None, :] - b_dense[None, :, :]) ** 2).sum(axis=2)
        t = th_s[np.argmin(d2, axis=1)]
        for _ in range(8):
            r, dr, ddr = prof.r(t), prof.dr(t), prof.ddr(t)
            c, s = np.cos(t), np.sin(t)
            bx, by = r * c, r * s
            bpx, bpy = dr * c - r * s, dr * s + r * c
            bppx = ddr * c - 2 * dr * s - r * c
            bppy = ddr * s + 2 * dr * c - r * s
            dx, dy = X[:, 0] - bx, X[:, 1] - by
            h = dx * bpx + dy * bpy
            hp = dx * bppx + dy * bppy - (bpx * bpx + bpy * bpy)
            hp = np.where(np.abs(hp) > 1e-300, hp, 1.0)
            t = t - np.clip(h / hp, -0.1, 0.1)
        r = prof.r(t)
        foot = np.column_stack([r * np.cos(t), r * np.sin(t)])
        d_newton = np.linalg.norm(X - foot, axis=1)
        d = np.minimum(d_newton, np.sqrt(d2.min(axis=1)))
        rad = np.linalg.norm(X, axis=1)
        inside = rad < prof.r(np.arctan2(X[:, 1], X[:, 0]))
        return np.where(inside, -d, d)

    seg = np.linalg.norm(np.diff(np.vstack([b_dense, b_dense[:1]]), axis=0), axis=1)
    diam = 2.0 * float(rs.max())
    delta_star = float(desc.get("delta_star", 0.2 * rs.min()))
    return Domain(kind="radial", dim=2, delta_star=delta_star,
                  metric=euclidean_metric(2), phi_fn=phi,
                  boundary_point=boundary_point, diameter=diam,
                  params={"base": prof.base,
                          "bumps": [list(b) for b in prof.bumps]},
                  h_grad=1e-5 * diam, h_hess=6e-4 * diam,
                  center=np.zeros(2))


# ---------------------------------------------------------------------------
# kind: implicit polynomial level set (2-D)
# ---------------------------------------------------------------------------

class _Poly2:
    """Polynomial f(x, y) = sum c * x^p y^q with analytic derivatives."""

    def __init__(self, terms):
        self.expo = np.array([t[:2] for t in terms], dtype=float)
        self.coef = np.array([t[2] for t in terms], dtype=float)

    def __call__(self, X):
        X = np.atleast_2d(X)
        return sum(c * X[:, 0] ** p * X[:, 1] ** q
                   for (p, q), c in zip(self.expo, self.coef))

    def grad(self, X):
        X = np.atleast_2d(X)
        gx = np.zeros(len(X))
        gy = np.zeros(len(X))
        for (p, q), c in zip(self.expo, self.coef):
            if p:
                gx += c * p * X[:, 0] ** (p - 1) * X[:, 1] ** q
            if q:
                gy += c * q * X[:, 0] ** p * X[:, 1] ** (q - 1)
        return np.column_stack([gx, gy])

    def hess(self, X):
        X = np.atleast_2d(X)
        hxx = np.zeros(len(X))
        hxy = np.zeros(len(X))
        hyy = np.zeros(len(X))
        for (p, q), c in zip(self.expo, self.coef):
            if p >= 2:
                hxx += c * p * (p - 1) * X[:, 0] ** (p - 2) * X[:, 1] ** q
            if p >= 1 and q >= 1:
                hxy += c * p * q * X[:, 0] ** (p - 1) * X[:, 1] ** (q - 1)
            if q >= 2:
                hyy += c * q * (q - 1) * X[:, 0] ** p * X[:, 1] ** (q - 2)
        return hxx, hxy, hyy


def _build_implicit(desc):
    if int(desc.get("dim", 2)) != 2:
        raise DomainError("implicit domains are supported in dimension 2 only")
    f = _Poly2(desc["terms"])
    r_max = float(desc.get("r_max", 10.0))

    # boundedness and star-shape: every ray from the origin must cross f = 0
    th_scan = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    dirs = np.column_stack([np.cos(th_scan), np.sin(th_scan)])
    if float(f(np.zeros((1, 2)))[0]) >= 0:
        raise DomainError("origin must lie inside the region (f(0) < 0)")
    radii = _radial_bisect(lambda rr: f(rr[:, None] * dirs), len(dirs), r_max)
    b_scan = dirs * radii[:, None]
    gn = np.linalg.norm(f.grad(b_scan), axis=1)
    if gn.min() <= 1e-8:
        raise DomainError("grad f vanishes on the boundary: degenerate level set")

    def boundary_point(params):
        th = np.atleast_1d(np.asarray(params, dtype=float))
        u = snap_axes(np.column_stack([np.cos(th), np.sin(th)]))
        r = _radial_bisect(lambda rr: f(rr[:, None] * u), len(u), r_max)
        return u * r[:, None]

    th_dense = np.linspace(0, 2 * np.pi, 512, endpoint=False)
    b_dense = boundary_point(th_dense)

    def phi(X):
        # nearest dense-polyline vertex seeds a foot-point Gauss-Newton on
        # [f(Y) = 0, (Y - X) x grad f(Y) = 0]
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d2 = ((X[:, None, :] - b_dense[None, :, :]) ** 2).sum(axis=2)
        Y = b_dense[np.argmin(d2, axis=1)].copy()
        step_cap = 0.1 * float(radii.min())
        for _ in range(8):
            fv = f(Y)
            g = f.grad(Y)
            hxx, hxy, hyy = f.hess(Y)
            d = Y - X
            r2 = d[:, 0] * g[:, 1] - d[:, 1] * g[:, 0]
            J11, J12 = g[:, 0], g[:, 1]
            J21 = g[:, 1] + d[:, 0] * hxy - d[:, 1] * hxx
            J22 = -g[:, 0] + d[:, 0] * hyy - d[:, 1] * hxy
            det = J11 * J22 - J12 * J21
            det = np.where(np.abs(det) > 1e-300, det, 1e-300)
            sx = (fv * J22 - r2 * J12) / det
            sy = (-fv * J21 + r2 * J11) / det
            Y[:, 0] -= np.clip(sx, -step_cap, step_cap)
            Y[:, 1] -= np.clip(sy, -step_cap, step_cap)
        d_newton = np.linalg.norm(Y - X, axis=1)
        d_newton = np.where(np.abs(f(Y)) < 1e-9, d_newton, np.inf)
        dist = np.minimum(d_newton, np.sqrt(d2.min(axis=1)))
        return np.where(f(X) < 0, -dist, dist)

    reach_est = float(radii.min()) * 0.5
    delta_star = float(desc.get("delta_star", min(0.2 * radii.min(), 0.5 * reach_est)))
    diam = 2.0 * float(radii.max())
    return Domain(kind="implicit", dim=2, delta_star=delta_star,
                  metric=euclidean_metric(2), phi_fn=phi,
                  boundary_point=boundary_point, diameter=diam,
                  params={"terms": [list(t) for t in desc["terms"]]},
                  h_grad=1e-5 * diam, h_hess=6e-4 * diam,
                  center=np.zeros(2))


def _radial_bisect(fbatch, k, r_max, iters: int = 80):
    """Vectorized bisection for the boundary radius along k rays.

    fbatch maps radii (k,) to level values (k,), negative inside.
    """
    lo = np.zeros(k)
    hi = np.full(k, float(r_max))
    vhi = fbatch(hi)
    if np.any(vhi <= 0):
        raise DomainError("region not bounded within r_max=%g" % r_max)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        vm = fbatch(mid)
        inside = vm < 0.0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# build + constants
# ---------------------------------------------------------------------------

def build_domain(desc: dict) -> Domain:
    """Construct a Domain from a descriptor mapping (see the config schema)."""
    kind = desc.get("kind")
    if kind == "disk":
        return _build_disk(desc)
    if kind == "ellipse":
        return _build_ellipse(desc)
    if kind == "radial":
        return _build_radial(desc)
    if kind == "implicit":
        return _build_implicit(desc)
    if kind == "jacobi":
        from .brake import build_omega_delta
        from .metric import well_from_descriptor
        well = well_from_descriptor(desc["well"])
        return build_omega_delta(well, float(desc["delta"]),
                                 delta_star=desc.get("delta_star"),
                                 quad_steps=int(desc.get("quad_steps", 24)))
    raise DomainError("unknown domain kind: %r" % (kind,))


def _tangent_basis(n_hat: np.ndarray) -> np.ndarray:
    """Chart-orthonormal basis of the hyperplane orthogonal to n_hat."""
    N = n_hat.size
    B = []
    for i in range(N):
        e = np.zeros(N)
        e[i] = 1.0
        v = e - np.dot(e, n_hat) * n_hat
        for b in B:
            v -= np.dot(v, b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            B.append(v / nv)
        if len(B) == N - 1:
            break
    return np.array(B)


def tangential_hessian_max(dom: Domain, metric: MetricField, pts: np.ndarray) -> np.ndarray:
    """max of the metric Hessian of phi over unit metric-tangent directions,
    per point of a batch.

    Tangency g(grad_g phi, v) = 0 reduces to chart orthogonality to the chart
    gradient for any metric, so the restriction basis is metric independent;
    the quadratic form and the unit normalization are not.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    H = dom.hess_phi(pts)
    G = dom.grad_phi(pts)
    gm = metric.g(pts)
    out = np.empty(len(pts))
    for k, q in enumerate(pts):
        n_hat = G[k] / np.linalg.norm(G[k])
        Gam = christoffel_at(metric, q)
        Hr = H[k] - np.einsum("kij,k->ij", Gam, G[k])
        E = _tangent_basis(n_hat)
        M = E @ Hr @ E.T
        Gr = E @ gm[k] @ E.T
        L = np.linalg.cholesky(Gr)
        Linv = np.linalg.inv(L)
        M = Linv @ M @ Linv.T
        out[k] = float(np.linalg.eigvalsh(0.5 * (M + M.T)).max())
    return out


def concavity_margin(dom: Domain, metric: MetricField, delta: float,
                     samples: int, rng=None) -> float:
    """m = -max over strip samples of the tangential phi-Hessian; m > 0
    certifies strong concavity of the strip at sample resolution."""
    if samples < 1:
        raise DomainError("need at least one strip sample")
    if delta > dom.delta_star * (1 + 1e-12):
        raise DomainError("strip width exceeds delta_star")
    rng = rng or np.random.default_rng(0)
    pts = dom.sample_strip(delta, samples, rng)
    return -float(tangential_hessian_max(dom, metric, pts).max())


def compute_delta0(dom: Domain, metric: MetricField, ladder=None,
                   samples: int = 300, rng=None) -> Optional[float]:
    """Largest ladder rung delta <= delta_star whose strip certifies concave."""
    rng = rng or np.random.default_rng(1)
    if ladder is None:
        ladder = [dom.delta_star * 0.5 ** k for k in range(8)]
    for delta in sorted(ladder, reverse=True):
        if delta > dom.delta_star:
            continue
        m = concavity_margin(dom, metric, delta, samples, rng)
        if m > 0.0:
            dom.delta0 = float(delta)
            dom.concave = True
            dom.margin0 = float(m)
            return dom.delta0
    dom.delta0 = None
    dom.concave = False
    dom.margin0 = float(m)
    return None


def compute_K0(dom: Domain, samples: int = 2000, safety: float = 1.0,
               rng=None) -> float:
    """sup of the metric norm of grad phi over the closed region, inflated."""
    rng = rng or np.random.default_rng(2)
    pts = [dom.sample_strip(dom.delta_star, samples // 2, rng)]
    # interior rejection samples from the bounding box
    box = 0.75 * dom.diameter
    raw = rng.uniform(-box, box, size=(samples * 4, dom.dim))
    if dom.center is not None:
        raw = raw + dom.center
    inside = dom.phi(raw) <= 0.0
    pts.append(raw[inside][: samples // 2])
    X = np.concatenate(pts)
    g = dom.grad_phi(X)
    if dom.metric.kind == "euclidean":
        norms = np.linalg.norm(g, axis=1)
    elif dom.metric.kind == "conformal":
        rho = np.maximum(dom.metric.rho(X), 1e-300)
        norms = np.linalg.norm(g, axis=1) / np.sqrt(rho)
    else:
        ginv_g = np.linalg.solve(dom.metric.g(X), g)
        norms = np.sqrt(np.einsum("ki,ki->k", g, ginv_g))
    K0 = float(norms.max()) * float(safety)
    dom.K0 = K0
    # report the strip eikonal defect alongside
    strip = dom.sample_strip(dom.delta_star, 200, rng)
    gs = dom.grad_phi(strip)
    if dom.metric.kind == "conformal":
        sn = np.linalg.norm(gs, axis=1) / np.sqrt(np.maximum(dom.metric.rho(strip), 1e-300))
    else:
        sn = np.linalg.norm(gs, axis=1)
    dom.grad_norm_defect = float(np.abs(sn - 1.0).max())
    return K0


def choose_delta1(dom: Domain, x0, rho0: float, ladder=None,
                  samples: int = 400, rng=None) -> float:
    """Largest ladder value below delta0 whose strip misses the chart ball
    B(x0, rho0); the ball is the exclusion region for the trap diagnostics."""
    if dom.K0 is None:
        compute_K0(dom)
    x0 = np.asarray(x0, dtype=float)
    if float(dom.phi(x0[None])[0]) + rho0 * dom.K0 >= 0.0:
        raise DomainError("exclusion ball not strictly interior")
    rng = rng or np.random.default_rng(3)
    top = dom.delta0 if dom.delta0 is not None else dom.delta_star
    if ladder is None:
        ladder = [top * 0.5 ** k for k in range(1, 9)]
    sphere = rng.normal(size=(samples, dom.dim))
    sphere /= np.linalg.norm(sphere, axis=1, keepdims=True)
    depth = float((-dom.phi(x0 + rho0 * sphere)).min())
    chosen = None
    for d1 in sorted(ladder, reverse=True):
        if d1 < top and depth > d1:
            chosen = d1
            break
    if chosen is None:
        raise DomainError("no ladder rung separates the strip from the ball")
    # re-verify on a finer sphere grid
    fine = rng.normal(size=(4 * samples, dom.dim))
    fine /= np.linalg.norm(fine, axis=1, keepdims=True)
    if float((-dom.phi(x0 + rho0 * fine)).min()) <= chosen:
        raise DomainError("ball separation failed on fine re-verification")
    dom.x0 = x0
    dom.rho0 = float(rho0)
    dom.delta1 = float(chosen)
    return dom.delta1


def default_exclusion_ball(dom: Domain):
    """Center of the region and a conservative chart radius."""
    x0 = dom.center if dom.center is not None else np.zeros(dom.dim)
    gap = -float(dom.phi(x0[None])[0]) / max(dom.K0 or 1.0, 1.0)
    return x0, 0.25 * gap


def certify_domain(dom: Domain, metric: Optional[MetricField] = None,
                   samples: int = 300, safety: float = 1.05,
                   x0=None, rho0=None, rng=None) -> dict:
    """Run the constants pipeline: delta0, K0, (x0, rho0), delta1."""
    metric = metric or dom.metric
    rng = rng or np.random.default_rng(7)
    compute_delta0(dom, metric, samples=samples, rng=rng)
    compute_K0(dom, samples=max(1000, samples), safety=safety, rng=rng)
    if x0 is None or rho0 is None:
        bx0, brho0 = default_exclusion_ball(dom)
        x0 = bx0 if x0 is None else np.asarray(x0, float)
        rho0 = brho0 if rho0 is None else float(rho0)
    choose_delta1(dom, x0, rho0, rng=rng)
    return {
        "kind": dom.kind, "dim": dom.dim,
        "delta_star": dom.delta_star, "delta0": dom.delta0,
        "delta1": dom.delta1, "K0": dom.K0,
        "concave": bool(dom.concave), "concavity_margin": dom.margin0,
        "grad_norm_defect": dom.grad_norm_defect,
        "x0": np.asarray(dom.x0).tolist(), "rho0": dom.rho0,
    }


# ---------------------------------------------------------------------------
# special-geodesic scan (2-D diagnostic for the exclusion-ball assumption)
# ---------------------------------------------------------------------------

def scan_special_geodesics_2d(dom: Domain, metric: MetricField, L: float,
                              grid: int, angle_tol: float = 1e-2):
    """Shoot tangential/orthogonal geodesics from boundary grid points and
    record chords that end tangent-tangent or tangent-orthogonal; report
    whether any recorded chord meets the exclusion ball.  Grid-resolution
    diagnostic only."""
    if dom.dim != 2:
        raise DomainError("special-geodesic scan supports dimension 2 only")
    found = []
    if L <= 0.0 or grid <= 0:
        return found, "avoids"
    thetas = np.arange(grid) * (2 * np.pi / grid)
    x0 = dom.x0 if dom.x0 is not None else np.zeros(2)
    rho0 = dom.rho0 if dom.rho0 is not None else 0.0
    nudge = 1e-7 * dom.diameter
    for th in thetas:
        b = dom.boundary_point(np.array([th]))[0]
        n_hat = dom.boundary_normal(b[None])[0]
        t_hat = np.array([-n_hat[1], n_hat[0]])
        start = b - nudge * n_hat
        for launch, v in (("tangent", t_hat), ("tangent", -t_hat),
                          ("orthogonal", -n_hat)):
            sp = float(metric.norm(start[None], v[None])[0])
            if sp <= 0:
                continue
            try:
                traj = integrate_geodesic(metric, start, v / sp, dom=dom,
                                          length_budget=1.2 * L,
                                          rtol=1e-10, atol=1e-11)
            except Exception:
                continue
            if traj.status != "boundary":
                continue
            length = traj.g_length(metric)
            F = length * length
            if F <= 1e-6 * L * L or F > L * L:
                continue
            ge = dom.grad_phi(traj.x_end[None])[0]
            n_end = ge / np.linalg.norm(ge)
            v_end = traj.v_end / np.linalg.norm(traj.v_end)
            cosn = abs(float(np.dot(v_end, n_end)))
            arrival = "tangent" if cosn < np.sin(angle_tol) else (
                "orthogonal" if cosn > np.cos(angle_tol) else "oblique")
            kind = None
            if launch == "tangent" and arrival == "tangent":
                kind = "tangent-tangent"
            elif {launch, arrival} == {"tangent", "orthogonal"}:
                kind = "tangent-orthogonal"
            if kind is None:
                continue
            min_ball = float(np.linalg.norm(traj.x - x0, axis=1).min())
            found.append({"theta": float(th), "kind": kind, "energy": F,
                          "min_dist_to_x0": min_ball,
                          "meets_ball": bool(min_ball <= rho0),
                          "nodes": traj.x})
    verdict = "intersects" if any(c["meets_ball"] for c in found) else "avoids"
    return found, verdict
