"""Metric tensor fields on a Euclidean chart and potential wells.

Supported metric kinds:

* ``euclidean``  -- the flat chart metric;
* ``conformal``  -- g = rho(x) * I with a user-supplied positive factor,
  the form taken by the fixed-energy (Jacobi) metric rho = E - V;
* ``general``    -- arbitrary symmetric positive tensor given as a callable,
  differentiated numerically for Christoffel symbols.

All field evaluators are batched: points are arrays of shape (k, N).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ._num import fd_grad, fd_hess

__all__ = [
    "PotentialWell", "MetricField", "oscillator_well", "polynomial_well",
    "euclidean_metric", "conformal_metric", "jacobi_metric_from_well",
    "general_metric", "christoffel_at", "integrate_geodesic",
    "GeodesicTrajectory",
]


class MetricError(ValueError):
    """Raised on metric evaluation outside its positivity region."""


# ---------------------------------------------------------------------------
# potential wells
# ---------------------------------------------------------------------------

@dataclass
class PotentialWell:
    """Scalar potential with gradient/Hessian evaluators and an energy level.

    ``lam`` is set for the separable quadratic well V = sum(lam_i^2 x_i^2),
    which unlocks the fast distance kernel; general wells fall back to the
    generic quadrature path.
    """

    V: Callable[[np.ndarray], np.ndarray]
    grad_V: Callable[[np.ndarray], np.ndarray]
    hess_V: Callable[[np.ndarray], np.ndarray]
    E: float
    dim: int
    lam: Optional[np.ndarray] = None
    name: str = "well"

    def boundary_radius(self, direction: np.ndarray, r_max: float = 1e3) -> float:
        """Radius r with V(r * direction) = E along a unit chart direction."""
        u = np.asarray(direction, dtype=float)
        u = u / np.linalg.norm(u)

        def f(r):
            return float(self.V((r * u)[None, :])[0]) - self.E

        if f(r_max) <= 0.0:
            raise MetricError("potential sublevel appears unbounded along "
                              f"direction {u}")
        r_hi = r_max
        # shrink the bracket for conditioning
        while r_hi > 1e-8 and f(0.5 * r_hi) > 0.0:
            r_hi *= 0.5
        return brentq(f, 0.0, r_hi, xtol=1e-14)

    def validate(self, samples: int = 64, seed: int = 0) -> None:
        """Check E is a regular value and the sublevel {V <= E} is bounded."""
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(samples, self.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = np.array([self.boundary_radius(u) * u for u in dirs])
        gn = np.linalg.norm(self.grad_V(pts), axis=1)
        if gn.min() <= 1e-10:
            raise MetricError("E is not a regular value of V: |grad V| ~ 0 "
                              "on the sampled level set")


def oscillator_well(lam, E: float) -> PotentialWell:
    """Separable quadratic well V = sum(lam_i^2 x_i^2)."""
    lam = np.asarray(lam, dtype=float)
    lam2 = lam * lam

    def V(X):
        X = np.atleast_2d(X)
        return (lam2 * X * X).sum(axis=1)

    def grad_V(X):
        X = np.atleast_2d(X)
        return 2.0 * lam2 * X

    def hess_V(X):
        X = np.atleast_2d(X)
        H = np.zeros((len(X), lam.size, lam.size))
        for i in range(lam.size):
            H[:, i, i] = 2.0 * lam2[i]
        return H

    return PotentialWell(V=V, grad_V=grad_V, hess_V=hess_V, E=float(E),
                         dim=lam.size, lam=lam,
                         name="oscillator(%s)" % ",".join("%g" % v for v in lam))


def well_from_descriptor(desc: dict) -> PotentialWell:
    """Build a well from a config mapping: oscillator lambdas or poly terms."""
    E = float(desc.get("energy", desc.get("E", 1.0)))
    if "lambda" in desc or "lam" in desc:
        return oscillator_well(desc.get("lambda", desc.get("lam")), E)
    if "terms" in desc:
        return polynomial_well(desc["terms"], E, int(desc["dim"]))
    raise ValueError("well descriptor needs 'lambda' or 'terms'")


def polynomial_well(terms, E: float, dim: int) -> PotentialWell:
    """Well from monomial terms [(exponents..., coeff), ...]."""
    expo = np.array([t[:-1] for t in terms], dtype=int)
    coef = np.array([t[-1] for t in terms], dtype=float)
    if expo.shape[1] != dim:
        raise ValueError("each term needs %d exponents" % dim)

    def V(X):
        X = np.atleast_2d(X)
        out = np.zeros(len(X))
        for e, c in zip(expo, coef):
            out += c * np.prod(X ** e, axis=1)
        return out

    def grad_V(X):
        X = np.atleast_2d(X)
        return fd_grad(V, X, 1e-6)

    def hess_V(X):
        X = np.atleast_2d(X)
        return fd_hess(V, X, 1e-4)

    return PotentialWell(V=V, grad_V=grad_V, hess_V=hess_V, E=float(E),
                         dim=dim, lam=None, name="poly-well")


# ---------------------------------------------------------------------------
# metric fields
# ---------------------------------------------------------------------------

@dataclass
class MetricField:
    kind: str
    dim: int
    rho: Optional[Callable] = None
    grad_rho: Optional[Callable] = None
    gmat: Optional[Callable] = None
    well: Optional[PotentialWell] = None
    name: str = "metric"

    def g(self, X: np.ndarray) -> np.ndarray:
        """Metric matrices at a batch of points, shape (k, N, N)."""
        X = np.atleast_2d(X)
        if self.kind == "euclidean":
            return np.broadcast_to(np.eye(self.dim), (len(X), self.dim, self.dim)).copy()
        if self.kind == "conformal":
            r = self.rho(X)
            return r[:, None, None] * np.eye(self.dim)
        return self.gmat(X)

    def inner(self, X: np.ndarray, U: np.ndarray, W: np.ndarray) -> np.ndarray:
        """Pointwise g_x(u, w) for batches of points and vectors."""
        X = np.atleast_2d(X)
        U = np.atleast_2d(U)
        W = np.atleast_2d(W)
        if self.kind == "euclidean":
            return (U * W).sum(axis=1)
        if self.kind == "conformal":
            return self.rho(X) * (U * W).sum(axis=1)
        G = self.gmat(X)
        return np.einsum("kij,ki,kj->k", G, U, W)

    def norm(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(self.inner(X, U, U), 0.0))

    def check_positive(self, X: np.ndarray, tol: float = 0.0) -> None:
        if self.kind == "conformal":
            r = self.rho(np.atleast_2d(X))
            if np.any(r <= tol):
                raise MetricError("conformal factor non-positive at %d point(s)"
                                  % int((r <= tol).sum()))


def euclidean_metric(dim: int) -> MetricField:
    return MetricField(kind="euclidean", dim=dim, name="euclidean")


def conformal_metric(rho, grad_rho, dim: int, name: str = "conformal",
                     well: Optional[PotentialWell] = None) -> MetricField:
    return MetricField(kind="conformal", dim=dim, rho=rho, grad_rho=grad_rho,
                       well=well, name=name)


def jacobi_metric_from_well(well: PotentialWell) -> MetricField:
    """Fixed-energy conformal metric (E - V) * I on the open well."""

    def rho(X):
        return well.E - well.V(X)

    def grad_rho(X):
        return -well.grad_V(X)

    return conformal_metric(rho, grad_rho, well.dim,
                            name="jacobi[%s,E=%g]" % (well.name, well.E),
                            well=well)


def general_metric(gmat, dim: int, name: str = "general") -> MetricField:
    return MetricField(kind="general", dim=dim, gmat=gmat, name=name)


# ---------------------------------------------------------------------------
# Christoffel symbols and geodesics
# ---------------------------------------------------------------------------

_FD_G_STEP = 1e-6


def christoffel_at(m: MetricField, x: np.ndarray) -> np.ndarray:
    """Christoffel symbols Gamma[k,i,j] at a single point."""
    x = np.asarray(x, dtype=float).reshape(-1)
    N = m.dim
    if m.kind == "euclidean":
        return np.zeros((N, N, N))
    if m.kind == "conformal":
        r = float(m.rho(x[None])[0])
        if r <= 0.0:
            raise MetricError("conformal factor <= 0 at %s" % x)
        dr = m.grad_rho(x[None])[0]
        G = np.zeros((N, N, N))
        for k in range(N):
            for i in range(N):
                for j in range(N):
                    G[k, i, j] = ((i == k) * dr[j] + (j == k) * dr[i]
                                  - (i == j) * dr[k]) / (2.0 * r)
        return G
    # general tensor: finite differences of g
    g0 = m.gmat(x[None])[0]
    ginv = np.linalg.inv(g0)
    dg = np.empty((N, N, N))  # dg[l,i,j] = d g_ij / d x_l
    for l in range(N):
        e = np.zeros(N)
        e[l] = _FD_G_STEP
        dg[l] = (m.gmat((x + e)[None])[0] - m.gmat((x - e)[None])[0]) / (2 * _FD_G_STEP)
    G = 0.5 * (np.einsum("kl,ilj->kij", ginv, dg)
               + np.einsum("kl,jli->kij", ginv, dg)
               - np.einsum("kl,lij->kij", ginv, dg))
    # symmetrize in the lower indices against FD noise
    return 0.5 * (G + np.transpose(G, (0, 2, 1)))


def _geodesic_rhs(m: MetricField):
    N = m.dim
    if m.kind == "euclidean":
        def rhs(t, y):
            out = np.empty(2 * N)
            out[:N] = y[N:]
            out[N:] = 0.0
            return out
        return rhs
    if m.kind == "conformal":
        def rhs(t, y):
            x = y[:N]
            v = y[N:]
            r = float(m.rho(x[None])[0])
            dr = m.grad_rho(x[None])[0]
            out = np.empty(2 * N)
            out[:N] = v
            out[N:] = -(2.0 * np.dot(dr, v) * v - np.dot(v, v) * dr) / (2.0 * r)
            return out
        return rhs

    def rhs(t, y):
        x = y[:N]
        v = y[N:]
        G = christoffel_at(m, x)
        out = np.empty(2 * N)
        out[:N] = v
        out[N:] = -np.einsum("kij,i,j->k", G, v, v)
        return out
    return rhs


@dataclass
class GeodesicTrajectory:
    t: np.ndarray           # sample times
    x: np.ndarray           # (k, N) positions
    v: np.ndarray           # (k, N) velocities
    status: str             # 'boundary' | 'rho-floor' | 'time'
    truncated: bool
    t_end: float
    x_end: np.ndarray
    v_end: np.ndarray

    def g_length(self, m: MetricField) -> float:
        """Metric length by trapezoidal quadrature of the sampled speed."""
        sp = m.norm(self.x, self.v)
        return float(np.trapezoid(sp, self.t))


def integrate_geodesic(m: MetricField, x0, v0, *, dom=None,
                       stop_at_boundary: bool = True,
                       length_budget: Optional[float] = None,
                       t_max: Optional[float] = None,
                       rho_floor: float = 1e-9,
                       rtol: float = 1e-11, atol: float = 1e-12,
                       samples: int = 200) -> GeodesicTrajectory:
    """Integrate the geodesic equation from (x0, v0).

    Events: crossing of the domain boundary (phi = 0, from inside to out)
    when ``dom`` is given, and proximity to the metric degeneracy rho = 0
    for conformal metrics.  Event roots are localized by the integrator's
    dense-output root finder well below 1e-10.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    v0 = np.asarray(v0, dtype=float).reshape(-1)
    if not np.any(v0):
        raise ValueError("zero initial velocity")
    N = m.dim
    sp0 = float(m.norm(x0[None], v0[None])[0])
    if t_max is None:
        if length_budget is None:
            raise ValueError("need length_budget or t_max")
        if sp0 <= 0.0:
            raise MetricError("initial speed vanishes in the metric")
        t_max = length_budget / sp0

    events = []
    if dom is not None and stop_at_boundary:
        def ev_boundary(t, y):
            return float(dom.phi(y[:N][None])[0])
        ev_boundary.terminal = True
        ev_boundary.direction = 1.0
        events.append(("boundary", ev_boundary))
    if m.kind == "conformal":
        def ev_rho(t, y):
            return float(m.rho(y[:N][None])[0]) - rho_floor
        ev_rho.terminal = True
        ev_rho.direction = -1.0
        events.append(("rho-floor", ev_rho))

    y0 = np.concatenate([x0, v0])
    sol = solve_ivp(_geodesic_rhs(m), (0.0, t_max), y0, method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True,
                    events=[e for _, e in events] or None)
    status = "time"
    t_end = sol.t[-1]
    if sol.status == 1:
        for idx, (nm, _) in enumerate(events):
            if len(sol.t_events[idx]):
                status = nm
                t_end = float(sol.t_events[idx][0])
                break
    ts = np.linspace(0.0, t_end, samples)
    ys = sol.sol(ts)
    y_end = sol.sol(t_end)
    return GeodesicTrajectory(
        t=ts, x=ys[:N].T.copy(), v=ys[N:].T.copy(),
        status=status, truncated=(status == "rho-floor"),
        t_end=t_end, x_end=y_end[:N].copy(), v_end=y_end[N:].copy())
