"""From fixed-energy geodesic chords to brake orbits and back.

The conformal factor E - V degenerates on the boundary of the potential
well, so the solver works in a shrunken shell domain: the set of points
whose conformal-metric distance to the well boundary is at least delta.
Near its boundary that distance is a genuine metric signed distance (its
metric gradient has unit norm up to the quadrature approximation), which
makes the shell a valid strongly concave region for the chord solver.

The distance itself is accumulated along ascent lines of V using the
substitution w = sqrt(E - V); see ``geochord._kernels``.  This is the
nearby-boundary approximation: ascent lines of V agree with the metric
geodesics that realize the distance only to leading order away from the
boundary, so the field carries a small smooth systematic error (reported by
the domain certification as ``grad_norm_defect``) that vanishes as the
query point approaches the well boundary.

Chord-to-orbit conversion reparameterizes a constant-speed chord by

    t(s) = (1/sqrt(2)) * integral of sqrt(c) / (E - V) ds,

extends the resulting mechanical state through the second-order system
q'' = -grad V until the velocity brakes to zero, and re-integrates the
orbit rest point to rest point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import _kernels
from ._num import smoothstep, snap_axes
from .domain import Domain, DomainError, concavity_margin
from .metric import MetricField, PotentialWell, jacobi_metric_from_well
from .paths import DiscretePath
from .flow import CriticalCurve, CLS_OGC

__all__ = [
    "BrakeOrbit", "dist_E_approx", "build_omega_delta", "maupertuis_time",
    "brake_orbit_from_ogc", "BrakeError",
]


class BrakeError(RuntimeError):
    pass


@dataclass
class BrakeOrbit:
    t: np.ndarray                    # sample times, t[0] = 0 at a rest point
    q: np.ndarray                    # (k, N) configuration samples
    qdot: np.ndarray                 # (k, N) velocities
    brake_points: np.ndarray         # (2, N) rest points with V = E
    half_period: float
    energy_residual: float           # sup |kinetic + V - E|
    jacobi_length: float
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# conformal distance to the well boundary
# ---------------------------------------------------------------------------

def _well_dist_generic(Q: np.ndarray, well: PotentialWell, steps: int) -> np.ndarray:
    """Fallback quadrature for wells without the separable fast path."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    x = Q.copy()
    V = well.V(x)
    W0 = np.sqrt(np.maximum(well.E - V, 0.0))
    h = W0 / steps
    w = W0.copy()
    dist = np.zeros(len(Q))

    def stage(xs, ws):
        g = well.grad_V(xs)
        g2 = (g * g).sum(axis=1)
        g2 = np.where(g2 > 0.0, g2, 1.0)
        return (2.0 * ws / g2)[:, None] * g, 2.0 * ws * ws / np.sqrt(g2)

    for _ in range(steps):
        k1, d1 = stage(x, w)
        wm = w - 0.5 * h
        k2, d2 = stage(x + 0.5 * h[:, None] * k1, wm)
        k3, d3 = stage(x + 0.5 * h[:, None] * k2, wm)
        we = w - h
        k4, d4 = stage(x + h[:, None] * k3, we)
        x += (h / 6.0)[:, None] * (k1 + 2 * k2 + 2 * k3 + k4)
        dist += h / 6.0 * (d1 + 2 * d2 + 2 * d3 + d4)
        w = we
    return dist


def dist_E_approx(well: PotentialWell, Q, steps: int = 64) -> np.ndarray:
    """Conformal-metric distance from Q to the well boundary V = E."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    V = well.V(Q)
    if np.any(V >= well.E):
        raise BrakeError("query point outside the open well")
    gn2 = (well.grad_V(Q) ** 2).sum(axis=1)
    if np.any(gn2 <= 0.0):
        raise BrakeError("ascent line undefined at a critical point of V")
    if well.lam is not None:
        out = _kernels.well_dist_batch(Q, well.lam * well.lam, well.E, steps)
    else:
        out = _well_dist_generic(Q, well, steps)
    return out


def _well_radii(well: PotentialWell, U: np.ndarray, r_probe: float = 1.0):
    """Well-boundary radii V(r u) = E along a batch of unit directions."""
    U = np.atleast_2d(U)
    k = len(U)
    r_max = r_probe
    for _ in range(60):
        if np.all(well.V(r_max * U) >= well.E):
            break
        r_max *= 2.0
    lo = np.zeros(k)
    hi = np.full(k, r_max)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        inside = well.V(mid[:, None] * U) < well.E
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def _level_radii(well: PotentialWell, U: np.ndarray, level: float,
                 r_b: np.ndarray) -> np.ndarray:
    """Radii where V = level along rays (V monotone along rays)."""
    U = np.atleast_2d(U)
    lo = np.zeros(len(U))
    hi = r_b.copy()
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = well.V(mid[:, None] * U) < level
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _dist_radii(well: PotentialWell, U: np.ndarray, delta: float, steps: int,
                v_floor: float) -> np.ndarray:
    """Radii where the boundary distance equals delta along rays."""
    U = np.atleast_2d(U)
    r_b = _well_radii(well, U)
    lo = _level_radii(well, U, v_floor, r_b)
    d_lo = dist_E_approx(well, lo[:, None] * U, steps)
    if np.any(d_lo <= delta):
        raise DomainError("delta=%g exceeds the usable well depth (min depth "
                          "%g at the probe level)" % (delta, float(d_lo.min())))
    hi = r_b * (1.0 - 1e-12)
    for _ in range(70):
        mid = 0.5 * (lo + hi)
        deep = dist_E_approx(well, mid[:, None] * U, steps) > delta
        lo = np.where(deep, mid, lo)
        hi = np.where(deep, hi, mid)
    return 0.5 * (lo + hi)


def build_omega_delta(well: PotentialWell, delta: float,
                      delta_star: Optional[float] = None,
                      quad_steps: int = 24, n_dirs: int = 64,
                      certify_check: bool = True) -> Domain:
    """Shell domain {distance to the well boundary >= delta} with its
    conformal metric; the field is delta - distance near the shell boundary
    and saturates smoothly on the deep interior (where ascent-line
    quadrature would degrade near the critical set of V)."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    metric = jacobi_metric_from_well(well)
    N = well.dim
    rng = np.random.default_rng(20)
    if N == 2:
        th = np.linspace(0, 2 * np.pi, n_dirs, endpoint=False)
        dirs = np.column_stack([np.cos(th), np.sin(th)])
    else:
        dirs = rng.normal(size=(2 * n_dirs, N))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    v_core = 0.3 * well.E
    r_b_dirs = _well_radii(well, dirs)
    core_r = _level_radii(well, dirs, v_core, r_b_dirs)
    core_d = dist_E_approx(well, core_r[:, None] * dirs, quad_steps)
    available = float(core_d.min()) - delta
    if available <= 0:
        raise DomainError("delta=%g leaves no usable shell (max depth %g); "
                          "use a smaller delta" % (delta, float(core_d.min())))
    if delta_star is None:
        delta_star = min(2.0 * delta, 0.6 * available)
    if delta_star <= 0 or delta_star > available / 0.95:
        raise DomainError("delta_star=%g incompatible with shell depth %g"
                          % (delta_star, available))

    # blend thresholds in V-units: the exact branch must cover the strip
    strip_r = _dist_radii(well, dirs, delta + delta_star, quad_steps,
                          v_core * 0.5)
    v_strip = well.V(strip_r[:, None] * dirs)
    v_hi = 0.8 * float(v_strip.min())
    v_lo = 0.5 * v_hi
    if v_lo <= 0:
        raise DomainError("degenerate blend region; use a smaller delta_star")

    def mean_dist_at_level(v):
        pts = _level_radii(well, dirs, v, r_b_dirs)[:, None] * dirs
        return float(dist_E_approx(well, pts, quad_steps).mean())

    d_hi = mean_dist_at_level(v_hi)
    d_lo = mean_dist_at_level(v_lo)
    slope = max((d_lo - d_hi) / (v_hi - v_lo), 1e-6)

    lam2 = well.lam * well.lam if well.lam is not None else None

    def phi(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = well.V(X)
        out = np.empty(len(X))
        outside = V >= well.E
        ode = (~outside) & (V >= v_lo)
        deep = (~outside) & (V < v_lo)
        if np.any(outside):
            out[outside] = delta + (V[outside] - well.E)
        if np.any(ode):
            if lam2 is not None:
                d = _kernels.well_dist_batch(X[ode], lam2, well.E, quad_steps)
            else:
                d = _well_dist_generic(X[ode], well, quad_steps)
            val = delta - d
            vv = V[ode]
            mid = vv < v_hi
            if np.any(mid):
                chi = smoothstep((vv[mid] - v_lo) / (v_hi - v_lo))
                floor = delta - (d_hi + slope * (v_hi - vv[mid]))
                val[mid] = chi * val[mid] + (1.0 - chi) * floor
            out[ode] = val
        if np.any(deep):
            out[deep] = delta - (d_hi + slope * (v_hi - V[deep]))
        return out

    if N == 2:
        def boundary_point(params):
            th = np.atleast_1d(np.asarray(params, dtype=float))
            u = snap_axes(np.column_stack([np.cos(th), np.sin(th)]))
            return u * _dist_radii(well, u, delta, quad_steps, v_lo)[:, None]
    else:
        def boundary_point(params):
            params = np.atleast_2d(np.asarray(params, dtype=float))
            t, ph = params[:, 0], params[:, 1]
            u = snap_axes(np.column_stack([np.sin(t) * np.cos(ph),
                                           np.sin(t) * np.sin(ph), np.cos(t)]))
            return u * _dist_radii(well, u, delta, quad_steps, v_lo)[:, None]

    sample_r = _dist_radii(well, dirs[: min(len(dirs), 32)], delta,
                           quad_steps, v_lo)
    diam = 2.0 * float(sample_r.max())
    dom = Domain(kind="jacobi", dim=N, delta_star=float(delta_star),
                 metric=metric, phi_fn=phi, boundary_point=boundary_point,
                 diameter=diam,
                 params={"delta": float(delta), "well": well.name,
                         "E": well.E, "quad_steps": quad_steps,
                         "lambda": (well.lam.tolist() if well.lam is not None else None),
                         "v_lo": v_lo, "v_hi": v_hi},
                 h_grad=1e-5 * diam, h_hess=1.2e-3 * diam,
                 center=np.zeros(N))
    dom.well = well  # used by the brake conversion

    if certify_check:
        # some certification rung must pass: the strongly concave band of
        # the well is finite, so thick strips fail even for valid deltas
        margins = []
        for k in range(7):
            mk = concavity_margin(dom, metric, delta_star * 0.5 ** k,
                                  samples=60, rng=np.random.default_rng(21))
            margins.append(mk)
            if mk > 0.0:
                break
        if margins[-1] <= 0.0:
            raise DomainError(
                "strong concavity failed at delta=%g on every strip rung "
                "(best margin %g); use a smaller delta" % (delta, max(margins)))
    return dom


# ---------------------------------------------------------------------------
# time reparameterization and orbit assembly
# ---------------------------------------------------------------------------

def maupertuis_time(well: PotentialWell, p: DiscretePath, c: float) -> np.ndarray:
    """Node times t(s_i) of the mechanical reparameterization of a
    constant-speed chord with squared-length c."""
    if c <= 0:
        raise BrakeError("need a nonconstant chord (c > 0)")
    V = well.V(p.nodes)
    if np.any(V >= well.E):
        raise BrakeError("chord touches the well boundary: V >= E at a node")
    integrand = np.sqrt(c) / (well.E - V) / np.sqrt(2.0)
    ds = 1.0 / p.n
    t = np.zeros(p.n + 1)
    t[1:] = np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * ds)
    return t


def _mech_rhs(well: PotentialWell):
    N = well.dim

    def rhs(t, y):
        out = np.empty(2 * N)
        out[:N] = y[N:]
        out[N:] = -well.grad_V(y[:N][None])[0]
        return out

    return rhs


def _integrate_to_brake(well: PotentialWell, q0, v0, t_budget: float,
                        direction: float = 0.0):
    """Integrate q'' = -grad V until the first rest point.

    Zeros of grad V . qdot localize rest points (|qdot|^2 has a quadratic
    minimum there, no sign crossing of its own), but the same expression
    also vanishes when the velocity is orthogonal to grad V, e.g. crossing
    the critical set of V; events are filtered by closeness to the energy
    shell."""
    N = well.dim

    def ev(t, y):
        return float(np.dot(well.grad_V(y[:N][None])[0], y[N:]))

    ev.terminal = False
    ev.direction = direction
    y0 = np.concatenate([q0, v0])
    sol = solve_ivp(_mech_rhs(well), (0.0, t_budget), y0, method="DOP853",
                    rtol=1e-11, atol=1e-12, dense_output=True, events=[ev])
    for tb in sol.t_events[0]:
        yb = sol.sol(float(tb))
        if 0.5 * float(np.dot(yb[N:], yb[N:])) <= 0.05 * well.E:
            return float(tb), yb[:N].copy(), yb[N:].copy()
    raise BrakeError("no rest point within the time budget %g" % t_budget)


def brake_orbit_from_ogc(well: PotentialWell, ogc: CriticalCurve,
                         samples: int = 400, t_budget: Optional[float] = None,
                         energy_tol: float = 1e-6) -> BrakeOrbit:
    """Extend a chord of the shell domain to the full rest-to-rest orbit."""
    if ogc.cls != CLS_OGC:
        raise BrakeError("brake conversion requires an orthogonal chord, got %r"
                         % ogc.cls)
    p = ogc.path
    c = ogc.energy
    N = well.dim
    t_nodes = maupertuis_time(well, p, c)
    # mechanical velocity at the first node from the chain rule
    n = p.n
    gamma_prime = 0.5 * n * (-3.0 * p.nodes[0] + 4.0 * p.nodes[1] - p.nodes[2])
    V0 = float(well.V(p.nodes[0][None])[0])
    v_mech = gamma_prime * np.sqrt(2.0) * (well.E - V0) / np.sqrt(c)
    # project onto the energy shell: the chord fixes the direction up to
    # O(1/n^2), conservation fixes the speed exactly
    v_mech *= np.sqrt(2.0 * (well.E - V0)) / np.linalg.norm(v_mech)
    if t_budget is None:
        scale = np.sqrt((well.grad_V(p.nodes)**2).sum(axis=1).max()
                        / max(2.0 * well.E, 1e-12))
        t_budget = 200.0 / max(scale, 1e-6)
    # walk outward from the first endpoint (against the inward velocity)
    _, q_rest, _ = _integrate_to_brake(well, p.nodes[0], -v_mech, t_budget)

    # re-integrate the full orbit from rest; a short Taylor step leaves the
    # rest point so the brake event does not fire at t = 0
    g0 = well.grad_V(q_rest[None])[0]
    eps = 1e-8 / max(np.linalg.norm(g0), 1e-12)
    q_eps = q_rest - 0.5 * eps * eps * g0
    v_eps = -eps * g0

    def ev(t, y):
        return float(np.dot(well.grad_V(y[:N][None])[0], y[N:]))

    ev.terminal = False
    ev.direction = 0.0
    sol = solve_ivp(_mech_rhs(well), (eps, t_budget),
                    np.concatenate([q_eps, v_eps]), method="DOP853",
                    rtol=1e-11, atol=1e-12, dense_output=True, events=[ev])
    T = None
    for tb in sol.t_events[0]:
        yb = sol.sol(float(tb))
        if tb > 10 * eps and 0.5 * float(np.dot(yb[N:], yb[N:])) <= 0.05 * well.E:
            T = float(tb)
            break
    if T is None:
        raise BrakeError("orbit failed to rebrake within the time budget")
    ts = np.linspace(0.0, T, samples)
    ys = sol.sol(np.clip(ts, eps, T))
    q = ys[:N].T.copy()
    v = ys[N:].T.copy()
    q[0], v[0] = q_rest, np.zeros(N)
    yT = sol.sol(T)
    q_rest2 = yT[:N].copy()
    v[-1] = yT[N:]
    energy = 0.5 * (v * v).sum(axis=1) + well.V(q)
    resid = float(np.abs(energy - well.E).max())
    if resid > energy_tol:
        raise BrakeError("energy residual %g exceeds tolerance %g"
                         % (resid, energy_tol))
    jac_len = float(np.sqrt(2.0) * np.trapezoid(well.E - well.V(q), ts))
    return BrakeOrbit(t=ts, q=q, qdot=v,
                      brake_points=np.vstack([q_rest, q_rest2]),
                      half_period=T, energy_residual=resid,
                      jacobi_length=jac_len,
                      meta={"chord_energy": c, "well": well.name})
