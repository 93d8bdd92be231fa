"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Backend selection happens once at import time: setting the environment
variable ``GEOCHORD_NO_NUMBA=1`` (or numba being unavailable) selects the
numpy implementations.  The well-distance and energy kernels perform the
same floating-point operations per point in both backends, so their results
are bit-identical.  ``benchmarks/bench_kernels.py`` times the backends
against each other.

The dominant kernel is ``well_dist_batch``: the conformal-metric distance
from a batch of points to the zero set of ``E - V`` for a separable
quadratic well ``V = sum(lam2 * x^2)``.  It integrates along the ascent
lines of V using the substitution w = sqrt(E - V), which removes the
square-root degeneracy of the integrand at the well boundary, giving a
smooth fixed-step RK4 problem:

    dx/dw   = -2 w grad V / |grad V|^2      (w runs from sqrt(E-V(Q)) to 0)
    d(dist)/dw accumulates 2 w^2 / |grad V|

Fixed step COUNT (not fixed step size) keeps the discretized map Q -> dist
smooth in Q, which the finite-difference gradient/Hessian evaluators rely
on.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("GEOCHORD_NO_NUMBA", "").strip().lower()
_DISABLED = _env in ("1", "true", "yes", "on")

try:  # pragma: no cover - import guard
    if _DISABLED:
        raise ImportError("numba disabled by GEOCHORD_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


# ---------------------------------------------------------------------------
# pure-numpy implementations (lockstep over the batch)
# ---------------------------------------------------------------------------

def well_dist_batch_numpy(Q, lam2, E, steps):
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    x = Q.copy()
    V = (lam2 * x * x).sum(axis=1)
    W0 = np.sqrt(np.maximum(E - V, 0.0))
    h = W0 / steps
    w = W0.copy()
    dist = np.zeros(len(Q))

    def stage(xs, ws):
        g = 2.0 * lam2 * xs
        g2 = (g * g).sum(axis=1)
        g2 = np.where(g2 > 0.0, g2, 1.0)  # dead points have h == 0 anyway
        kx = (2.0 * ws / g2)[:, None] * g
        kd = 2.0 * ws * ws / np.sqrt(g2)
        return kx, kd

    for _ in range(steps):
        k1, d1 = stage(x, w)
        wm = w - 0.5 * h
        k2, d2 = stage(x + 0.5 * h[:, None] * k1, wm)
        k3, d3 = stage(x + 0.5 * h[:, None] * k2, wm)
        we = w - h
        k4, d4 = stage(x + h[:, None] * k3, we)
        x += (h / 6.0)[:, None] * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        dist += h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        w = we
    return dist


def energy_terms_numpy(nodes, rho_mid):
    n = nodes.shape[0] - 1
    d = nodes[1:] - nodes[:-1]
    sq = (d * d).sum(axis=1)
    return n * rho_mid * sq


def ellipse_newton_dist_numpy(X, a, b, iters=10):
    """Distance to the ellipse boundary by foot-point Newton from the
    scaled-angle seed.  Exact on the curvature-reach strip; callers guard
    the deep interior (where the seed basin can miss the nearest foot) by
    taking a minimum with a coarse polyline distance."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    x, y = X[:, 0], X[:, 1]
    t = np.arctan2(a * y, b * x)
    for _ in range(iters):
        c, s = np.cos(t), np.sin(t)
        dx, dy = x - a * c, y - b * s
        h = -dx * a * s + dy * b * c
        hp = -dx * a * c - dy * b * s - (a * a * s * s + b * b * c * c)
        hp = np.where(np.abs(hp) > 1e-300, hp, 1.0)
        t = t - np.clip(h / hp, -0.2, 0.2)
    c, s = np.cos(t), np.sin(t)
    return np.sqrt((x - a * c) ** 2 + (y - b * s) ** 2)


def energy_grad_numpy(nodes, rho_mid, drho_mid):
    n = nodes.shape[0] - 1
    d = nodes[1:] - nodes[:-1]
    sq = (d * d).sum(axis=1)[:, None]
    # per-segment contributions to the left (i+1) and right (i) node
    left = n * (2.0 * rho_mid[:, None] * d + 0.5 * drho_mid * sq)
    right = n * (-2.0 * rho_mid[:, None] * d + 0.5 * drho_mid * sq)
    G = np.zeros_like(nodes)
    G[1:] += left
    G[:-1] += right
    return G


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if USE_NUMBA:

    @njit(cache=True)
    def _well_dist_batch_nb(Q, lam2, E, steps):
        npts, N = Q.shape
        out = np.empty(npts)
        x = np.empty(N)
        xt = np.empty(N)
        k1 = np.empty(N)
        k2 = np.empty(N)
        k3 = np.empty(N)
        k4 = np.empty(N)
        for i in range(npts):
            V = 0.0
            for k in range(N):
                x[k] = Q[i, k]
                V += lam2[k] * x[k] * x[k]
            diff = E - V
            if diff <= 0.0:
                out[i] = 0.0
                continue
            W0 = np.sqrt(diff)
            h = W0 / steps
            w = W0
            dist = 0.0
            for _ in range(steps):
                g2 = 0.0
                for k in range(N):
                    g2 += 4.0 * lam2[k] * lam2[k] * x[k] * x[k]
                c = 2.0 * w / g2
                for k in range(N):
                    k1[k] = c * 2.0 * lam2[k] * x[k]
                d1 = 2.0 * w * w / np.sqrt(g2)
                wm = w - 0.5 * h
                g2 = 0.0
                for k in range(N):
                    xt[k] = x[k] + 0.5 * h * k1[k]
                    g2 += 4.0 * lam2[k] * lam2[k] * xt[k] * xt[k]
                c = 2.0 * wm / g2
                for k in range(N):
                    k2[k] = c * 2.0 * lam2[k] * xt[k]
                d2 = 2.0 * wm * wm / np.sqrt(g2)
                g2 = 0.0
                for k in range(N):
                    xt[k] = x[k] + 0.5 * h * k2[k]
                    g2 += 4.0 * lam2[k] * lam2[k] * xt[k] * xt[k]
                c = 2.0 * wm / g2
                for k in range(N):
                    k3[k] = c * 2.0 * lam2[k] * xt[k]
                d3 = 2.0 * wm * wm / np.sqrt(g2)
                we = w - h
                g2 = 0.0
                for k in range(N):
                    xt[k] = x[k] + h * k3[k]
                    g2 += 4.0 * lam2[k] * lam2[k] * xt[k] * xt[k]
                c = 2.0 * we / g2
                for k in range(N):
                    k4[k] = c * 2.0 * lam2[k] * xt[k]
                d4 = 2.0 * we * we / np.sqrt(g2)
                for k in range(N):
                    x[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
                dist += h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
                w = we
            out[i] = dist
        return out

    def well_dist_batch_numba(Q, lam2, E, steps):
        Q = np.ascontiguousarray(np.atleast_2d(np.asarray(Q, dtype=float)))
        return _well_dist_batch_nb(Q, np.ascontiguousarray(lam2, dtype=float),
                                   float(E), int(steps))

    @njit(cache=True)
    def _energy_terms_nb(nodes, rho_mid):
        n = nodes.shape[0] - 1
        N = nodes.shape[1]
        out = np.empty(n)
        for i in range(n):
            sq = 0.0
            for k in range(N):
                dk = nodes[i + 1, k] - nodes[i, k]
                sq += dk * dk
            out[i] = n * rho_mid[i] * sq
        return out

    def energy_terms_numba(nodes, rho_mid):
        return _energy_terms_nb(np.ascontiguousarray(nodes),
                                np.ascontiguousarray(rho_mid))

    @njit(cache=True)
    def _energy_grad_nb(nodes, rho_mid, drho_mid):
        n = nodes.shape[0] - 1
        N = nodes.shape[1]
        G = np.zeros((n + 1, N))
        for i in range(n):
            sq = 0.0
            for k in range(N):
                dk = nodes[i + 1, k] - nodes[i, k]
                sq += dk * dk
            for k in range(N):
                dk = nodes[i + 1, k] - nodes[i, k]
                left = n * (2.0 * rho_mid[i] * dk + 0.5 * drho_mid[i, k] * sq)
                right = n * (-2.0 * rho_mid[i] * dk + 0.5 * drho_mid[i, k] * sq)
                G[i + 1, k] += left
                G[i, k] += right
        return G

    def energy_grad_numba(nodes, rho_mid, drho_mid):
        return _energy_grad_nb(np.ascontiguousarray(nodes),
                               np.ascontiguousarray(rho_mid),
                               np.ascontiguousarray(drho_mid))

    @njit(cache=True)
    def _ellipse_newton_dist_nb(X, a, b, iters):
        k = X.shape[0]
        out = np.empty(k)
        for i in range(k):
            x = X[i, 0]
            y = X[i, 1]
            t = np.arctan2(a * y, b * x)
            for _ in range(iters):
                c = np.cos(t)
                s = np.sin(t)
                dx = x - a * c
                dy = y - b * s
                h = -dx * a * s + dy * b * c
                hp = -dx * a * c - dy * b * s - (a * a * s * s + b * b * c * c)
                if abs(hp) <= 1e-300:
                    hp = 1.0
                step = h / hp
                if step > 0.2:
                    step = 0.2
                elif step < -0.2:
                    step = -0.2
                t -= step
            c = np.cos(t)
            s = np.sin(t)
            out[i] = np.sqrt((x - a * c) ** 2 + (y - b * s) ** 2)
        return out

    def ellipse_newton_dist_numba(X, a, b, iters=10):
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        return _ellipse_newton_dist_nb(X, float(a), float(b), int(iters))

    well_dist_batch = well_dist_batch_numba
    energy_terms = energy_terms_numba
    energy_grad = energy_grad_numba
    ellipse_newton_dist = ellipse_newton_dist_numba
else:
    well_dist_batch_numba = None
    energy_terms_numba = None
    energy_grad_numba = None
    ellipse_newton_dist_numba = None

    well_dist_batch = well_dist_batch_numpy
    energy_terms = energy_terms_numpy
    energy_grad = energy_grad_numpy
    ellipse_newton_dist = ellipse_newton_dist_numpy
