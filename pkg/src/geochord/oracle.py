"""Independent ground truth: 2-D normal shooting and closed-form oscillator orbits.

The shooting oracle never shares code with the descent solver: chords are
found as zeros of the arrival-tangency defect of geodesics launched along
the inward boundary normal, which characterizes chords meeting the boundary
orthogonally at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from .brake import BrakeOrbit
from .domain import Domain
from .metric import MetricField, integrate_geodesic
from .paths import DiscretePath, resample_polyline

__all__ = ["ShotChord", "shoot_ogc_2d", "oscillator_reference"]


@dataclass
class ShotChord:
    theta: float
    energy: float
    length: float
    path: DiscretePath
    defect: float


def _shoot(dom: Domain, m: MetricField, theta: float, length_budget: float,
           rtol: float = 1e-11):
    """Launch a unit-speed geodesic inward from the boundary point at theta;
    return (defect, trajectory) or (None, None) when it fails to return."""
    b = dom.boundary_point(np.array([theta]))[0]
    g = dom.grad_phi(b[None])[0]
    n_hat = g / np.linalg.norm(g)
    start = b - 1e-9 * dom.diameter * n_hat
    v = -n_hat
    sp = float(m.norm(start[None], v[None])[0])
    if sp <= 0.0:
        return None, None
    traj = integrate_geodesic(m, start, v / sp, dom=dom,
                              length_budget=length_budget, rtol=rtol,
                              atol=rtol * 0.1)
    if traj.status != "boundary":
        return None, None
    ge = dom.grad_phi(traj.x_end[None])[0]
    n_end = ge / np.linalg.norm(ge)
    t_end = np.array([-n_end[1], n_end[0]])
    v_end = traj.v_end / np.linalg.norm(traj.v_end)
    return float(np.dot(v_end, t_end)), traj


def shoot_ogc_2d(dom: Domain, m: MetricField, grid: int, tol: float = 1e-10,
                 length_budget: Optional[float] = None, n_nodes: int = 200,
                 flat_tol: float = 1e-6):
    """Scan boundary angles, root-find sign changes of the arrival defect.

    Returns (chords, info); info flags skipped angles and the rotationally
    degenerate case where the defect vanishes identically (every normal
    chord is orthogonal, e.g. a round disk).
    """
    if dom.dim != 2:
        raise ValueError("shooting oracle supports dimension 2 only")
    L = length_budget if length_budget is not None else 4.0 * dom.diameter
    thetas = np.arange(grid) * (2.0 * np.pi / grid)
    defects = np.full(grid, np.nan)
    skipped = []
    for i, th in enumerate(thetas):
        d, _ = _shoot(dom, m, th, L)
        if d is None:
            skipped.append(float(th))
        else:
            defects[i] = d
    info = {"skipped": skipped, "continuum": False}
    valid = ~np.isnan(defects)
    if valid.sum() >= max(4, grid // 2) and np.nanmax(np.abs(defects)) < flat_tol:
        info["continuum"] = True
        return [], info

    chords: List[ShotChord] = []
    for i in range(grid):
        j = (i + 1) % grid
        if not (valid[i] and valid[j]):
            continue
        a, b = defects[i], defects[j]
        if a == 0.0:
            root = thetas[i]
        elif a * b < 0.0:
            th_b = thetas[j] if j else 2.0 * np.pi

            def f(th):
                d, _ = _shoot(dom, m, th, L)
                return d if d is not None else np.nan

            try:
                root = brentq(f, thetas[i], th_b, xtol=tol)
            except ValueError:
                continue
        else:
            continue
        d, traj = _shoot(dom, m, root, L)
        if traj is None:
            continue
        length = traj.g_length(m)
        if length <= 1e-3 * dom.diameter:
            continue
        nodes = resample_polyline(traj.x, n_nodes)
        chords.append(ShotChord(theta=float(root), energy=length * length,
                                length=length, path=DiscretePath(nodes),
                                defect=float(d)))
    return chords, info


def oscillator_reference(lam, E: float, samples: int = 400):
    """Closed-form axis brake orbits of V = sum lam_i^2 x_i^2 at energy E.

    Along axis i the system is q'' = -2 lam_i^2 q, so the orbit is
    q(t) = (sqrt(E)/lam_i) cos(sqrt(2) lam_i t) e_i with half period
    pi / (sqrt(2) lam_i).  Returns (orbits, warnings); rationally dependent
    frequency ratios are flagged because extra non-axis orbits then exist.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0) or E <= 0:
        raise ValueError("need positive frequencies and energy")
    warnings = []
    N = lam.size
    for i in range(N):
        for j in range(i + 1, N):
            ratio = lam[i] / lam[j]
            if abs(ratio - round(ratio, 6)) < 1e-9 or _near_rational(ratio):
                warnings.append("lam[%d]/lam[%d] close to rational: extra "
                                "orbits may exist" % (i, j))
    orbits = []
    for i in range(N):
        amp = np.sqrt(E) / lam[i]
        omega = np.sqrt(2.0) * lam[i]
        T = np.pi / omega
        ts = np.linspace(0.0, T, samples)
        q = np.zeros((samples, N))
        v = np.zeros((samples, N))
        q[:, i] = amp * np.cos(omega * ts)
        v[:, i] = -amp * omega * np.sin(omega * ts)
        bp = np.zeros((2, N))
        bp[0, i] = amp
        bp[1, i] = -amp
        # conformal length of the axis chord: sqrt(2) * int (E - V) dt
        jac_len = float(np.sqrt(2.0) * np.trapezoid(E - lam[i] ** 2 * q[:, i] ** 2, ts))
        orbits.append(BrakeOrbit(t=ts, q=q, qdot=v, brake_points=bp,
                                 half_period=float(T), energy_residual=0.0,
                                 jacobi_length=jac_len,
                                 meta={"axis": i, "closed_form": True}))
    return orbits, warnings


def _near_rational(x: float, max_den: int = 12, tol: float = 1e-6) -> bool:
    for q in range(1, max_den + 1):
        if abs(x * q - round(x * q)) < tol * q:
            return True
    return False
