"""Discrete paths with boundary endpoints, their energy and exact gradient.

A path is a uniform-parameter node polyline x_0..x_n whose endpoints sit on
the domain boundary.  The energy is the midpoint-rule action

    F_h = n * sum_i g(mid_i)(x_{i+1} - x_i, x_{i+1} - x_i),

second-order accurate for smooth curves and exact for straight segments in
the flat metric.  All reductions go through symmetric pairing so that every
quantity here is bit-identical on a path and its reversal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import _kernels
from ._num import symmetric_sum
from .domain import Domain
from .metric import MetricField

__all__ = [
    "DiscretePath", "ContactSet", "chord_family", "path_energy",
    "energy_gradient", "dist_star", "reverse_path", "contact_set",
    "strip_min", "resample_polyline",
]


@dataclass
class DiscretePath:
    nodes: np.ndarray
    energy: float | None = None
    stalled: bool = False

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))

    @property
    def n(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def copy(self) -> "DiscretePath":
        return DiscretePath(self.nodes.copy(), self.energy, self.stalled)


@dataclass
class ContactSet:
    intervals: List[Tuple[int, int]]
    n: int

    @property
    def count(self) -> int:
        return len(self.intervals)

    @property
    def interior(self) -> List[Tuple[int, int]]:
        return [(a, b) for a, b in self.intervals if a > 0 and b < self.n]


def _midpoint_fields(m: MetricField, nodes: np.ndarray):
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    if m.kind == "euclidean":
        rho = np.ones(len(mid))
        drho = np.zeros_like(mid)
    elif m.kind == "conformal":
        rho = m.rho(mid)
        drho = m.grad_rho(mid)
    else:
        return mid, None, None
    return mid, rho, drho


def path_energy(m: MetricField, p: DiscretePath) -> float:
    """Midpoint-rule action of the path in the metric."""
    nodes = p.nodes
    mid, rho, drho = _midpoint_fields(m, nodes)
    if rho is not None:
        if np.any(rho < 0.0):
            raise ValueError("metric factor negative along the path")
        terms = _kernels.energy_terms(nodes, rho)
    else:
        n = p.n
        d = nodes[1:] - nodes[:-1]
        G = m.gmat(mid)
        terms = n * np.einsum("kij,ki,kj->k", G, d, d)
    return symmetric_sum(terms)


def energy_gradient(m: MetricField, p: DiscretePath) -> np.ndarray:
    """Exact gradient of the discrete action with respect to node positions."""
    nodes = p.nodes
    mid, rho, drho = _midpoint_fields(m, nodes)
    if rho is not None:
        return _kernels.energy_grad(nodes, rho, drho)
    # general tensor: differentiate g numerically at the midpoints
    n = p.n
    N = p.dim
    d = nodes[1:] - nodes[:-1]
    G = m.gmat(mid)
    h = 1e-6
    dG = np.empty((len(mid), N, N, N))  # dG[k,l,i,j] = d g_ij/dx_l at mid k
    for l in range(N):
        e = np.zeros(N)
        e[l] = h
        dG[:, l] = (m.gmat(mid + e) - m.gmat(mid - e)) / (2 * h)
    Gd = np.einsum("kij,kj->ki", G, d)
    quad = np.einsum("klij,ki,kj->kl", dG, d, d)
    left = n * (2.0 * Gd + 0.5 * quad)
    right = n * (-2.0 * Gd + 0.5 * quad)
    out = np.zeros_like(nodes)
    out[1:] += left
    out[:-1] += right
    return out


def chord_family(dom: Domain, A, B, n: int, smooth_iters: int | None = None) -> DiscretePath:
    """Chart chord from A to B, pushed inside the region where it leaves it.

    Constant for A == B, exactly reversal-equivariant by construction
    (integer-weighted node formula plus mirror-symmetric smoothing), and
    near-uniform in chart speed after the smoothing rounds.
    """
    A = np.asarray(A, dtype=float).reshape(-1)
    B = np.asarray(B, dtype=float).reshape(-1)
    tol = 1e-6 * dom.diameter
    pa, pb = float(dom.phi(A[None])[0]), float(dom.phi(B[None])[0])
    if abs(pa) > tol or abs(pb) > tol:
        raise ValueError("chord endpoints must lie on the boundary")
    if np.array_equal(A, B):
        return DiscretePath(np.tile(A, (n + 1, 1)), energy=0.0)
    i = np.arange(n + 1, dtype=float)
    nodes = ((n - i)[:, None] * A + i[:, None] * B) / float(n)
    nodes[0] = A
    nodes[n] = B

    def push_inside(X):
        ph = dom.phi(X[1:-1])
        bad = ph > 0.0
        if np.any(bad):
            X[1:-1][bad] = dom.project_to_boundary(X[1:-1][bad])
        return np.any(bad)

    bent = push_inside(nodes)
    if bent:
        rounds = smooth_iters if smooth_iters is not None else 2 * n
        for _ in range(rounds):
            mid = 0.5 * (nodes[:-2] + nodes[2:])
            nodes[1:-1] = 0.5 * nodes[1:-1] + 0.5 * mid
            push_inside(nodes)
    return DiscretePath(nodes)


def reverse_path(p: DiscretePath) -> DiscretePath:
    return DiscretePath(p.nodes[::-1].copy(), p.energy, p.stalled)


def dist_star(p: DiscretePath, q: DiscretePath) -> float:
    """L2 norm of derivative differences plus the max endpoint distance."""
    if p.n != q.n:
        raise ValueError("paths must share the segment count")
    dp = p.nodes[1:] - p.nodes[:-1]
    dq = q.nodes[1:] - q.nodes[:-1]
    deriv = np.sqrt(p.n * ((dp - dq) ** 2).sum())
    ends = max(float(np.linalg.norm(p.nodes[0] - q.nodes[0])),
               float(np.linalg.norm(p.nodes[-1] - q.nodes[-1])))
    return float(deriv + ends)


def contact_set(dom: Domain, p: DiscretePath, tol: float) -> ContactSet:
    """Maximal index intervals where the path touches the boundary band."""
    mask = dom.phi(p.nodes) >= -tol
    intervals = []
    i = 0
    n1 = len(mask)
    while i < n1:
        if mask[i]:
            j = i
            while j + 1 < n1 and mask[j + 1]:
                j += 1
            intervals.append((i, j))
            i = j + 1
        else:
            i += 1
    return ContactSet(intervals=intervals, n=p.n)


def strip_min(dom: Domain, p: DiscretePath, a: int, b: int) -> float:
    """min of phi over the node range [a, b]."""
    if not (0 <= a <= b <= p.n):
        raise ValueError("empty or out-of-range node interval")
    return float(dom.phi(p.nodes[a:b + 1]).min())


def resample_polyline(X: np.ndarray, n: int) -> np.ndarray:
    """Resample a polyline to n+1 nodes at uniform chart arclength."""
    X = np.atleast_2d(X)
    seg = np.linalg.norm(np.diff(X, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        return np.tile(X[0], (n + 1, 1))
    t = np.linspace(0.0, s[-1], n + 1)
    out = np.empty((n + 1, X.shape[1]))
    for k in range(X.shape[1]):
        out[:, k] = np.interp(t, s, X[:, k])
    return out
