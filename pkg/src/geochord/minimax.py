"""Boundary-pair sweep, deduplication and the distinct-chord count report.

Every unordered boundary pair of the grid seeds a chord which is relaxed by
the obstacle flow; terminal chords are deduplicated as point sets (so a
path and its reversal collapse automatically) and compared against the
dimension target: a strongly concave disk carries at least as many distinct
orthogonal chords as its dimension.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._num import hausdorff
from .domain import Domain
from .flow import CriticalCurve, FlowConfig, eta_flow, CLS_OGC
from .metric import MetricField
from .paths import chord_family, path_energy

__all__ = ["MinimaxReport", "family_sweep", "dedup_geometric", "canonical_pairs"]


@dataclass
class MinimaxReport:
    distinct: List[CriticalCurve]
    energies: List[float]
    histogram: dict
    target: int
    members: List[dict] = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.distinct)

    @property
    def meets_target(self) -> bool:
        return self.count >= self.target


def canonical_pairs(params: np.ndarray):
    """Unordered index pairs over lexicographically sorted parameters."""
    params = np.asarray(params, dtype=float)
    if params.ndim == 1:
        order = np.argsort(params, kind="stable")
    else:
        order = np.lexsort(params.T[::-1])
    idx = list(order)
    pairs = []
    for ai in range(len(idx)):
        for bi in range(ai, len(idx)):
            pairs.append((idx[ai], idx[bi]))
    return pairs


def dedup_geometric(curves: List[CriticalCurve], tol: float):
    """Cluster by point-set Hausdorff distance (orientation free) and keep
    the lowest-energy representative of each cluster."""
    if not curves:
        return []
    order = sorted(range(len(curves)),
                   key=lambda i: (curves[i].energy, curves[i].path.nodes[0].tolist()))
    reps: List[CriticalCurve] = []
    for i in order:
        c = curves[i]
        if all(hausdorff(c.path.nodes, r.path.nodes) > tol for r in reps):
            reps.append(c)
    return reps


def family_sweep(dom: Domain, m: MetricField, grid, cfg: FlowConfig,
                 dedup_tol: Optional[float] = None, threads: int = 1,
                 target: Optional[int] = None) -> MinimaxReport:
    """Flow every canonical chord of the boundary grid and report the
    geometrically distinct orthogonal chords with sorted energies."""
    params = np.asarray(grid, dtype=float)
    if params.size == 0:
        raise ValueError("empty boundary grid")
    pts = dom.boundary_point(params)
    pairs = canonical_pairs(params)
    if dedup_tol is None:
        dedup_tol = 0.02 * dom.diameter
    target = target if target is not None else dom.dim

    chords = []
    m0_violations = 0
    jobs = []
    for (i, j) in pairs:
        p0 = chord_family(dom, pts[i], pts[j], cfg.n)
        E0 = path_energy(m, p0)
        if E0 > cfg.m0_sq:
            m0_violations += 1
            jobs.append(None)
        else:
            jobs.append(p0)

    def run(job):
        if job is None:
            return None
        return eta_flow(dom, m, job, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            curves = list(ex.map(run, jobs))
    else:
        curves = [run(j) for j in jobs]

    members = []
    hist: dict = {}
    collected = []
    for (i, j), curve in zip(pairs, curves):
        if curve is None:
            members.append({"pair": (i, j), "cls": "skipped-m0", "energy": None,
                            "iterations": 0})
            hist["skipped-m0"] = hist.get("skipped-m0", 0) + 1
            continue
        members.append({"pair": (i, j), "cls": curve.cls,
                        "energy": curve.energy, "iterations": curve.iterations})
        hist[curve.cls] = hist.get(curve.cls, 0) + 1
        collected.append(curve)

    ogcs = [c for c in collected if c.cls == CLS_OGC]
    distinct = dedup_geometric(ogcs, dedup_tol)
    distinct.sort(key=lambda c: c.energy)
    return MinimaxReport(
        distinct=distinct,
        energies=[c.energy for c in distinct],
        histogram=hist, target=target, members=members,
        flags={"m0_violations": m0_violations,
               "concave": bool(dom.concave) if dom.concave is not None else None})
