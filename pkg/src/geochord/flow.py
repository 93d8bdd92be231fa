"""Obstacle-constrained pseudo-gradient dynamics on discrete paths.

The descent step moves nodes against the exact action gradient through an
H1-type preconditioner (a persymmetric tridiagonal solve, so the step is
exactly reversal-equivariant), re-projects the endpoints onto the boundary
and clamps interior nodes that left the region back onto it.  Backtracking
guarantees the action never increases.  A stalled path is either classified
directly or perturbed by an outward bump field supported on the
near-boundary band (the escape move); failure of every bump amplitude to
decrease the action certifies a trap numerically.

Classification of stalled paths:

* ``trivial``   -- action below delta1^2/K0^2, the short-curve regime where
  no chord meeting the boundary orthogonally at both ends can live;
* ``ogc``       -- no interior boundary contact and both endpoint velocities
  orthogonal to the boundary within tolerance;
* ``weak-ogc``  -- orthogonal endpoints but isolated interior touches;
* ``obstacle``  -- interior contact arcs carrying a nonnegative multiplier;
* ``unconverged`` otherwise (budget exhausted or residuals too large).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._num import persymmetric_tridiag_solve, symmetric_dot, bump_window, unit_rows
from .domain import Domain
from .metric import MetricField, christoffel_at
from .paths import (DiscretePath, ContactSet, contact_set, energy_gradient,
                    path_energy)

__all__ = [
    "FlowConfig", "CriticalCurve", "MultiplierData", "FlowError",
    "EscapePreconditionError", "v_minus_step", "multiplier_profile",
    "classify", "v_plus_escape", "eta_flow",
    "CLS_TRIVIAL", "CLS_OGC", "CLS_WEAK_OGC", "CLS_OBSTACLE", "CLS_UNCONVERGED",
]

CLS_TRIVIAL = "trivial"
CLS_OGC = "ogc"
CLS_WEAK_OGC = "weak-ogc"
CLS_OBSTACLE = "obstacle"
CLS_UNCONVERGED = "unconverged"


class FlowError(RuntimeError):
    pass


class EscapePreconditionError(FlowError):
    """Raised when the escape move is requested without a qualifying band."""


@dataclass
class FlowConfig:
    n: int = 200
    max_iter: int = 4000
    step0: float = 0.25
    step_grow: float = 1.6
    step_shrink: float = 0.5
    step_min: float = 1e-14
    step_max: float = 1e3
    armijo: float = 1e-4
    boundary_tol: float = 1e-9
    contact_tol: float = 1e-6
    stall_tol: Optional[float] = None      # displacement rate; default 1e-8 * n
    # geometric constants (from the certified domain)
    delta0: float = 0.1
    delta1: float = 0.05
    K0: float = 1.0
    m0_sq: float = 100.0
    Delta_star: Optional[float] = None     # min band-interval width (param units)
    trivial_threshold: Optional[float] = None
    # escape move
    escape_ladder: int = 8
    escape_margin: float = 1e-12
    # per-step sup-norm displacement cap (fraction of the domain diameter);
    # keeps the discrete flow close to the continuous flow lines, which are
    # 1-Lipschitz in the flow time, and prevents retraction teleports
    step_cap_rel: float = 0.02
    diameter: float = 1.0
    # classification tolerances (residuals relative to the action)
    orth_tol: float = 2e-3
    resid_tol: float = 1e-4
    unconverged_resid: float = 0.05
    gamma_band: Optional[float] = None
    use_h1: bool = True
    precond_eps: float = 1.0
    # fixture device: freeze the endpoints (restricts the admissible cone to
    # variations vanishing at both ends; boundary-pinned band fixtures use it)
    pin_endpoints: bool = False

    def finalize(self) -> "FlowConfig":
        if self.stall_tol is None:
            self.stall_tol = 1e-8 * self.n
        if self.trivial_threshold is None:
            self.trivial_threshold = self.delta1 ** 2 / self.K0 ** 2
        bound = self.delta0 ** 2 / (self.K0 ** 2 * self.m0_sq)
        if self.Delta_star is None:
            self.Delta_star = bound
        elif self.Delta_star < bound:
            raise FlowError("Delta_star below the admissible lower bound %g" % bound)
        if self.gamma_band is None:
            self.gamma_band = self.delta1 / 24.0
        return self

    @classmethod
    def from_domain(cls, dom: Domain, n: int = 200, m0_sq: float = None,
                    **kw) -> "FlowConfig":
        if dom.K0 is None or dom.delta1 is None:
            raise FlowError("domain constants missing: run certify_domain first")
        delta0 = dom.delta0 if dom.delta0 is not None else dom.delta_star
        cfg = cls(n=n, delta0=delta0, delta1=dom.delta1, K0=dom.K0,
                  m0_sq=(m0_sq if m0_sq is not None else 25.0 * dom.diameter ** 2),
                  diameter=dom.diameter, **kw)
        return cfg.finalize()


@dataclass
class StepInfo:
    accepted: bool
    stalled: bool
    alpha: float
    disp_rate: float
    energy: float
    phi: Optional[np.ndarray] = None


@dataclass
class MultiplierData:
    lam: np.ndarray                 # per node; NaN off contact
    contact: ContactSet
    resid_interior: float           # relative to the action
    resid_tangential: float
    defect0: float                  # endpoint orthogonality defects (relative)
    defect1: float
    accel: np.ndarray               # discrete covariant acceleration per node


@dataclass
class CriticalCurve:
    path: DiscretePath
    cls: str
    energy: float
    multiplier: Optional[np.ndarray] = None
    residuals: dict = field(default_factory=dict)
    contact: Optional[ContactSet] = None
    iterations: int = 0
    trace: Optional[List[tuple]] = None
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# descent step
# ---------------------------------------------------------------------------

def _tangent_project_ends(dom: Domain, nodes: np.ndarray, V: np.ndarray) -> None:
    """Remove the normal component of V at both endpoints, in place.

    Admissibility of endpoint variations is metric independent: the
    constraint d phi[V] = 0 is chart orthogonality to the chart gradient.
    """
    ends = nodes[[0, -1]]
    n_hat = unit_rows(dom.grad_phi(ends), eps=1e-300)
    for row, idx in ((0, 0), (1, -1)):
        V[idx] = V[idx] - np.dot(V[idx], n_hat[row]) * n_hat[row]


def _precondition(G: np.ndarray, n: int, eps: float) -> np.ndarray:
    """H1 Riesz-type smoothing: solve (eps*M + n*L) d = G columnwise."""
    m = G.shape[0]
    diag = np.full(m, 2.0 * n)
    diag[0] = diag[-1] = 1.0 * n
    mass = np.full(m, 1.0 / n)
    mass[0] = mass[-1] = 0.5 / n
    diag = diag + eps * mass
    off = np.full(m - 1, -1.0 * n)
    return persymmetric_tridiag_solve(off, diag, off, G)


def _retract(dom: Domain, trial: np.ndarray, boundary_tol: float,
             pin_endpoints: bool = False):
    """Feasibility retraction: endpoints onto the boundary, escaped interior
    nodes clamped back along the inward gradient direction.  Returns the
    retracted nodes, a feasibility verdict, and the phi values of the result
    (so callers do not re-evaluate the field)."""
    trial = trial.copy()
    if not pin_endpoints:
        trial[[0, -1]] = dom.project_to_boundary(trial[[0, -1]], iters=4)
    ph = dom.phi(trial[1:-1])
    bad = ph > 0.0
    if np.any(bad):
        trial[1:-1][bad] = dom.project_to_boundary(trial[1:-1][bad], iters=4)
        check = np.concatenate([trial[[0, -1]], trial[1:-1][bad]])
    else:
        check = trial[[0, -1]]
    ph_check = dom.phi(check)
    ph[bad] = ph_check[2:]
    phi_full = np.concatenate([ph_check[:1], ph, ph_check[1:2]])
    feasible = bool(ph_check.max() <= max(boundary_tol, 1e-12))
    return trial, feasible, phi_full


def _pressing_set(dom: Domain, nodes: np.ndarray, phiv: np.ndarray,
                  G: np.ndarray, contact_tol: float):
    """Interior contact nodes whose unconstrained move points outside.

    Those behave as equality constraints for the step: the obstacle carries
    a nonnegative pressure there, so admissible descent slides along the
    boundary.  Contact nodes the gradient pulls inward are released.
    Returns (indices, unit normals) or (None, None)."""
    active = np.zeros(len(nodes), dtype=bool)
    active[1:-1] = phiv[1:-1] >= -contact_tol
    if not np.any(active):
        return None, None
    n_hat = unit_rows(dom.grad_phi(nodes[active]), eps=1e-300)
    pressing = (G[active] * n_hat).sum(axis=1) < 0.0
    if not np.any(pressing):
        return None, None
    return np.nonzero(active)[0][pressing], n_hat[pressing]


def _project_pressing(V: np.ndarray, idx, n_hat) -> None:
    if idx is None:
        return
    comp = (V[idx] * n_hat).sum(axis=1)
    V[idx] -= comp[:, None] * n_hat


def v_minus_step(dom: Domain, m: MetricField, p: DiscretePath, cfg: FlowConfig,
                 state: Optional[dict] = None, phi0: Optional[np.ndarray] = None):
    """One monotone projected-descent step; returns (path, StepInfo)."""
    state = state if state is not None else {}
    nodes = p.nodes
    E0 = p.energy if p.energy is not None else path_energy(m, p)
    if phi0 is None:
        phi0 = dom.phi(nodes)
    G = energy_gradient(m, p)
    if cfg.pin_endpoints:
        G[0] = 0.0
        G[-1] = 0.0
    else:
        _tangent_project_ends(dom, nodes, G)
    press_idx, press_n = _pressing_set(dom, nodes, phi0, G, cfg.contact_tol)
    _project_pressing(G, press_idx, press_n)
    if cfg.use_h1:
        d = _precondition(G, p.n, cfg.precond_eps)
        if cfg.pin_endpoints:
            d[0] = 0.0
            d[-1] = 0.0
        else:
            _tangent_project_ends(dom, nodes, d)
        _project_pressing(d, press_idx, press_n)
        if symmetric_dot(G, d) <= 0.0:
            d = G.copy()
    else:
        d = G.copy()

    alpha = state.get("alpha", cfg.step0)
    d_sup = float(np.abs(d).max())
    cap = cfg.step_cap_rel * cfg.diameter
    if d_sup > 0.0:
        alpha = min(alpha, cap / d_sup)
    accepted = False
    trial = nodes
    phi_full = None
    E_t = E0
    while alpha >= cfg.step_min:
        trial, feasible, phi_full = _retract(dom, nodes - alpha * d, cfg.boundary_tol,
                                             pin_endpoints=cfg.pin_endpoints)
        if feasible:
            pred = symmetric_dot(G, nodes - trial)
            if pred > 0.0:
                try:
                    E_t = path_energy(m, DiscretePath(trial))
                except ValueError:
                    E_t = np.inf
                if E_t <= E0 - cfg.armijo * pred:
                    accepted = True
                    break
        alpha *= cfg.step_shrink

    if not accepted:
        out = p.copy()
        out.energy = E0
        out.stalled = True
        return out, StepInfo(False, True, alpha, 0.0, E0)

    disp_rate = float(np.abs(trial - nodes).max()) / alpha
    state["alpha"] = min(alpha * cfg.step_grow, cfg.step_max)
    stalled = disp_rate <= cfg.stall_tol
    out = DiscretePath(trial, energy=E_t, stalled=stalled)
    return out, StepInfo(True, stalled, alpha, disp_rate, E_t, phi_full)


# ---------------------------------------------------------------------------
# multipliers and classification
# ---------------------------------------------------------------------------

def _discrete_accel(m: MetricField, nodes: np.ndarray) -> np.ndarray:
    """Covariant acceleration n^2 D2 x + Gamma(v, v) at interior nodes."""
    n = nodes.shape[0] - 1
    acc = np.zeros_like(nodes)
    lap = n * n * (nodes[2:] - 2.0 * nodes[1:-1] + nodes[:-2])
    vel = 0.5 * n * (nodes[2:] - nodes[:-2])
    for i in range(1, n):
        Gam = christoffel_at(m, nodes[i])
        acc[i] = lap[i - 1] + np.einsum("kij,i,j->k", Gam, vel[i - 1], vel[i - 1])
    return acc


def _endpoint_defect(dom: Domain, m: MetricField, nodes: np.ndarray,
                     end: int) -> float:
    """Relative metric norm of the tangential part of the endpoint velocity."""
    n = nodes.shape[0] - 1
    if end == 0:
        v = 0.5 * n * (-3.0 * nodes[0] + 4.0 * nodes[1] - nodes[2])
        x = nodes[0]
    else:
        v = 0.5 * n * (-3.0 * nodes[-1] + 4.0 * nodes[-2] - nodes[-3])
        x = nodes[-1]
    g = dom.grad_phi(x[None])[0]
    n_hat = g / np.linalg.norm(g)
    v_t = v - np.dot(v, n_hat) * n_hat
    denom = float(m.norm(x[None], v[None])[0])
    if denom <= 0.0:
        return 0.0
    return float(m.norm(x[None], v_t[None])[0]) / denom


def multiplier_profile(dom: Domain, m: MetricField, p: DiscretePath,
                       cfg: FlowConfig) -> MultiplierData:
    """Constraint multipliers and residuals of a stalled path.

    On contact nodes the multiplier is d phi applied to the discrete
    covariant acceleration; off contact the acceleration itself is the
    interior geodesic residual.  All residuals are scaled by the action.
    """
    if not p.stalled:
        raise FlowError("multiplier profile requires a stalled path")
    nodes = p.nodes
    n = p.n
    E = p.energy if p.energy is not None else path_energy(m, p)
    scale = max(E, 1e-12)
    acc = _discrete_accel(m, nodes)
    cs = contact_set(dom, p, cfg.contact_tol)
    on_contact = np.zeros(n + 1, dtype=bool)
    for a, b in cs.intervals:
        on_contact[a:b + 1] = True
    lam = np.full(n + 1, np.nan)
    interior = np.arange(1, n)
    g_all = dom.grad_phi(nodes)
    resid_int = 0.0
    resid_tan = 0.0
    if m.kind == "conformal":
        rho_all = np.maximum(m.rho(nodes), 1e-300)
    for i in interior:
        if on_contact[i]:
            lam[i] = float(np.dot(acc[i], g_all[i]))
            if m.kind == "conformal":
                grad_g = g_all[i] / rho_all[i]
            elif m.kind == "euclidean":
                grad_g = g_all[i]
            else:
                grad_g = np.linalg.solve(m.g(nodes[i][None])[0], g_all[i])
            tan = acc[i] - lam[i] * grad_g
            resid_tan = max(resid_tan, float(m.norm(nodes[i][None], tan[None])[0]) / scale)
        else:
            resid_int = max(resid_int, float(m.norm(nodes[i][None], acc[i][None])[0]) / scale)
    return MultiplierData(
        lam=lam, contact=cs, resid_interior=resid_int, resid_tangential=resid_tan,
        defect0=_endpoint_defect(dom, m, nodes, 0),
        defect1=_endpoint_defect(dom, m, nodes, 1),
        accel=acc)


def classify(dom: Domain, m: MetricField, p: DiscretePath, cfg: FlowConfig,
             converged: bool = True) -> CriticalCurve:
    """Classify a stalled path into trivial / OGC / weak-OGC / obstacle."""
    E = p.energy if p.energy is not None else path_energy(m, p)
    if E <= cfg.trivial_threshold:
        return CriticalCurve(path=p, cls=CLS_TRIVIAL, energy=E,
                             contact=contact_set(dom, p, cfg.contact_tol))
    prof = multiplier_profile(dom, m, p, cfg)
    residuals = {
        "interior_geodesic": prof.resid_interior,
        "tangential_contact": prof.resid_tangential,
        "endpoint_defect_0": prof.defect0,
        "endpoint_defect_1": prof.defect1,
    }
    base = dict(path=p, energy=E, multiplier=prof.lam, residuals=residuals,
                contact=prof.contact)
    if not converged or prof.resid_interior > cfg.unconverged_resid:
        return CriticalCurve(cls=CLS_UNCONVERGED, **base)
    orth = prof.defect0 <= cfg.orth_tol and prof.defect1 <= cfg.orth_tol
    interior_contact = prof.contact.interior
    if not interior_contact:
        if orth:
            if np.linalg.norm(p.nodes[0] - p.nodes[-1]) <= 1e-6 * dom.diameter:
                return CriticalCurve(cls=CLS_UNCONVERGED, **base)
            return CriticalCurve(cls=CLS_OGC, **base)
        return CriticalCurve(cls=CLS_UNCONVERGED, **base)
    if orth and all(a == b for a, b in interior_contact):
        return CriticalCurve(cls=CLS_WEAK_OGC, **base)
    return CriticalCurve(cls=CLS_OBSTACLE, **base)


# ---------------------------------------------------------------------------
# escape move
# ---------------------------------------------------------------------------

def _qualifying_runs(phiv: np.ndarray, delta1: float):
    """Maximal node runs with phi < -delta1/3 staying above -delta1 and
    bracketed by nodes above -delta1/3."""
    below = phiv < -delta1 / 3.0
    runs = []
    i = 0
    m = len(phiv)
    while i < m:
        if below[i]:
            j = i
            while j + 1 < m and below[j + 1]:
                j += 1
            if i > 0 and j < m - 1 and phiv[i:j + 1].min() > -delta1:
                runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def v_plus_escape(dom: Domain, m: MetricField, p: DiscretePath,
                  cfg: FlowConfig) -> Optional[DiscretePath]:
    """Line-search an outward bump supported on the band phi in
    (-delta1, -delta1/3); returns the first strictly decreasing path or
    None when every amplitude fails (a numerically certified trap)."""
    nodes = p.nodes
    phiv = dom.phi(nodes)
    runs = _qualifying_runs(phiv, cfg.delta1)
    if not runs:
        raise EscapePreconditionError("no band interval with shallow endpoints")
    beta = bump_window((phiv + 0.5 * cfg.delta1) / (cfg.delta1 / 6.0))
    active = np.zeros(len(phiv), dtype=bool)
    for a, b in runs:
        active[a:b + 1] = True
    beta = np.where(active, beta, 0.0)
    if not np.any(beta > 0.0):
        return None
    W = beta[:, None] * unit_rows(dom.grad_phi(nodes), eps=1e-300)
    E0 = p.energy if p.energy is not None else path_energy(m, p)
    amp = cfg.delta1 / 4.0
    for _ in range(cfg.escape_ladder):
        trial, feasible, _phi = _retract(dom, nodes + amp * W, cfg.boundary_tol)
        if feasible:
            try:
                E_t = path_energy(m, DiscretePath(trial))
            except ValueError:
                E_t = np.inf
            if E_t < E0 - cfg.escape_margin * max(1.0, E0):
                return DiscretePath(trial, energy=E_t)
        amp *= 0.5
    return None


# ---------------------------------------------------------------------------
# trap-set diagnostics and the combined flow
# ---------------------------------------------------------------------------

def _band_diagnostics(dom: Domain, nodes: np.ndarray, phiv: np.ndarray,
                      E: float, cfg: FlowConfig):
    """Surrogate membership tests for the invariant trap set and its
    entrance band: widest interval per shallow run with endpoints above
    -delta1/4, min above -delta1/2, width >= Delta_star, plus exclusion-ball
    avoidance."""
    n = len(phiv) - 1
    d1 = cfg.delta1
    shallow = phiv >= -0.5 * d1
    high = phiv >= -0.25 * d1
    f_values = []
    i = 0
    while i <= n:
        if shallow[i]:
            j = i
            while j + 1 <= n and shallow[j + 1]:
                j += 1
            idx = np.nonzero(high[i:j + 1])[0]
            if len(idx):
                a, b = i + idx[0], i + idx[-1]
                if (b - a) / n >= cfg.Delta_star and 0 < a and b < n:
                    f_values.append(float(phiv[a:b + 1].min()))
            i = j + 1
        else:
            i += 1
    avoid_ball = True
    if dom.x0 is not None and dom.rho0:
        avoid_ball = bool(np.linalg.norm(nodes - dom.x0, axis=1).min() > dom.rho0)
    in_lambda = bool(f_values) and avoid_ball and E <= cfg.m0_sq
    in_gamma = in_lambda and all(abs(f + 0.5 * d1) <= cfg.gamma_band for f in f_values)
    strip_min_val = float(phiv.min())
    return in_lambda, in_gamma, strip_min_val


def eta_flow(dom: Domain, m: MetricField, p0: DiscretePath,
             cfg: FlowConfig) -> CriticalCurve:
    """Alternate monotone descent and escape moves until classification.

    The trace records one row per iteration: (iteration, action, phase,
    strip minimum of phi, trap-set membership, entrance-band membership).
    """
    E0 = path_energy(m, p0)
    if E0 > cfg.m0_sq * (1.0 + 1e-12):
        raise FlowError("initial action %g exceeds the admissible bound %g"
                        % (E0, cfg.m0_sq))
    p = p0.copy()
    p.energy = E0
    state = {"alpha": cfg.step0}
    trace = []
    phase = "descend"
    converged = False
    it = 0
    phi_carry = None
    while it < cfg.max_iter:
        p, info = v_minus_step(dom, m, p, cfg, state, phi0=phi_carry)
        phiv = info.phi if info.phi is not None else dom.phi(p.nodes)
        phi_carry = phiv
        in_l, in_g, smin = _band_diagnostics(dom, p.nodes, phiv, info.energy, cfg)
        trace.append((it, info.energy, phase, smin, in_l, in_g))
        it += 1
        if info.energy <= cfg.trivial_threshold:
            p.stalled = True
            converged = True
            break
        if info.stalled:
            p.stalled = True
            try:
                escaped = v_plus_escape(dom, m, p, cfg)
            except EscapePreconditionError:
                escaped = None
            if escaped is not None:
                p = escaped
                phase = "escape"
                state["alpha"] = cfg.step0
                phi_carry = None
                continue
            converged = True
            break
        phase = "descend"
    p.stalled = True
    curve = classify(dom, m, p, cfg, converged=converged)
    curve.iterations = it
    curve.trace = trace
    return curve
