import numpy as np
import pytest

import geochord as gc

ROOT2 = np.sqrt(2.0)


@pytest.fixture(scope="session")
def ellipse_dom():
    dom = gc.build_domain({"kind": "ellipse", "semi_axes": [2.0, 1.0]})
    gc.certify_domain(dom, rng=np.random.default_rng(1))
    return dom


@pytest.fixture(scope="session")
def disk_dom():
    dom = gc.build_domain({"kind": "disk"})
    gc.certify_domain(dom, rng=np.random.default_rng(1))
    return dom


@pytest.fixture(scope="session")
def osc_well():
    return gc.oscillator_well([1.0, ROOT2], 1.0)


@pytest.fixture(scope="session")
def jac_dom(osc_well):
    dom = gc.build_omega_delta(osc_well, 0.05)
    gc.certify_domain(dom, samples=150, rng=np.random.default_rng(3))
    return dom


# smoothed union of two disjoint disks: a waist-banded dumbbell whose neck
# walls are gently concave; the boundary-pinned band across the waist is the
# obstacle-geodesic fixture
DUMBBELL = {
    "kind": "implicit",
    "terms": [[4, 0, 1.0], [2, 2, 2.0], [0, 4, 1.0],
              [2, 0, 2 * (0.75 ** 2 - 0.55 ** 2) - 4 * 0.75 ** 2],
              [0, 2, 2 * (0.75 ** 2 - 0.55 ** 2)],
              [0, 0, (0.75 ** 2 - 0.55 ** 2) ** 2 - 0.09]],
    "r_max": 4.0,
}


@pytest.fixture(scope="session")
def dumbbell_dom():
    dom = gc.build_domain(DUMBBELL)
    gc.certify_domain(dom, rng=np.random.default_rng(2))
    return dom


@pytest.fixture(scope="session")
def dumbbell_obstacle(dumbbell_dom):
    """Boundary-pinned flow limit hugging the dumbbell waist."""
    from geochord.flow import FlowConfig, eta_flow
    from geochord.paths import DiscretePath, resample_polyline

    dom = dumbbell_dom
    fc = FlowConfig.from_domain(dom, n=200, m0_sq=60.0, max_iter=8000,
                                pin_endpoints=True, stall_tol=1e-7)
    ends = dom.boundary_point(np.array([np.pi - 0.5, 0.5]))
    arc = dom.boundary_point(np.linspace(np.pi / 2 + 0.12, np.pi / 2 - 0.12, 9))
    poly = np.vstack([ends[0][None], arc, ends[1][None]])
    nodes = resample_polyline(poly, 200)
    bad = dom.phi(nodes[1:-1]) > 0
    nodes[1:-1][bad] = dom.project_to_boundary(nodes[1:-1][bad])
    return eta_flow(dom, dom.metric, DiscretePath(nodes), fc)


def random_paths(dom, metric, count, n, rng, amp=0.05):
    """Admissible random paths: boundary endpoints, wiggly feasible interiors."""
    from geochord.paths import DiscretePath, chord_family

    out = []
    while len(out) < count:
        if dom.dim == 2:
            th = rng.uniform(0, 2 * np.pi, 2)
        else:
            th = np.column_stack([rng.uniform(0, np.pi, 2),
                                  rng.uniform(0, 2 * np.pi, 2)])
        pts = dom.boundary_point(th)
        if np.linalg.norm(pts[0] - pts[1]) < 1e-3 * dom.diameter:
            continue
        p = chord_family(dom, pts[0], pts[1], n)
        nodes = p.nodes.copy()
        s = np.linspace(0, 1, n + 1)[:, None]
        for k in range(1, 4):
            coef = rng.normal(size=(1, dom.dim)) * amp * dom.diameter / k
            nodes += np.sin(np.pi * k * s) * coef
        # pull back inside
        nodes = 0.6 * nodes + 0.4 * p.nodes
        bad = dom.phi(nodes[1:-1]) > -1e-9
        for _ in range(30):
            if not np.any(bad):
                break
            nodes[1:-1][bad] = 0.5 * (nodes[1:-1][bad] + p.nodes[1:-1][bad])
            bad = dom.phi(nodes[1:-1]) > -1e-9
        if np.any(dom.phi(nodes[1:-1]) > 0):
            continue
        out.append(DiscretePath(nodes))
    return out
