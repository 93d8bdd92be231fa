import numpy as np
import pytest
from scipy.integrate import quad

from geochord import _kernels

LAM2 = np.array([1.0, 2.0])


def axis_dist(x):
    # distance to the well boundary along the soft axis, independent quadrature
    return quad(lambda t: np.sqrt(1 - t * t), x, 1.0)[0]


def test_well_dist_matches_axis_quadrature():
    Q = np.array([[0.5, 0.0], [0.8, 0.0], [0.95, 0.0]])
    d = _kernels.well_dist_batch(Q, LAM2, 1.0, 96)
    for q, di in zip(Q, d):
        assert abs(di - axis_dist(q[0])) < 1e-8


def test_well_dist_stiff_axis():
    # along the stiff axis the profile is the soft one rescaled by 1/sqrt(2)
    y = 0.5
    d = _kernels.well_dist_batch(np.array([[0.0, y]]), LAM2, 1.0, 96)[0]
    ref = quad(lambda t: np.sqrt(max(1 - 2 * t * t, 0.0)), y, 1 / np.sqrt(2))[0]
    assert abs(d - ref) < 1e-8


def test_well_dist_fourth_order_convergence():
    q = np.array([[0.55, 0.2]])
    ref = _kernels.well_dist_batch(q, LAM2, 1.0, 512)[0]
    errs = [abs(_kernels.well_dist_batch(q, LAM2, 1.0, s)[0] - ref)
            for s in (8, 16, 32)]
    assert errs[0] / errs[1] > 10.0
    assert errs[1] / errs[2] > 10.0


def test_backends_agree_bitwise():
    if not _kernels.USE_NUMBA:
        pytest.skip("numba backend disabled")
    rng = np.random.default_rng(0)
    Q = rng.uniform(-0.4, 0.4, (64, 2)) + np.array([0.3, 0.0])
    a = _kernels.well_dist_batch_numba(Q, LAM2, 1.0, 24)
    b = _kernels.well_dist_batch_numpy(Q, LAM2, 1.0, 24)
    assert np.array_equal(a, b)
    nodes = rng.normal(size=(33, 2))
    rho = rng.uniform(0.5, 1.5, 32)
    drho = rng.normal(size=(32, 2))
    assert np.array_equal(_kernels.energy_terms_numba(nodes, rho),
                          _kernels.energy_terms_numpy(nodes, rho))
    assert np.array_equal(_kernels.energy_grad_numba(nodes, rho, drho),
                          _kernels.energy_grad_numpy(nodes, rho, drho))


def test_ellipse_newton_dist_near_boundary():
    a, b = 2.0, 1.0
    X = np.array([[1.9, 0.0], [0.0, 0.9], [1.2, 0.7]])
    d = _kernels.ellipse_newton_dist(X, a, b)
    # brute-force oracle over a dense boundary sample
    th = np.linspace(0, 2 * np.pi, 400000)
    bd = np.column_stack([a * np.cos(th), b * np.sin(th)])
    for x, di in zip(X, d):
        ref = np.linalg.norm(bd - x, axis=1).min()
        assert abs(di - ref) < 1e-8
