"""Small numeric helpers shared across the package.

The reversal-symmetric reductions here are load bearing: every energy,
norm and inner product evaluated by the flow must return bit-identical
values on a path and on its node-reversed copy, otherwise backtracking
decisions (and with them whole descent traces) can diverge between the
two.  Pairing the i-th and mirror term before summing achieves this,
because float addition is commutative even though it is not associative.
"""

from __future__ import annotations

import numpy as np


def symmetric_sum(terms: np.ndarray) -> float:
    """Sum of a 1-D term array, exactly invariant under reversal of ``terms``."""
    t = np.asarray(terms, dtype=float)
    m = t.shape[0]
    half = m // 2
    paired = t[:half] + t[m - 1 : m - 1 - half : -1]
    s = float(np.sum(paired))
    if m % 2:
        s += float(t[half])
    return s


def symmetric_dot(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean inner product of flattened arrays via symmetric_sum over rows."""
    prod = (np.asarray(a) * np.asarray(b))
    if prod.ndim > 1:
        prod = prod.sum(axis=tuple(range(1, prod.ndim)))
    return symmetric_sum(prod)


def tridiag_solve(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                  rhs: np.ndarray) -> np.ndarray:
    """Banded LAPACK solve; rhs may be (m,) or (m, k)."""
    from scipy.linalg import solve_banded
    m = diag.shape[0]
    ab = np.zeros((3, m))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, np.asarray(rhs, dtype=float))


def persymmetric_tridiag_solve(lower, diag, upper, rhs) -> np.ndarray:
    """Tridiagonal solve symmetrized so reversing rhs reverses the solution exactly.

    Requires the matrix itself to be persymmetric (invariant under index
    reversal), which holds for the discrete free-end Laplacian used by the
    flow preconditioner.
    """
    y1 = tridiag_solve(lower, diag, upper, rhs)
    y2 = tridiag_solve(lower, diag, upper, np.asarray(rhs)[::-1])[::-1]
    return 0.5 * (y1 + y2)


def smoothstep(u: np.ndarray) -> np.ndarray:
    """C^2 quintic ramp: 0 for u<=0, 1 for u>=1."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def bump_window(u: np.ndarray) -> np.ndarray:
    """C^2 bump (1-u^2)^3 on |u|<1, zero outside."""
    w = np.clip(1.0 - u * u, 0.0, None)
    return w * w * w


# 5-point 4th-order central-difference stencils.  Applied to smooth fields
# only; step sizes are chosen by callers according to the field's noise floor.
_FD_W1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_FD_O1 = np.array([-2.0, -1.0, 1.0, 2.0])


def fd_grad(f, X: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    """Gradient of a batched scalar field f: (k,N)->(k,) by central
    differences (order 4 or 2); all stencil points go through one field
    evaluation."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    k, N = X.shape
    if order == 2:
        wgts, offs = np.array([-0.5, 0.5]), np.array([-1.0, 1.0])
    else:
        wgts, offs = _FD_W1, _FD_O1
    m = len(offs)
    S = m * N
    pts = np.repeat(X[None, :, :], S, axis=0)  # (S, k, N)
    w = np.empty(S)
    s = 0
    for j in range(N):
        for wgt, off in zip(wgts, offs):
            pts[s, :, j] += off * h
            w[s] = wgt
            s += 1
    vals = f(pts.reshape(S * k, N)).reshape(S, k)
    out = np.empty((k, N))
    for j in range(N):
        out[:, j] = (w[m * j: m * j + m, None] * vals[m * j: m * j + m]).sum(axis=0) / h
    return out


def fd_hess(f, X: np.ndarray, h: float) -> np.ndarray:
    """Hessian of a batched scalar field by 2nd-order central differences;
    all stencil points go through one field evaluation."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    k, N = X.shape
    offsets = [np.zeros(N)]
    for i in range(N):
        ei = np.zeros(N)
        ei[i] = h
        offsets.extend([ei, -ei])
        for j in range(i + 1, N):
            ej = np.zeros(N)
            ej[j] = h
            offsets.extend([ei + ej, ei - ej, -ei + ej, -ei - ej])
    O = np.array(offsets)                       # (S, N)
    S = len(O)
    vals = f((X[None, :, :] + O[:, None, :]).reshape(S * k, N)).reshape(S, k)
    out = np.empty((k, N, N))
    s = 1
    for i in range(N):
        out[:, i, i] = (vals[s] - 2.0 * vals[0] + vals[s + 1]) / (h * h)
        s += 2
        for j in range(i + 1, N):
            v = (vals[s] - vals[s + 1] - vals[s + 2] + vals[s + 3]) / (4.0 * h * h)
            out[:, i, j] = v
            out[:, j, i] = v
            s += 4
    return out


def hausdorff(A: np.ndarray, B: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two point sets (k,N) and (m,N)."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(max(d2.min(axis=1).max(), d2.min(axis=0).max())))


def snap_axes(U: np.ndarray, rel: float = 1e-13) -> np.ndarray:
    """Zero out negligible components of direction vectors.

    Boundary directions like (cos pi, sin pi) carry O(1e-16) dust that seeds
    the unstable saddle modes of the descent flow; chords between snapped
    points stay exactly on their symmetry subspace.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float)).copy()
    scale = np.abs(U).max(axis=1, keepdims=True)
    U[np.abs(U) < rel * scale] = 0.0
    return U


def unit_rows(V: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Rows normalized to Euclidean unit length."""
    V = np.atleast_2d(V)
    nrm = np.linalg.norm(V, axis=1, keepdims=True)
    if eps:
        nrm = np.maximum(nrm, eps)
    return V / nrm
