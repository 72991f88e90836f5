"""Gaussian-kernel nu one-class SVM solved in the dual with SMO.

The dual is

    minimise   1/2 a^T K a
    subject to 0 <= a_i <= 1/(nu n),  sum(a) = 1

and the decision function is ``sum_i a_i K(x_i, y) - rho``; points inside the
learned region score positive.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

__all__ = ["SVMConvergenceError", "gaussian_kernel", "solve_dual", "kkt_violation", "dual_objective"]


class SVMConvergenceError(RuntimeError):
    def __init__(self, message, violation):
        super().__init__(message)
        self.violation = violation


def gaussian_kernel(a, b, c):
    """exp(-||u - v||^2 / c); larger ``c`` is a wider kernel."""
    return np.exp(-cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean") / c)


def dual_objective(K, alpha):
    return 0.5 * float(alpha @ K @ alpha)


def _movable(alpha, C):
    # coefficients within a relative 1e-12 of a bound count as at the bound
    eps = 1e-12 * C
    return alpha < C - eps, alpha > eps


def kkt_violation(G, alpha, C):
    """Largest first-order violation max_{a_j>0} G_j - min_{a_i<C} G_i (0 if none)."""
    up, low = _movable(alpha, C)
    if not up.any() or not low.any():
        return 0.0
    return max(0.0, float(G[low].max() - G[up].min()))


def _initial_alpha(n, C):
    alpha = np.zeros(n)
    full = min(n, int(np.floor(1.0 / C + 1e-9)))
    alpha[:full] = C
    if full < n:
        alpha[full] = max(0.0, 1.0 - full * C)
    # floor of 1/C may land just under or over an integer; absorb the residue
    alpha /= alpha.sum()
    return np.minimum(alpha, C)


def _offset(G, alpha, C):
    eps = 1e-12 * C
    free = (alpha > eps) & (alpha < C - eps)
    if free.any():
        return float(G[free].mean())
    at_upper = alpha >= C - eps
    at_lower = alpha <= eps
    lo = G[at_upper].max() if at_upper.any() else None
    hi = G[at_lower].min() if at_lower.any() else None
    if lo is None:
        return float(hi)
    if hi is None:
        return float(lo)
    return 0.5 * float(lo + hi)


def solve_dual(K, nu, tol=1e-3, max_iter=None):
    """Return ``(alpha, rho, n_iter)`` for a precomputed kernel matrix.

    Working pairs are chosen with second-order information (the index with the
    smallest gradient among those that may grow, paired with the shrinkable
    index giving the largest guaranteed decrease).
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    C = 1.0 / (nu * n)
    alpha = _initial_alpha(n, C)
    if n == 1:
        return alpha, float(K[0, 0]), 0
    diag = np.diag(K).copy()
    G = K @ alpha
    if max_iter is None:
        max_iter = 100_000 + 100 * n
    for it in range(max_iter):
        up, low = _movable(alpha, C)
        if not up.any() or not low.any():
            break
        Gup = np.where(up, G, np.inf)
        i = int(np.argmin(Gup))
        b = G - G[i]
        cand = low & (b > 0)
        if not cand.any() or b[cand].max() <= tol:
            break
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 1e-12, a, 1e-12)
        gain = np.where(cand, b * b / a, -np.inf)
        j = int(np.argmax(gain))
        delta = b[j] / a[j]
        delta = min(delta, C - alpha[i], alpha[j])
        alpha[i] += delta
        alpha[j] -= delta
        if C - alpha[i] <= 1e-12 * C:
            alpha[i] = C
        if alpha[j] <= 1e-12 * C:
            alpha[j] = 0.0
        G += delta * (K[:, i] - K[:, j])
    else:
        G = K @ alpha
        raise SVMConvergenceError(
            f"SMO did not converge in {max_iter} iterations", kkt_violation(G, alpha, C))
    G = K @ alpha
    return alpha, _offset(G, alpha, C), it
