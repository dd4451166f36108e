"""Sequential minimal optimization for epsilon-insensitive kernel regression.

The dual is parametrized by one coefficient per training point,
beta_i = alpha_i - alpha*_i in [-C, C], maximizing

    W(beta) = y.beta - 0.5 beta.K.beta - epsilon * ||beta||_1

subject to sum(beta) = 0. Each step picks a pair of coefficients and solves
the one-dimensional restricted problem exactly (it is piecewise quadratic
with breakpoints where either coefficient crosses zero). Pair selection is
driven by the intercept-feasibility bounds: every point constrains the
admissible intercept to an interval [lo_i, hi_i], the first index is the
point with the maximal lower bound (the maximal KKT violator), and the
partner is the violating point maximizing |E_1 - E_2|. Convergence is
max(lo) - min(hi) <= tol, which bounds every KKT violation by tol.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a - b||^2) for every row pair of A and B."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq_a = np.einsum("ij,ij->i", A, A)
    sq_b = np.einsum("ij,ij->i", B, B)
    d = sq_a[:, None] + sq_b[None, :] - 2.0 * (A @ B.T)
    np.maximum(d, 0.0, out=d)
    return np.exp(-gamma * d)


class KernelRowCache:
    """LRU cache of full RBF kernel rows, bounded by an approximate byte budget."""

    def __init__(self, X: np.ndarray, gamma: float, max_mb: float = 64.0):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.gamma = float(gamma)
        self.n = self.X.shape[0]
        self.sq = np.einsum("ij,ij->i", self.X, self.X)
        row_bytes = max(self.n * 8, 1)
        self.capacity = max(2, int(max_mb * 1024 * 1024 / row_bytes))
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        row = self._rows.get(i)
        if row is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return row
        self.misses += 1
        d = self.sq + self.sq[i] - 2.0 * (self.X @ self.X[i])
        np.maximum(d, 0.0, out=d)
        row = np.exp(-self.gamma * d)
        row[i] = 1.0
        self._rows[i] = row
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return row


@dataclass
class SMOResult:
    beta: np.ndarray
    intercept: float
    converged: bool
    n_iter: int
    worst_violation: float
    objective: float


def _intercept_bounds(beta: np.ndarray, g: np.ndarray, C: float, eps: float):
    """Per-point bounds [lo_i, hi_i] on the intercept implied by the KKT conditions.

    g = y - K.beta. Free coefficients pin the intercept exactly, coefficients
    at a box edge bound it from one side only.
    """
    lo = np.where(beta >= C, -np.inf, np.where(beta >= 0.0, g - eps, g + eps))
    hi = np.where(beta <= -C, np.inf, np.where(beta <= 0.0, g + eps, g - eps))
    return lo, hi


def _sgn(x: float) -> float:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def _solve_pair(bi, bj, Kii, Kjj, Kij, Ei, Ej, C, eps):
    """Exact maximizer of the two-coefficient subproblem.

    Returns (delta, gain) with the step applied as beta_i += delta,
    beta_j -= delta (the equality constraint keeps the pair sum fixed). The
    restricted objective is concave piecewise quadratic; each sign segment
    is solved in closed form and the best feasible candidate wins.
    """
    eta = Kii + Kjj - 2.0 * Kij
    L = max(-C - bi, bj - C)
    H = min(C - bi, bj + C)
    if not H > L:
        return 0.0, 0.0
    cuts = {L, H}
    for c in (-bi, bj):
        if L < c < H:
            cuts.add(c)
    pts = sorted(cuts)
    dE = Ei - Ej
    best_d = 0.0
    best_gain = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if not b > a:
            continue
        mid = 0.5 * (a + b)
        s = eps * (_sgn(bi + mid) - _sgn(bj - mid))
        if eta > 0.0:
            d = -(dE + s) / eta
            d = min(max(d, a), b)
        else:
            # Degenerate direction: the piece is linear, optimum at an endpoint.
            d = b if -(dE + s) > 0.0 else a
        gain = (
            -0.5 * eta * d * d
            - d * dE
            - eps * (abs(bi + d) - abs(bi))
            - eps * (abs(bj - d) - abs(bj))
        )
        if gain > best_gain:
            best_gain = gain
            best_d = d
    return best_d, best_gain


def smo_solve(
    cache: KernelRowCache,
    y: np.ndarray,
    C: float,
    eps: float,
    tol: float,
    max_updates: int,
) -> SMOResult:
    """Run SMO until the worst KKT violation is within tol or the budget ends."""
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    beta = np.zeros(n)
    u = np.zeros(n)  # u = K.beta, maintained incrementally
    it = 0
    converged = False
    while True:
        g = y - u
        lo, hi = _intercept_bounds(beta, g, C, eps)
        i = int(np.argmax(lo))
        m = lo[i]
        M = hi.min()
        gap = m - M
        if gap <= tol:
            converged = True
            break
        if it >= max_updates:
            break
        E = -g
        # Partner heuristic: the violating point maximizing |E_i - E_j|. With
        # a nonzero tube this can favor a barely-violating opposite-side pair,
        # so the maximal-violating partner competes on exact gain.
        mask = hi < m - tol
        viol = np.abs(E - E[i])
        viol[~mask] = -np.inf
        j = int(np.argmax(viol))
        delta, gain = _pair_step(cache, beta, i, j, E, C, eps)
        j_mvp = int(np.argmin(hi))
        if j_mvp != j:
            delta2, gain2 = _pair_step(cache, beta, i, j_mvp, E, C, eps)
            if gain2 > gain:
                j, delta, gain = j_mvp, delta2, gain2
        if delta == 0.0:
            break  # numerically stalled; report the current gap
        row_i = cache.row(i)
        row_j = cache.row(j)
        beta[i] += delta
        beta[j] -= delta
        u += delta * (row_i - row_j)
        it += 1

    # Recompute u exactly from the nonzero coefficients to wash out drift.
    nz = np.nonzero(beta)[0]
    if nz.size:
        rows = np.stack([cache.row(int(k)) for k in nz])
        u = beta[nz] @ rows
    else:
        u = np.zeros(n)
    g = y - u
    lo, hi = _intercept_bounds(beta, g, C, eps)
    m = float(np.max(lo))
    M = float(np.min(hi))
    intercept = _intercept(beta, g, C, eps, m, M)
    objective = float(y @ beta - 0.5 * (beta @ u) - eps * np.abs(beta).sum())
    return SMOResult(
        beta=beta,
        intercept=intercept,
        converged=converged,
        n_iter=it,
        worst_violation=max(m - M, 0.0),
        objective=objective,
    )


def _pair_step(cache, beta, i, j, E, C, eps) -> float:
    row_i = cache.row(i)
    return _solve_pair(
        beta[i], beta[j], row_i[i], cache.row(j)[j], row_i[j], E[i], E[j], C, eps
    )


def _intercept(beta, g, C, eps, m, M) -> float:
    """Average of the margin-point conditions; bound midpoint when none exist."""
    margin = (np.abs(beta) > 0.0) & (np.abs(beta) < C)
    if margin.any():
        vals = np.where(beta[margin] > 0.0, g[margin] - eps, g[margin] + eps)
        return float(vals.mean())
    if np.isfinite(m) and np.isfinite(M):
        return float(0.5 * (m + M))
    if np.isfinite(m):
        return float(m)
    if np.isfinite(M):
        return float(M)
    return 0.0


def dual_objective(K: np.ndarray, y: np.ndarray, beta: np.ndarray, eps: float) -> float:
    """W(beta) for a full kernel matrix; the quantity SMO maximizes."""
    beta = np.asarray(beta, dtype=np.float64)
    return float(y @ beta - 0.5 * (beta @ (K @ beta)) - eps * np.abs(beta).sum())
