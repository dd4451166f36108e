"""Four regressor families behind one fit/predict contract.

Ordinary least squares (normal equations with a ridge fallback), squared-loss
stochastic gradient descent with an inverse-scaling learning rate, linear
epsilon-insensitive SVR trained in the primal by seeded mini-batch
subgradient steps, and RBF-kernel epsilon-SVR trained by sequential minimal
optimization.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import FitError
from .smo import KernelRowCache, rbf_kernel, smo_solve

DEFAULT_SEED = 42


class ModelFamily(str, Enum):
    OLS = "ols"
    SGD = "sgd"
    SVR_LINEAR = "svr_linear"
    SVR_RBF = "svr_rbf"


@dataclass(frozen=True)
class SVRHyperparams:
    C: float = 1.0
    epsilon: float = 0.1
    gamma: float | str = "scale"  # "scale" resolves to 1 / (d * Var(X))
    tol: float = 1e-3
    max_passes: int = 200  # update budget = max_passes * n
    cache_mb: float = 64.0

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise ValueError(f"unknown gamma rule {self.gamma!r}")
        elif self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class SGDHyperparams:
    alpha: float = 1e-4  # L2 penalty
    eta0: float = 0.01
    power_t: float = 0.25  # learning rate eta0 / t**power_t
    max_epochs: int = 1000
    tol: float = 1e-3
    n_iter_no_change: int = 5


@dataclass(frozen=True)
class LinearSVRHyperparams:
    C: float = 1.0
    epsilon: float = 0.0
    max_iter: int = 4000  # epochs, hard cap
    batch_size: int = 128
    eta0: float = 0.05
    patience: int = 100  # epochs without sufficient objective improvement
    min_rel_improvement: float = 1e-5


DEFAULT_HYPERPARAMS = {
    ModelFamily.OLS: None,
    ModelFamily.SGD: SGDHyperparams(),
    ModelFamily.SVR_LINEAR: LinearSVRHyperparams(),
    ModelFamily.SVR_RBF: SVRHyperparams(),
}


@dataclass(frozen=True)
class RegressorSpec:
    family: ModelFamily
    hyperparams: object | None = None
    seed: int = DEFAULT_SEED

    def resolved_hyperparams(self):
        if self.hyperparams is not None:
            return self.hyperparams
        return DEFAULT_HYPERPARAMS[self.family]


@dataclass
class FittedModel:
    family: ModelFamily
    n_features: int
    b: float
    w: np.ndarray | None = None
    support_vectors: np.ndarray | None = None
    dual_coef: np.ndarray | None = None
    gamma: float | None = None
    converged: bool = True
    n_iter: int = 0
    worst_kkt_violation: float = 0.0
    train_objective: float | None = None
    hyperparams: dict = field(default_factory=dict)
    seed: int | None = None
    layout: list[str] | None = None

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("predict expects a 2-d matrix")
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        if X.shape[0] == 0:
            return np.zeros(0, dtype=np.float64)
        if self.family == ModelFamily.SVR_RBF:
            if self.support_vectors is None or self.support_vectors.shape[0] == 0:
                return np.full(X.shape[0], self.b)
            K = rbf_kernel(X, self.support_vectors, self.gamma)
            return K @ self.dual_coef + self.b
        return X @ self.w + self.b


def predict(model: FittedModel, X) -> np.ndarray:
    return model.predict(X)


def fit(spec: RegressorSpec, X, y, layout: list[str] | None = None) -> FittedModel:
    """Dispatch to the family-specific trainer."""
    hp = spec.resolved_hyperparams()
    if spec.family == ModelFamily.OLS:
        model = fit_ols(X, y)
    elif spec.family == ModelFamily.SGD:
        model = fit_sgd(X, y, hp, seed=spec.seed)
    elif spec.family == ModelFamily.SVR_LINEAR:
        model = fit_svr_linear(X, y, hp, seed=spec.seed)
    elif spec.family == ModelFamily.SVR_RBF:
        model = fit_svr_rbf(X, y, hp)
    else:
        raise ValueError(f"unknown model family {spec.family!r}")
    model.layout = list(layout) if layout is not None else None
    return model


def _check_xy(X, y, min_rows: int = 1) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d matrix")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError("y must be a vector matching the rows of X")
    if X.shape[0] < min_rows:
        raise ValueError(f"need at least {min_rows} training rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    return X, y


def fit_ols(X, y) -> FittedModel:
    """Least squares via normal equations on the intercept-augmented system.

    Falls back to a small ridge (1e-8 on the Gram diagonal) when the system
    is singular or badly conditioned.
    """
    X, y = _check_xy(X, y)
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    G = A.T @ A
    c = A.T @ y
    theta = None
    try:
        if np.linalg.cond(G) < 1e12:
            theta = np.linalg.solve(G, c)
    except np.linalg.LinAlgError:
        theta = None
    if theta is None or not np.all(np.isfinite(theta)):
        theta = np.linalg.solve(G + 1e-8 * np.eye(G.shape[0]), c)
    return FittedModel(
        family=ModelFamily.OLS,
        n_features=X.shape[1],
        w=theta[:-1],
        b=float(theta[-1]),
        hyperparams={},
    )


def fit_sgd(X, y, hp: SGDHyperparams | None = None, seed: int = DEFAULT_SEED) -> FittedModel:
    """Squared-loss SGD with L2 penalty and eta_t = eta0 / t**power_t.

    Stops early when the mean epoch loss fails to improve on the best seen
    by ``tol`` for ``n_iter_no_change`` consecutive epochs. The intercept is
    not penalized. Fully deterministic for a fixed seed.
    """
    hp = hp or SGDHyperparams()
    X, y = _check_xy(X, y)
    n, d = X.shape
    rng = np.random.RandomState(seed)
    w = np.zeros(d)
    b = 0.0
    t = 0
    best = math.inf
    stale = 0
    epochs_run = 0
    for epoch in range(hp.max_epochs):
        order = rng.permutation(n)
        sumloss = 0.0
        for i in order:
            t += 1
            lr = hp.eta0 / t**hp.power_t
            xi = X[i]
            err = (xi @ w + b) - y[i]
            sumloss += 0.5 * err * err
            w -= lr * (err * xi + hp.alpha * w)
            b -= lr * err
        epochs_run = epoch + 1
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise FitError(f"sgd diverged at epoch {epochs_run}")
        loss = sumloss / n
        if loss > best - hp.tol:
            stale += 1
            if stale >= hp.n_iter_no_change:
                break
        else:
            stale = 0
        best = min(best, loss)
    return FittedModel(
        family=ModelFamily.SGD,
        n_features=d,
        w=w,
        b=float(b),
        n_iter=epochs_run,
        hyperparams=asdict(hp),
        seed=seed,
    )


def _linsvr_objective(X, y, w, b, C, eps) -> float:
    r = y - (X @ w + b)
    loss = np.maximum(np.abs(r) - eps, 0.0).sum()
    return float(0.5 * (w @ w) + C * loss)


def fit_svr_linear(
    X, y, hp: LinearSVRHyperparams | None = None, seed: int = DEFAULT_SEED
) -> FittedModel:
    """Primal epsilon-insensitive linear SVR by seeded mini-batch subgradient.

    The epoch count is hard-capped at ``max_iter``; the returned parameters
    are the best iterate by training objective. ``converged`` reports
    whether the objective plateaued before the cap.
    """
    hp = hp or LinearSVRHyperparams()
    X, y = _check_xy(X, y)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    best_w, best_b = w.copy(), b
    best_obj = _linsvr_objective(X, y, w, b, hp.C, hp.epsilon)
    if hp.max_iter <= 0:
        return FittedModel(
            family=ModelFamily.SVR_LINEAR,
            n_features=d,
            w=best_w,
            b=best_b,
            converged=False,
            n_iter=0,
            train_objective=best_obj,
            hyperparams=asdict(hp),
            seed=seed,
        )
    rng = np.random.RandomState(seed)
    lam = 1.0 / (n * hp.C)
    bs = max(1, min(hp.batch_size, n))
    t = 0
    epochs_run = 0
    plateaued = False
    # Weighted running average of the iterates; it damps the subgradient
    # oscillation and competes with the raw iterates for the best objective.
    avg_w = w.copy()
    avg_b = b
    window_best = best_obj
    for epoch in range(hp.max_iter):
        order = rng.permutation(n)
        for s in range(0, n, bs):
            t += 1
            idx = order[s : s + bs]
            Xb = X[idx]
            r = y[idx] - (Xb @ w + b)
            lr = hp.eta0 / math.sqrt(t)
            gw = lam * w
            gb = 0.0
            active = np.abs(r) > hp.epsilon
            if active.any():
                signs = np.sign(r[active])
                gw = gw - (signs @ Xb[active]) / idx.size
                gb = -signs.sum() / idx.size
            w = w - lr * gw
            b = b - lr * gb
            rho = 2.0 / (t + 2.0)
            avg_w += rho * (w - avg_w)
            avg_b += rho * (b - avg_b)
        epochs_run = epoch + 1
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise FitError(f"linear svr diverged at epoch {epochs_run}")
        for cand_w, cand_b in ((w, b), (avg_w, avg_b)):
            obj = _linsvr_objective(X, y, cand_w, cand_b, hp.C, hp.epsilon)
            if obj < best_obj:
                best_obj = obj
                best_w, best_b = cand_w.copy(), float(cand_b)
        # Plateau check over a patience-sized window of epochs.
        if epochs_run % hp.patience == 0:
            if best_obj > window_best - hp.min_rel_improvement * (abs(window_best) + 1e-12):
                plateaued = True
                break
            window_best = best_obj
    return FittedModel(
        family=ModelFamily.SVR_LINEAR,
        n_features=d,
        w=best_w,
        b=best_b,
        converged=plateaued,
        n_iter=epochs_run,
        train_objective=best_obj,
        hyperparams=asdict(hp),
        seed=seed,
    )


def resolve_gamma(gamma: float | str, X: np.ndarray) -> float:
    if isinstance(gamma, str):
        if gamma != "scale":
            raise ValueError(f"unknown gamma rule {gamma!r}")
        var = float(np.asarray(X, dtype=np.float64).var())
        return 1.0 / (X.shape[1] * var) if var > 0.0 else 1.0
    g = float(gamma)
    if g <= 0:
        raise ValueError("gamma must be positive")
    return g


def fit_svr_rbf(X, y, hp: SVRHyperparams | None = None) -> FittedModel:
    """Epsilon-SVR with an RBF kernel, trained by SMO.

    Only points with a nonzero dual coefficient are stored as support
    vectors. A model that exhausts its update budget is returned with
    ``converged=False`` and the worst remaining KKT violation.
    """
    hp = hp or SVRHyperparams()
    X, y = _check_xy(X, y, min_rows=2)
    gamma = resolve_gamma(hp.gamma, X)
    cache = KernelRowCache(X, gamma, hp.cache_mb)
    res = smo_solve(
        cache, y, C=hp.C, eps=hp.epsilon, tol=hp.tol,
        max_updates=int(hp.max_passes) * X.shape[0],
    )
    sv = res.beta != 0.0
    hp_dict = asdict(hp)
    return FittedModel(
        family=ModelFamily.SVR_RBF,
        n_features=X.shape[1],
        b=res.intercept,
        support_vectors=X[sv].copy(),
        dual_coef=res.beta[sv].copy(),
        gamma=gamma,
        converged=res.converged,
        n_iter=res.n_iter,
        worst_kkt_violation=res.worst_violation,
        train_objective=res.objective,
        hyperparams=hp_dict,
    )


def kkt_report(model: FittedModel, X, y, tol: float | None = None) -> dict:
    """Check the optimality conditions of a fitted RBF-SVR on its training set.

    Returns the violation magnitudes: box (coefficients outside [-C, C]),
    equality (|sum of coefficients|), and for each complementarity class
    the worst residual violation. ``ok`` applies the given tolerance.
    """
    if model.family != ModelFamily.SVR_RBF:
        raise ValueError("kkt_report applies to RBF-SVR models")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    C = float(model.hyperparams["C"])
    eps = float(model.hyperparams["epsilon"])
    tol = float(model.hyperparams["tol"]) if tol is None else float(tol)
    # Reconstruct the full coefficient vector by matching support vector rows.
    beta = np.zeros(X.shape[0])
    if model.support_vectors is not None and model.support_vectors.shape[0]:
        used = np.zeros(model.support_vectors.shape[0], dtype=bool)
        for i in range(X.shape[0]):
            for s in range(model.support_vectors.shape[0]):
                if not used[s] and np.array_equal(X[i], model.support_vectors[s]):
                    beta[i] = model.dual_coef[s]
                    used[s] = True
                    break
        if not used.all():
            raise ValueError("support vectors not found among the training rows")
    resid = y - model.predict(X)
    box = float(np.maximum(np.abs(beta) - C, 0.0).max(initial=0.0))
    equality = float(abs(beta.sum()))
    zero = beta == 0.0
    at_bound = np.abs(beta) == C
    free = ~zero & ~at_bound
    v_zero = float(np.maximum(np.abs(resid[zero]) - (eps + tol), 0.0).max(initial=0.0))
    v_bound = float(np.maximum((eps - tol) - np.abs(resid[at_bound]), 0.0).max(initial=0.0))
    # At-bound residuals must also point the right way: beta=C needs resid>0.
    sign_bad = 0.0
    if at_bound.any():
        wrong = np.sign(resid[at_bound]) * np.sign(beta[at_bound]) < 0
        if np.any(wrong & (np.abs(resid[at_bound]) > tol)):
            sign_bad = float(np.abs(resid[at_bound][wrong]).max())
    v_free = float(np.abs(np.abs(resid[free]) - eps).max(initial=0.0))
    worst = max(v_zero, v_bound, sign_bad, max(v_free - tol, 0.0))
    return {
        "box_violation": box,
        "equality_violation": equality,
        "zero_coef_violation": v_zero,
        "bound_coef_violation": v_bound,
        "bound_sign_violation": sign_bad,
        "free_coef_violation": v_free,
        "ok": bool(
            box <= 1e-9
            and equality <= 1e-6
            and v_zero == 0.0
            and v_bound == 0.0
            and sign_bad == 0.0
            and v_free <= tol
        ),
        "worst": worst,
    }


def _array_to_list(a: np.ndarray | None):
    return None if a is None else [list(map(float, row)) for row in np.atleast_2d(a)]


def save_model(model: FittedModel, path):
    """Serialize to a self-describing JSON record; round-trips bitwise."""
    record = {
        "family": model.family.value,
        "n_features": model.n_features,
        "b": model.b,
        "w": None if model.w is None else [float(v) for v in model.w],
        "support_vectors": _array_to_list(model.support_vectors),
        "dual_coef": None if model.dual_coef is None else [float(v) for v in model.dual_coef],
        "gamma": model.gamma,
        "converged": model.converged,
        "n_iter": model.n_iter,
        "worst_kkt_violation": model.worst_kkt_violation,
        "train_objective": model.train_objective,
        "hyperparams": model.hyperparams,
        "seed": model.seed,
        "layout": model.layout,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> FittedModel:
    with open(path, encoding="utf-8") as fh:
        record = json.load(fh)
    sv = record["support_vectors"]
    dual = record["dual_coef"]
    return FittedModel(
        family=ModelFamily(record["family"]),
        n_features=int(record["n_features"]),
        b=float(record["b"]),
        w=None if record["w"] is None else np.array(record["w"], dtype=np.float64),
        support_vectors=None if sv is None else np.array(sv, dtype=np.float64),
        dual_coef=None if dual is None else np.array(dual, dtype=np.float64),
        gamma=record["gamma"],
        converged=bool(record["converged"]),
        n_iter=int(record["n_iter"]),
        worst_kkt_violation=float(record["worst_kkt_violation"]),
        train_objective=record["train_objective"],
        hyperparams=record["hyperparams"],
        seed=record["seed"],
        layout=record["layout"],
    )
