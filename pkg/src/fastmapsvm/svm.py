"""Binary soft-margin kernel SVM trained with SMO, plus cross-validated grid search.

The dual ``min 1/2 a'Qa - e'a  s.t.  0 <= a <= C, y'a = 0`` is solved by
pairwise analytic updates. The working pair is the maximal violating index
``i`` with a second-order choice of ``j``; training stops when the KKT gap
``m(a) - M(a)`` drops below ``tol``.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

SV_THRESHOLD = 1e-8
_TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not (self.gamma is not None and self.gamma > 0):
            raise ValueError("rbf kernel needs gamma > 0")


def resolve_gamma(gamma, X) -> float:
    """``"scale"`` means ``1 / (n_features * X.var())``."""
    if gamma == "scale":
        X = np.asarray(X, dtype=np.float64)
        var = X.var()
        return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
    return float(gamma)


def kernel_matrix(spec: KernelSpec, X, Y) -> np.ndarray:
    """Kernel between every row of X and every row of Y.

    Each entry is computed independently of the others, so a row's value
    does not depend on how many rows are evaluated together.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if spec.kind == "linear":
        return np.sum(X[:, None, :] * Y[None, :, :], axis=-1)
    diff = X[:, None, :] - Y[None, :, :]
    return np.exp(-spec.gamma * np.sum(diff * diff, axis=-1))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    return float(kernel_matrix(spec, np.atleast_1d(x)[None], np.atleast_1d(y)[None])[0, 0])


@dataclass
class SVMModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray  # alpha_i * y_i
    bias: float
    kernel: KernelSpec
    C: float
    support: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    n_iter: int = 0
    converged: bool = True

    @property
    def ndim(self) -> int:
        return self.support_vectors.shape[1]


def decision_function(model: SVMModel, X) -> np.ndarray | float:
    """Signed score ``sum_i coef_i K(sv_i, x) + bias``. Scalar for a single point."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    if X2.shape[1] != model.ndim:
        raise ValueError(f"dimension mismatch: model has {model.ndim}, got {X2.shape[1]}")
    Kx = kernel_matrix(model.kernel, X2, model.support_vectors)
    out = np.sum(Kx * model.dual_coefs[None, :], axis=1) + model.bias
    return float(out[0]) if single else out


def predict_label(model: SVMModel, X) -> np.ndarray:
    """Labels in {-1, +1}; a score of exactly 0 maps to -1."""
    return np.where(np.atleast_1d(decision_function(model, X)) > 0, 1, -1)


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite features")
    if not np.all(np.isin(y, (-1, 1))):
        raise ValueError("labels must be -1 or +1")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise ValueError("both classes required")
    return X, y.astype(np.float64)


def train_svm(
    X,
    y,
    C: float = 1.0,
    kernel: KernelSpec | None = None,
    tol: float = 1e-3,
    max_iter: int = 1_000_000,
    objective_trace: list | None = None,
) -> SVMModel:
    """Train a soft-margin SVM.

    Parameters
    ----------
    X : array, shape (n, d)
    y : array of {-1, +1}
    C : float
        Box constraint.
    kernel : KernelSpec
        Defaults to linear.
    tol : float
        Stopping tolerance on the maximal KKT violation.
    objective_trace : list, optional
        If given, the dual objective (to be maximized) is appended after
        every update.
    """
    X, y = _check_xy(X, y)
    if not C > 0:
        raise ValueError("C must be positive")
    kernel = kernel or KernelSpec("linear")
    n = len(y)
    K = kernel_matrix(kernel, X, X)
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)

    it = 0
    converged = False
    while it < max_iter:
        neg_yg = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, neg_yg, -np.inf)))
        m_up = neg_yg[i]
        m_low = np.min(np.where(low, neg_yg, np.inf))
        if m_up - m_low < tol:
            converged = True
            break
        # Second-order choice of j among violating partners of i.
        b = m_up - neg_yg
        cand = low & (b > 0)
        a = QD[i] + QD - 2.0 * y[i] * y * Q[i]
        a = np.where(a > 0, a, _TAU)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))

        ai_old, aj_old = alpha[i], alpha[j]
        _update_pair(alpha, G, Q, QD, y, C, i, j)
        dai, daj = alpha[i] - ai_old, alpha[j] - aj_old
        G += Q[i] * dai + Q[j] * daj
        it += 1
        if objective_trace is not None:
            objective_trace.append(-0.5 * float(alpha @ (G - 1.0)))

    if not converged:
        log.warning("SMO stopped at max_iter=%d before reaching tol=%g", max_iter, tol)

    bias = _bias(alpha, G, y, C)
    sv = np.flatnonzero(alpha > SV_THRESHOLD)
    return SVMModel(
        support_vectors=X[sv].copy(),
        dual_coefs=(alpha * y)[sv],
        bias=bias,
        kernel=kernel,
        C=float(C),
        support=sv.astype(np.int64),
        n_iter=it,
        converged=converged,
    )


def _update_pair(alpha, G, Q, QD, y, C, i, j):
    """Analytic two-variable update with clipping to the box (in place on alpha)."""
    if y[i] != y[j]:
        quad = QD[i] + QD[j] + 2.0 * Q[i, j]
        if quad <= 0:
            quad = _TAU
        delta = (-G[i] - G[j]) / quad
        diff = alpha[i] - alpha[j]
        alpha[i] += delta
        alpha[j] += delta
        if diff > 0:
            if alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = diff
        elif alpha[i] < 0:
            alpha[i] = 0.0
            alpha[j] = -diff
        if diff > 0:
            if alpha[i] > C:
                alpha[i] = C
                alpha[j] = C - diff
        elif alpha[j] > C:
            alpha[j] = C
            alpha[i] = C + diff
    else:
        quad = QD[i] + QD[j] - 2.0 * Q[i, j]
        if quad <= 0:
            quad = _TAU
        delta = (G[i] - G[j]) / quad
        total = alpha[i] + alpha[j]
        alpha[i] -= delta
        alpha[j] += delta
        if total > C:
            if alpha[i] > C:
                alpha[i] = C
                alpha[j] = total - C
        elif alpha[j] < 0:
            alpha[j] = 0.0
            alpha[i] = total
        if total > C:
            if alpha[j] > C:
                alpha[j] = C
                alpha[i] = total - C
        elif alpha[i] < 0:
            alpha[i] = 0.0
            alpha[j] = total


def _bias(alpha, G, y, C) -> float:
    yG = y * G
    free = (alpha > SV_THRESHOLD) & (alpha < C - SV_THRESHOLD)
    if free.any():
        rho = float(np.mean(yG[free]))
    else:
        ub, lb = np.inf, -np.inf
        at_upper = alpha >= C - SV_THRESHOLD
        at_lower = ~at_upper
        for mask, is_upper in ((at_upper, True), (at_lower, False)):
            pos = mask & (y > 0)
            neg = mask & (y < 0)
            # at upper bound: y=+1 gives a lower bound on rho, y=-1 an upper one
            if is_upper:
                lb = max(lb, yG[pos].max(initial=-np.inf))
                ub = min(ub, yG[neg].min(initial=np.inf))
            else:
                ub = min(ub, yG[pos].min(initial=np.inf))
                lb = max(lb, yG[neg].max(initial=-np.inf))
        rho = 0.5 * (ub + lb)
    return -rho


def dual_objective(model_alpha: np.ndarray, X, y, kernel: KernelSpec) -> float:
    """``sum a - 1/2 sum_ij a_i a_j y_i y_j K_ij``."""
    y = np.asarray(y, dtype=np.float64)
    K = kernel_matrix(kernel, X, X)
    v = model_alpha * y
    return float(model_alpha.sum() - 0.5 * v @ K @ v)


def full_alpha(model: SVMModel, n: int) -> np.ndarray:
    """Multipliers for all n training points (zero off the support)."""
    alpha = np.zeros(n)
    alpha[model.support] = np.abs(model.dual_coefs)
    return alpha


def kkt_violations(model: SVMModel, X, y) -> np.ndarray:
    """Per-point KKT residual on the training data (0 when satisfied).

    alpha = 0 needs y f >= 1; 0 < alpha < C needs y f = 1; alpha = C needs y f <= 1.
    """
    y = np.asarray(y, dtype=np.float64)
    margin = y * decision_function(model, X) - 1.0
    alpha = full_alpha(model, len(y))
    at_zero = alpha <= SV_THRESHOLD
    at_c = alpha >= model.C - SV_THRESHOLD
    free = ~at_zero & ~at_c
    out = np.zeros(len(y))
    out[at_zero] = np.maximum(0.0, -margin[at_zero])
    out[at_c] = np.maximum(0.0, margin[at_c])
    out[free] = np.abs(margin[free])
    return out


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------

DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)
DEFAULT_GAMMA_GRID = ("scale", 0.01, 0.1, 1.0)


@dataclass
class GridSearchConfig:
    C_grid: Sequence[float] = DEFAULT_C_GRID
    gamma_grid: Sequence = DEFAULT_GAMMA_GRID
    folds: int = 5
    seed: int = 0
    scoring: str = "f1"

    def __post_init__(self):
        if not self.C_grid or not self.gamma_grid:
            raise ValueError("grids must be non-empty")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        for c in self.C_grid:
            if not c > 0:
                raise ValueError("C values must be positive")
        for g in self.gamma_grid:
            if g != "scale" and not float(g) > 0:
                raise ValueError("gamma values must be positive or 'scale'")


@dataclass
class GridSearchResult:
    best_C: float
    best_gamma: object
    scores: dict  # (C, gamma) -> mean validation score


def stratified_folds(y, folds: int, seed: int) -> np.ndarray:
    """Fold index per sample; each class is shuffled then dealt round-robin."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    assign = np.empty(len(y), dtype=np.int64)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < folds:
            raise ValueError(
                f"fold construction impossible: class {c} has {len(idx)} samples for {folds} folds"
            )
        idx = idx[rng.permutation(len(idx))]
        assign[idx] = np.arange(len(idx)) % folds
    return assign


def _score(y_true, y_pred, scoring: str) -> float:
    from .metrics import classification_metrics, confusion_matrix

    m = classification_metrics(confusion_matrix(y_true > 0, y_pred > 0))
    try:
        return getattr(m, scoring)
    except AttributeError:
        raise ValueError(f"unknown scoring metric {scoring!r}") from None


def grid_search(X, y, config: GridSearchConfig | None = None, kernel_kind: str = "rbf") -> GridSearchResult:
    """Stratified k-fold CV over the (C, gamma) grid.

    The best cell maximizes mean validation score; ties go to the smaller C,
    then the smaller gamma (``"scale"`` ranked by its value on the full X).
    For a linear kernel gamma is ignored and reported as None.
    """
    config = config or GridSearchConfig()
    X, yf = _check_xy(X, y)
    folds = stratified_folds(yf, config.folds, config.seed)
    gammas = list(config.gamma_grid) if kernel_kind == "rbf" else [None]

    scores = {}
    for C, gamma in itertools.product(config.C_grid, gammas):
        fold_scores = []
        for f in range(config.folds):
            tr, va = folds != f, folds == f
            if kernel_kind == "rbf":
                spec = KernelSpec("rbf", resolve_gamma(gamma, X[tr]))
            else:
                spec = KernelSpec("linear")
            model = train_svm(X[tr], yf[tr], C, spec)
            fold_scores.append(_score(yf[va], predict_label(model, X[va]), config.scoring))
        scores[(float(C), gamma)] = float(np.mean(fold_scores))

    def rank(cell):
        C, gamma = cell
        g = 0.0 if gamma is None else resolve_gamma(gamma, X)
        return (-scores[cell], C, g)

    best_C, best_gamma = min(scores, key=rank)
    return GridSearchResult(best_C, best_gamma, scores)
