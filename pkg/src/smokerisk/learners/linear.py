"""Linear baselines: weighted logistic regression and a linear SVM."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError
from .trees import FitConfig, _check_X, _check_xy, _sigmoid

DIVERGENCE_PATIENCE = 25


@dataclass(eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    kind: str  # "logistic" | "linear_svm"
    converged: bool = False
    n_iter: int = 0
    loss_history: list = field(default_factory=list)
    feature_names: list | None = None

    @property
    def n_features(self):
        return len(self.weights)

    def decision_function(self, X) -> np.ndarray:
        X = _check_X(X, self.n_features)
        return X @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        # SVM margins go through the same logistic link so AUC code can treat both alike
        return _sigmoid(self.decision_function(X))


def _sample_weights(cfg, y):
    return cfg.class_weights.sample_weights(y) if cfg.class_weights is not None else np.ones(len(y))


def _watch(history, patience):
    """True when the loss rose on each of the last ``patience`` steps."""
    if len(history) <= patience:
        return False
    tail = history[-(patience + 1):]
    return all(b > a for a, b in zip(tail, tail[1:]))


def fit_logreg(X, y, cfg: FitConfig | None = None, feature_names=None) -> LinearModel:
    """Full-batch gradient descent on weighted log-loss + (l2/2)|w|^2.

    The step is 1/L with L the Lipschitz bound of the gradient, so the loss
    decreases monotonically; stops when the loss changes by less than
    ``cfg.tol`` or after ``cfg.max_iter`` steps.
    """
    cfg = cfg or FitConfig()
    X, y = _check_xy(X, y)
    n, d = X.shape
    s = _sample_weights(cfg, y)
    s = s / s.sum()
    Xa = np.hstack([X, np.ones((n, 1))])
    # Hessian of the mean log-loss is bounded by 0.25 * Xa^T diag(s) Xa
    L = 0.25 * float(np.linalg.eigvalsh((Xa * s[:, None]).T @ Xa)[-1]) + cfg.l2
    step = 1.0 / L
    theta = np.zeros(d + 1)
    reg = np.r_[np.full(d, cfg.l2), 0.0]

    def loss_grad(th):
        z = Xa @ th
        loss = float(s @ (np.logaddexp(0.0, z) - y * z)) + 0.5 * float(reg @ (th * th))
        grad = Xa.T @ (s * (_sigmoid(z) - y)) + reg * th
        return loss, grad

    loss, grad = loss_grad(theta)
    history = [loss]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        theta = theta - step * grad
        new_loss, grad = loss_grad(theta)
        history.append(new_loss)
        if not math.isfinite(new_loss) or _watch(history, DIVERGENCE_PATIENCE):
            raise ConvergenceError(
                f"logistic regression diverged at iteration {it}: loss {history[-2]:.6g} -> {new_loss:.6g}, "
                f"step {step:.3g}"
            )
        if abs(loss - new_loss) < cfg.tol:
            converged = True
            break
        loss = new_loss
    return LinearModel(theta[:d].copy(), float(theta[d]), "logistic", converged, it, history,
                       list(feature_names) if feature_names is not None else None)


def fit_linear_svm(X, y, cfg: FitConfig | None = None, feature_names=None) -> LinearModel:
    """Sub-gradient descent on weighted hinge loss + (l2/2)|w|^2.

    Steps shrink as eta0/sqrt(t); the best iterate seen is returned.
    """
    cfg = cfg or FitConfig()
    X, y = _check_xy(X, y)
    n, d = X.shape
    s = _sample_weights(cfg, y)
    s = s / s.sum()
    ys = 2.0 * y - 1.0
    Xa = np.hstack([X, np.ones((n, 1))])
    reg = np.r_[np.full(d, max(cfg.l2, 1e-8)), 0.0]
    theta = np.zeros(d + 1)
    scale = float(np.sqrt(np.max(np.sum(Xa * Xa, axis=1))))
    eta0 = 1.0 / max(scale, 1e-12)

    def objective(th):
        margin = ys * (Xa @ th)
        return float(s @ np.maximum(0.0, 1.0 - margin)) + 0.5 * float(reg @ (th * th)), margin

    loss, margin = objective(theta)
    best, best_theta = loss, theta.copy()
    history = [loss]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        active = margin < 1.0
        grad = -(Xa[active].T @ (s[active] * ys[active])) + reg * theta
        theta = theta - (eta0 / math.sqrt(it)) * grad
        new_loss, margin = objective(theta)
        history.append(new_loss)
        if not math.isfinite(new_loss) or _watch(history, DIVERGENCE_PATIENCE):
            raise ConvergenceError(
                f"linear SVM diverged at iteration {it}: loss {history[-2]:.6g} -> {new_loss:.6g}"
            )
        if new_loss < best:
            best, best_theta = new_loss, theta.copy()
        if abs(loss - new_loss) < cfg.tol:
            converged = True
            break
        loss = new_loss
    return LinearModel(best_theta[:d].copy(), float(best_theta[d]), "linear_svm", converged, it, history,
                       list(feature_names) if feature_names is not None else None)

