"""L2-regularized logistic regression and linear SVM trained by full-batch descent.

Inputs are converted to CSR with an appended all-ones column carrying the bias,
so dense and sparse inputs follow the same arithmetic path. The bias row of the
weight matrix is excluded from the L2 penalty.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

LOGISTIC = "logistic"
SVM = "svm"

# keeps probabilities strictly inside (0, 1) when the margin saturates expit
_PROBA_EPS = 2.0**-50


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message if epoch is None else f"{message} (epoch {epoch})")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings shared by the linear learners.

    ``l2_lambda=None`` resolves to ``1 / n_rows`` at training time, the
    mean-loss equivalent of an inverse regularization strength of 1.
    """

    learning_rate: float = 1.0
    max_epochs: int = 300
    l2_lambda: float | None = None
    tolerance: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.l2_lambda is not None and not self.l2_lambda >= 0:
            raise ValueError(f"l2_lambda must be >= 0, got {self.l2_lambda}")
        if int(self.max_epochs) != self.max_epochs or self.max_epochs < 0:
            raise ValueError(f"max_epochs must be a non-negative integer, got {self.max_epochs}")

    def resolved_lambda(self, n_rows: int) -> float:
        return 1.0 / n_rows if self.l2_lambda is None else float(self.l2_lambda)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    kind: str = LOGISTIC

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        if self.kind not in (LOGISTIC, SVM):
            raise ValueError(f"unknown linear model kind {self.kind!r}")
        if not (np.all(np.isfinite(w)) and math.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")

    @property
    def n_features(self) -> int:
        return len(self.weights)


# ---------------------------------------------------------------- helpers


def as_csr(X) -> sp.csr_matrix:
    m = sp.csr_matrix(X, dtype=np.float64)
    m.sort_indices()
    return m


def with_bias_column(X) -> sp.csr_matrix:
    X = as_csr(X)
    ones = sp.csr_matrix(np.ones((X.shape[0], 1)))
    out = sp.hstack([X, ones], format="csr")
    out.sort_indices()
    return out


def _binary_target(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("targets must be binary 0/1")
    if y.min() == y.max():
        raise TrainingError("training labels contain a single class")
    return y


def smoothness_bound(Xa: sp.csr_matrix, n_iter: int = 60) -> float:
    """Estimate 0.25 * lambda_max(Xa^T Xa / n), the logistic-loss gradient Lipschitz constant."""
    n = Xa.shape[0]
    v = np.ones(Xa.shape[1]) / math.sqrt(Xa.shape[1])
    lam = 0.0
    for _ in range(n_iter):
        u = Xa.T @ (Xa @ v)
        norm = float(np.linalg.norm(u))
        if norm == 0.0:
            return 0.0
        lam = norm
        v = u / norm
    return 0.25 * lam / n


def _logistic_gradient(Xa, XaT, Wa, Y, lam, reg_mask):
    """Gradient of mean log-loss + lam/2 * ||W||^2 for a block of models."""
    n = Xa.shape[0]
    Z = Xa @ Wa
    R = (expit(Z) - Y) / n
    G = XaT @ R + lam * (Wa * reg_mask)
    return Z, G


def _logistic_loss(Z, Y, Wa, lam, reg_mask):
    data = np.mean(np.logaddexp(0.0, Z) - Y * Z, axis=0)
    return data + 0.5 * lam * np.sum((Wa * reg_mask) ** 2, axis=0)


def logistic_objective(weights, bias, X, y, l2_lambda):
    """Return ``(loss, grad_weights, grad_bias)`` of the regularized logistic objective."""
    Xa = with_bias_column(X)
    Y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    Wa = np.append(np.asarray(weights, dtype=np.float64), float(bias)).reshape(-1, 1)
    reg_mask = np.ones_like(Wa)
    reg_mask[-1] = 0.0
    Z, G = _logistic_gradient(Xa, Xa.T.tocsr(), Wa, Y, l2_lambda, reg_mask)
    loss = _logistic_loss(Z, Y, Wa, l2_lambda, reg_mask)
    return float(loss[0]), G[:-1, 0].copy(), float(G[-1, 0])


def fit_logistic_block(Xa, Y, cfg: TrainConfig, weight_mask=None, step=None):
    """Fit ``Y.shape[1]`` independent logistic models sharing the design ``Xa``.

    ``Xa`` must already carry the bias column. ``weight_mask`` (same shape as
    the weight block) pins masked weights at zero, which is how a column is
    excluded from its own propensity model. Each model stops independently once
    its gradient infinity-norm drops below ``cfg.tolerance``.

    Returns ``(weights, epochs_run)`` with weights of shape ``(d + 1, k)``.
    """
    n, d1 = Xa.shape
    Y = np.asarray(Y, dtype=np.float64)
    k = Y.shape[1]
    lam = cfg.resolved_lambda(n)
    XaT = Xa.T.tocsr()
    XaT.sort_indices()
    if step is None:
        step = min(cfg.learning_rate, 1.0 / (smoothness_bound(Xa) + lam))
    reg_mask = np.ones((d1, 1))
    reg_mask[-1] = 0.0
    free = np.ones((d1, k)) if weight_mask is None else np.asarray(weight_mask, dtype=np.float64)

    W = np.zeros((d1, k))
    epochs = np.zeros(k, dtype=np.int64)
    active = np.arange(k)
    for epoch in range(1, int(cfg.max_epochs) + 1):
        Wa = W[:, active]
        Ya = Y[:, active]
        Z, G = _logistic_gradient(Xa, XaT, Wa, Ya, lam, reg_mask)
        G *= free[:, active]
        loss = _logistic_loss(Z, Ya, Wa, lam, reg_mask)
        if not np.all(np.isfinite(loss)):
            bad = int(active[np.flatnonzero(~np.isfinite(loss))[0]])
            raise TrainingError(f"non-finite loss in model {bad}", epoch=epoch)
        gnorm = np.abs(G).max(axis=0)
        still = gnorm >= cfg.tolerance
        if not still.any():
            break
        moving = active[still]
        W[:, moving] -= step * G[:, still]
        epochs[moving] = epoch
        active = moving
    return W, epochs


def train_logreg(X, y, cfg: TrainConfig | None = None) -> LinearModel:
    cfg = cfg or TrainConfig()
    y = _binary_target(y)
    Xa = with_bias_column(X)
    if Xa.shape[0] != len(y):
        raise ValueError("row count does not match label count")
    if len(y) < 2:
        raise TrainingError("need at least two rows")
    W, _ = fit_logistic_block(Xa, y.reshape(-1, 1), cfg)
    return LinearModel(W[:-1, 0].copy(), float(W[-1, 0]), LOGISTIC)


def train_linear_svm(X, y, cfg: TrainConfig | None = None) -> LinearModel:
    """Mean hinge loss + lam/2 * ||w||^2 by subgradient descent, step lr / sqrt(epoch)."""
    cfg = cfg or TrainConfig()
    y = _binary_target(y)
    signed = 2.0 * y - 1.0
    Xa = with_bias_column(X)
    XaT = Xa.T.tocsr()
    n, d1 = Xa.shape
    if n != len(y):
        raise ValueError("row count does not match label count")
    lam = cfg.resolved_lambda(n)
    reg_mask = np.ones(d1)
    reg_mask[-1] = 0.0
    W = np.zeros(d1)
    for epoch in range(1, int(cfg.max_epochs) + 1):
        margins = signed * (Xa @ W)
        viol = (margins < 1.0).astype(np.float64)
        G = -(XaT @ (signed * viol)) / n + lam * W * reg_mask
        loss = np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * lam * np.sum((W * reg_mask) ** 2)
        if not (np.isfinite(loss) and np.all(np.isfinite(G))):
            raise TrainingError("non-finite hinge objective", epoch=epoch)
        if np.abs(G).max() < cfg.tolerance:
            break
        W -= cfg.learning_rate / math.sqrt(epoch) * G
    return LinearModel(W[:-1].copy(), float(W[-1]), SVM)


def hinge_objective(weights, bias, X, y, l2_lambda):
    """Return ``(loss, subgrad_weights, subgrad_bias)`` of the regularized hinge objective."""
    Xa = with_bias_column(X)
    signed = 2.0 * np.asarray(y, dtype=np.float64) - 1.0
    W = np.append(np.asarray(weights, dtype=np.float64), float(bias))
    n = Xa.shape[0]
    margins = signed * (Xa @ W)
    viol = (margins < 1.0).astype(np.float64)
    G = -(Xa.T @ (signed * viol)) / n
    G[:-1] += l2_lambda * W[:-1]
    loss = np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * l2_lambda * np.sum(W[:-1] ** 2)
    return float(loss), G[:-1].copy(), float(G[-1])


# ---------------------------------------------------------------- prediction


def _rows(model: LinearModel, x):
    if sp.issparse(x):
        X = as_csr(x)
    else:
        X = np.asarray(x, dtype=np.float64)
        if X.ndim == 1:
            if X.shape[0] != model.n_features:
                raise ValueError(
                    f"dimension mismatch: model has {model.n_features} weights, row has {X.shape[0]}"
                )
            return None, X
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"dimension mismatch: model has {model.n_features} weights, input has {X.shape[1]}"
        )
    return X, None


def decision_function(model: LinearModel, x):
    """Margin ``weights . x + bias`` for one row (scalar) or a matrix of rows (vector)."""
    X, row = _rows(model, x)
    if row is not None:
        return float(row @ model.weights + model.bias)
    return np.asarray(X @ model.weights).reshape(-1) + model.bias


def predict_proba(model: LinearModel, x):
    """Logistic probability for one row (scalar) or a matrix of rows (vector)."""
    if model.kind != LOGISTIC:
        raise ValueError("predict_proba requires a logistic model; use decision_function for svm")
    margin = decision_function(model, x)
    p = np.clip(expit(margin), _PROBA_EPS, 1.0 - _PROBA_EPS)
    return float(p) if np.isscalar(margin) else p
