"""Observation-probability models and inverse probability weights.

Convention: ``pi`` is the probability that the *second* element of a pair is
observed, given what is known at the first timepoint.  Complete pairs get
weight ``1 / (n * max(pi, floor))`` where ``n`` counts records with an
observed first element; first-only records get weight 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import skew

from .data import PairedDataset
from .errors import DegenerateLabels, PairMMDError, SeparationError


@dataclass(frozen=True)
class LogisticModel:
    coef: np.ndarray  # intercept first
    converged: bool
    n_iter: int
    # optional standardisation applied to raw features before the linear predictor
    keep: np.ndarray | None = None
    center: np.ndarray | None = None
    scale: np.ndarray | None = None

    def decision(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        X = X.reshape(-1, 1) if X.ndim == 1 else X
        if self.keep is not None:
            X = (X[:, self.keep] - self.center) / self.scale
        return self.coef[0] + X @ self.coef[1:]

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision(X))


def _deviance(X, y, beta, ridge):
    eta = X @ beta
    # log(1 + e^eta) computed stably
    ll = y @ eta - np.logaddexp(0.0, eta).sum()
    return -2.0 * ll + ridge * (beta[1:] @ beta[1:])


def fit_logistic(features, labels, ridge: float = 0.0, tol: float = 1e-8,
                 max_iter: int = 100) -> LogisticModel:
    """Ridge-penalised logistic regression by iteratively reweighted least squares.

    The intercept is added here and is not penalised.  Convergence means the
    largest coefficient change fell below ``tol``.
    """
    X = np.asarray(features, dtype=float)
    X = X.reshape(-1, 1) if X.ndim == 1 else X
    y = np.asarray(labels, dtype=float).ravel()
    n, p = X.shape
    if y.size != n:
        raise PairMMDError(f"{y.size} labels for {n} rows")
    if not np.all((y == 0) | (y == 1)):
        raise PairMMDError("labels must be 0 or 1")
    if y.min() == y.max():
        raise DegenerateLabels("labels contain a single class")
    if n < p + 1:
        raise PairMMDError(f"need at least {p + 1} rows for {p} features, got {n}")
    if ridge < 0:
        raise PairMMDError("ridge penalty must be nonnegative")

    Xd = np.hstack([np.ones((n, 1)), X])
    penalty = np.full(p + 1, ridge)
    penalty[0] = 0.0
    beta = np.zeros(p + 1)
    dev = _deviance(Xd, y, beta, ridge)
    for it in range(1, max_iter + 1):
        mu = expit(Xd @ beta)
        W = mu * (1.0 - mu)
        grad = Xd.T @ (y - mu) - penalty * beta
        hess = (Xd * W[:, None]).T @ Xd + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise SeparationError(
                "singular information matrix (separable data?); use a positive ridge") from None
        if not np.all(np.isfinite(step)):
            raise SeparationError("IRLS diverged; use a positive ridge")
        # halve the step until the penalised deviance does not increase
        t = 1.0
        while True:
            cand = beta + t * step
            cand_dev = _deviance(Xd, y, cand, ridge)
            if cand_dev <= dev + 1e-12 * abs(dev) or t < 1e-10:
                break
            t *= 0.5
        change = np.max(np.abs(cand - beta))
        beta, dev = cand, cand_dev
        if change < tol:
            return LogisticModel(coef=beta, converged=True, n_iter=it)
    raise SeparationError(
        f"IRLS did not converge in {max_iter} iterations (separable data?); use a positive ridge")


def _summaries(rows: np.ndarray, kind: str) -> np.ndarray:
    if kind != "quantile":
        return rows
    sd = rows.std(axis=1)
    sk = np.zeros(rows.shape[0])
    ok = sd > 0
    sk[ok] = skew(rows[ok], axis=1)
    return np.column_stack([rows.mean(axis=1), sd, sk])


def first_timepoint_features(ds: PairedDataset) -> np.ndarray:
    """Features for records with an observed first element (layout order).

    User covariates win; otherwise quantile observations are summarised by
    the mean, standard deviation and skewness of their values and Euclidean
    observations are used as they are.
    """
    if ds.covariates is not None:
        return np.asarray(ds.covariates, dtype=float)
    return _summaries(np.vstack([ds.x1_complete, ds.x1_only]), ds.kind)


def fit_observation_model(ds: PairedDataset, ridge: float = 1e-6) -> LogisticModel:
    """Logistic model for "second element observed" on standardised features."""
    X = first_timepoint_features(ds)
    y = np.r_[np.ones(ds.n1), np.zeros(ds.n2)]
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    keep = scale > 0
    Xs = (X[:, keep] - center[keep]) / scale[keep]
    model = fit_logistic(Xs, y, ridge=ridge)
    return LogisticModel(coef=model.coef, converged=model.converged, n_iter=model.n_iter,
                         keep=keep, center=center[keep], scale=scale[keep])


@dataclass(frozen=True)
class IpwWeights:
    weights: np.ndarray  # one per first-observed record, zeros where unobserved
    observed: np.ndarray  # bool flags, second element observed
    pi: np.ndarray  # clipped observation probabilities
    mode: str

    @property
    def complete(self) -> np.ndarray:
        return self.weights[self.observed]

    @property
    def total(self) -> float:
        return float(self.weights.sum())


MODES = ("raw", "self-normalized")


def ipw_from_probabilities(observed, pi_obs, pi_floor: float = 0.01,
                           mode: str = "raw") -> IpwWeights:
    """``observed / (n * max(pi_obs, pi_floor))``, optionally rescaled to sum 1."""
    obs = np.asarray(observed).astype(bool).ravel()
    pi = np.asarray(pi_obs, dtype=float).ravel()
    if obs.size != pi.size:
        raise PairMMDError("observed flags and probabilities differ in length")
    if not 0.0 < pi_floor < 0.5:
        raise PairMMDError(f"probability floor must lie in (0, 0.5), got {pi_floor}")
    if mode not in MODES:
        raise PairMMDError(f"unknown weight normalisation {mode!r}")
    if not obs.any():
        raise PairMMDError("no complete pairs to weight")
    clipped = np.maximum(pi, pi_floor)
    w = np.where(obs, 1.0 / (obs.size * clipped), 0.0)
    if mode == "self-normalized":
        w = w / w.sum()
    return IpwWeights(weights=w, observed=obs, pi=clipped, mode=mode)


def ipw_weights(ds: PairedDataset, model: LogisticModel | None, pi_floor: float = 0.01,
                mode: str = "raw") -> IpwWeights:
    """Weights for ``ds``'s first-observed records from a fitted observation model.

    ``model=None`` means nothing was seen to go missing, so ``pi`` is 1.
    """
    observed = np.r_[np.ones(ds.n1, dtype=bool), np.zeros(ds.n2, dtype=bool)]
    if model is None:
        pi = np.ones(observed.size)
    else:
        pi = model.predict_proba(first_timepoint_features(ds))
    return ipw_from_probabilities(observed, pi, pi_floor, mode)


def estimate_weights(ds: PairedDataset, pi_floor: float = 0.01, ridge: float = 1e-6,
                     mode: str = "raw") -> tuple[IpwWeights, LogisticModel | None]:
    if ds.n1 == 0:
        raise PairMMDError("no complete pairs")
    model = fit_observation_model(ds, ridge) if ds.n2 > 0 else None
    return ipw_weights(ds, model, pi_floor, mode), model
