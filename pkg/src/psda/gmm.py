"""Seeded, deterministic Gaussian mixture fitting by EM.

Diagonal or spherical covariances only: the clustering stages operate in
POS-augmented spaces of several hundred dimensions, where full covariance
is ill-conditioned at the sample sizes involved.  Responsibilities are
computed in the log domain (log-sum-exp) so high-dimensional densities do
not underflow, and variances are floored so duplicated points cannot
produce singular components.

Everything is a pure function of (points, config); the same seed yields a
bit-identical model.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatchError, TooFewPointsError
from .util import require_finite

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GmmConfig:
    k: int
    covariance: str = "diagonal"
    max_iter: int = 200
    tol: float = 1e-6
    cov_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.covariance not in ("diagonal", "spherical"):
            raise ValueError(f"covariance must be diagonal or spherical, got {self.covariance!r}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.cov_floor <= 0:
            raise ValueError("cov_floor must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def with_k(self, k: int) -> "GmmConfig":
        return GmmConfig(
            k=k,
            covariance=self.covariance,
            max_iter=self.max_iter,
            tol=self.tol,
            cov_floor=self.cov_floor,
            seed=self.seed,
        )


@dataclass
class GmmModel:
    """Fitted mixture: per-component means/variances/weights plus the hard
    assignment of every training point."""

    means: np.ndarray            # (k, d)
    variances: np.ndarray        # (k, d) diagonal or (k,) spherical
    mixing_weights: np.ndarray   # (k,)
    assignments: np.ndarray      # (n,) int
    log_likelihood_trace: list[float] = field(default_factory=list)
    covariance: str = "diagonal"

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _check_points(points: np.ndarray, k: int) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DimensionMismatchError(f"points must be 2-D, got shape {points.shape}")
    n = points.shape[0]
    if n < k:
        raise TooFewPointsError(f"{n} points cannot support {k} components")
    require_finite(points, "points")
    return points


def _kmeanspp_centers(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: D^2-weighted draws over point indices."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def seed_initialization(points: np.ndarray, cfg: GmmConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic initial (means, variances, mixing_weights).

    Means come from k-means++ seeding, mixing weights start uniform, and
    variances start at the global per-dimension variance (its mean, for
    spherical), floored.  Exposed so reference implementations can run
    from the identical starting point.
    """
    points = _check_points(points, cfg.k)
    rng = np.random.default_rng(cfg.seed)
    means = _kmeanspp_centers(points, cfg.k, rng)
    global_var = np.maximum(points.var(axis=0), cfg.cov_floor)
    if cfg.covariance == "diagonal":
        variances = np.tile(global_var, (cfg.k, 1))
    else:
        variances = np.full(cfg.k, max(float(global_var.mean()), cfg.cov_floor))
    weights = np.full(cfg.k, 1.0 / cfg.k)
    return means, variances, weights


def _log_density(points, means, variances, covariance):
    """Per-component log Gaussian densities, shape (n, k)."""
    n, d = points.shape
    k = means.shape[0]
    out = np.empty((n, k))
    for c in range(k):
        var = variances[c] if covariance == "diagonal" else np.full(d, variances[c])
        diff2 = (points - means[c]) ** 2
        out[:, c] = -0.5 * (d * _LOG_2PI + np.log(var).sum() + (diff2 / var).sum(axis=1))
    return out


def _log_responsibilities(points, means, variances, weights, covariance):
    with np.errstate(divide="ignore"):
        log_weights = np.log(weights)
    log_joint = _log_density(points, means, variances, covariance) + log_weights
    norm = logsumexp(log_joint, axis=1)
    return log_joint - norm[:, None], norm


def responsibilities(model: GmmModel, points: np.ndarray) -> np.ndarray:
    """Row-stochastic (n, k) responsibility matrix for ``points``."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[1] != model.dim:
        raise DimensionMismatchError(
            f"points have dim {points.shape[1]}, model expects {model.dim}"
        )
    log_resp, _ = _log_responsibilities(
        points, model.means, model.variances, model.mixing_weights, model.covariance
    )
    return np.exp(log_resp)


def gmm_fit(points, cfg: GmmConfig) -> GmmModel:
    """Run EM from the seeded initialization until ``tol`` or ``max_iter``.

    The log-likelihood trace is non-decreasing (up to float slack); the
    variance floor is part of the M-step's constrained maximization, so
    monotonicity survives flooring.
    """
    points = _check_points(points, cfg.k)
    n, _ = points.shape
    means, variances, weights = seed_initialization(points, cfg)

    trace: list[float] = []
    log_resp = None
    converged = False
    for _ in range(cfg.max_iter):
        log_resp, norm = _log_responsibilities(points, means, variances, weights, cfg.covariance)
        ll = float(norm.sum())
        trace.append(ll)
        if len(trace) >= 2 and trace[-1] - trace[-2] < cfg.tol:
            converged = True
            break
        resp = np.exp(log_resp)
        counts = resp.sum(axis=0)
        safe_counts = np.maximum(counts, np.finfo(np.float64).tiny)
        weights = counts / n
        means = (resp.T @ points) / safe_counts[:, None]
        new_vars = np.empty_like(variances)
        for c in range(cfg.k):
            # centered second moment, the constrained M-step argmax
            sq = resp[:, c] @ (points - means[c]) ** 2 / safe_counts[c]
            if cfg.covariance == "diagonal":
                new_vars[c] = np.maximum(sq, cfg.cov_floor)
            else:
                new_vars[c] = max(float(sq.mean()), cfg.cov_floor)
        variances = new_vars
    if not converged:
        # refresh so assignments reflect the final parameters
        log_resp, norm = _log_responsibilities(points, means, variances, weights, cfg.covariance)
        trace.append(float(norm.sum()))

    assignments = np.argmax(log_resp, axis=1)
    return GmmModel(
        means=means,
        variances=variances,
        mixing_weights=weights,
        assignments=assignments,
        log_likelihood_trace=trace,
        covariance=cfg.covariance,
    )


def gmm_predict(model: GmmModel, point: np.ndarray) -> int:
    """Component with the highest responsibility; ties go to the lowest
    index (argmax convention)."""
    point = np.asarray(point, dtype=np.float64)
    if point.shape != (model.dim,):
        raise DimensionMismatchError(f"point has shape {point.shape}, model expects ({model.dim},)")
    log_resp, _ = _log_responsibilities(
        point[None, :], model.means, model.variances, model.mixing_weights, model.covariance
    )
    return int(np.argmax(log_resp[0]))
