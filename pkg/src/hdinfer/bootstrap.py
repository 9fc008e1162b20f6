"""Gaussian bootstrap of the debiased Lasso, percentile intervals and DDB."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfidenceInterval, RegressionData, SeedSpec, gaussian_stream
from .debias import DebiasArtifacts, DebiasedEstimate, plugin_halfwidth
from .errors import EmptyDraws, InvalidAlpha, TooManyRefitFailures, ZeroSigma
from .lasso import LassoFit, SolverConfig, _solve

# fraction of bootstrap refits allowed to fail before the distribution is rejected
MAX_FAILURE_RATE = 0.2


@dataclass(frozen=True)
class BootstrapDistribution:
    """Draws of ``beta*_j^(DB) - beta_hat_j`` for one coordinate."""

    j: int
    draws: np.ndarray
    B: int
    seed: SeedSpec
    refit_failures: int = 0

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=np.float64)
        if draws.shape[0] != self.B - self.refit_failures:
            raise ValueError("draw count must equal B - refit_failures")
        if draws.shape[0] < (1 - MAX_FAILURE_RATE) * self.B:
            raise TooManyRefitFailures(
                f"{self.refit_failures} of {self.B} bootstrap refits failed"
            )
        if not np.isfinite(draws).all():
            raise ValueError("bootstrap draws must be finite")
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)


@dataclass(frozen=True)
class PivotValues:
    R_j: float
    R_j_ddb: float
    scale: float


def bootstrap_debiased_many(
    data: RegressionData,
    fit: LassoFit,
    sigma_hat: float,
    arts: Sequence[DebiasArtifacts],
    B: int,
    seed: SeedSpec,
    config: SolverConfig = SolverConfig(),
) -> list[BootstrapDistribution]:
    """Bootstrap distributions for several coordinates from one set of refits.

    Draw b uses ``gaussian_stream(seed.child(b), n)`` and does not depend on
    the coordinate, so each refit of the Lasso serves every entry of ``arts``
    and the result for one coordinate equals a single-coordinate run.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    if sigma_hat < 0:
        raise ValueError("sigma_hat must be nonnegative")
    X, n = data.X, data.n
    colsq = np.einsum("ij,ij->j", X, X) / n
    mean = X @ fit.beta_hat
    idx = np.array([a.j for a in arts], dtype=np.intp)
    zs = [a.z for a in arts]
    denom = np.array([a.denom for a in arts])

    ok = np.zeros(B, dtype=bool)
    out = np.empty((B, len(arts)))
    for b in range(B):
        y_star = mean + sigma_hat * gaussian_stream(seed.child(b), n)
        beta_star, gap, _, _ = _solve(
            X, y_star, fit.lam, config, beta0=fit.beta_hat, colsq=colsq
        )
        if gap > config.kkt_tol:
            continue
        ok[b] = True
        resid = y_star - X @ beta_star
        # per-coordinate dot products keep each column bit-identical to a
        # single-coordinate run (a matrix product may round differently)
        corr = np.array([resid @ z for z in zs])
        out[b] = beta_star[idx] + corr / denom - fit.beta_hat[idx]
    failures = int(B - ok.sum())
    if failures > MAX_FAILURE_RATE * B:
        raise TooManyRefitFailures(f"{failures} of {B} bootstrap refits failed")
    kept = out[ok]
    return [
        BootstrapDistribution(a.j, kept[:, k].copy(), B, seed, failures)
        for k, a in enumerate(arts)
    ]


def bootstrap_debiased(
    data: RegressionData,
    fit: LassoFit,
    sigma_hat: float,
    art: DebiasArtifacts,
    B: int,
    seed: SeedSpec,
    config: SolverConfig = SolverConfig(),
) -> BootstrapDistribution:
    """Gaussian residual bootstrap of the debiased estimator for ``art.j``.

    Responses are ``X beta_hat + sigma_hat * xi`` with xi standard normal; the
    Lasso is refit at the original penalty and debiased with the original
    direction ``z_j``.
    """
    return bootstrap_debiased_many(data, fit, sigma_hat, [art], B, seed, config)[0]


def empirical_quantile(draws, alpha: float) -> float:
    """Order statistic of rank ``ceil(alpha * m)``, clamped to ``[1, m]``."""
    draws = np.asarray(draws, dtype=np.float64)
    m = draws.shape[0]
    if m == 0:
        raise EmptyDraws("no bootstrap draws")
    if not 0 < alpha < 1:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    # round first so e.g. 0.05 * 100 is rank 5, not 6
    rank = math.ceil(round(alpha * m, 9))
    rank = min(max(rank, 1), m)
    return float(np.partition(draws, rank - 1)[rank - 1])


def lower_median(draws) -> float:
    draws = np.asarray(draws, dtype=np.float64)
    m = draws.shape[0]
    if m == 0:
        raise EmptyDraws("no bootstrap draws")
    k = (m - 1) // 2
    return float(np.partition(draws, k)[k])


def percentile_ci(
    beta_db: float, dist: BootstrapDistribution, level: float = 0.95
) -> ConfidenceInterval:
    """``(beta_db - q_{1-a/2}, beta_db - q_{a/2})`` of the bootstrap draws."""
    if not 0 < level < 1:
        raise InvalidAlpha(f"level must lie in (0, 1), got {level}")
    alpha = 1 - level
    hi = empirical_quantile(dist.draws, 1 - alpha / 2)
    lo = empirical_quantile(dist.draws, alpha / 2)
    return ConfidenceInterval(dist.j, beta_db - hi, beta_db - lo, level, "BS-DB")


def ddb_estimate(beta_db: float, dist: BootstrapDistribution) -> float:
    """Double-debiased estimate: ``beta_db`` minus the bootstrap median."""
    return beta_db - lower_median(dist.draws)


def ddb_plugin_ci(
    ddb: float, art: DebiasArtifacts, sigma_hat: float, level: float = 0.95
) -> ConfidenceInterval:
    """Normal interval around the DDB estimate (its pivot is asymptotically N(0,1))."""
    h = plugin_halfwidth(art, sigma_hat, 1 - level)
    return ConfidenceInterval(art.j, ddb - h, ddb + h, level, "DDB-plug-in")


def pivots(
    est: DebiasedEstimate,
    ddb: float,
    art: DebiasArtifacts,
    sigma_hat: float,
    beta_true_j: float,
) -> PivotValues:
    """Standardized errors of the debiased and double-debiased estimates."""
    if not sigma_hat > 0:
        raise ZeroSigma("R_j^(DDB) needs sigma_hat > 0")
    scale = art.scale
    return PivotValues(
        R_j=scale * (est.beta_db - beta_true_j),
        R_j_ddb=scale / sigma_hat * (ddb - beta_true_j),
        scale=scale,
    )
