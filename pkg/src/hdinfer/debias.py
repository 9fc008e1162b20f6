"""Nodewise debiasing direction, noise variance and the debiased estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .core import ConfidenceInterval, RegressionData
from .errors import DegenerateDirection, InvalidAlpha, SaturatedFit
from .lasso import LassoFit, SolverConfig, _solve

# z_j^T x_j below this multiple of n refuses inference for coordinate j
DENOM_RTOL = 1e-8


@dataclass(frozen=True)
class DebiasArtifacts:
    j: int
    z: np.ndarray
    gamma_hat: np.ndarray  # coefficients on X_{-j}, length p - 1
    lambda_j: float
    denom: float  # z_j^T x_j
    z_norm2: float  # ||z_j||_2^2
    nodewise_kkt_gap: float

    @property
    def scale(self) -> float:
        """``z_j^T x_j / ||z_j||_2``, the standardizing factor of the pivots."""
        return self.denom / np.sqrt(self.z_norm2)

    @property
    def z_moment_ratio(self) -> float:
        """``||z_j||_4^4 / ||z_j||_2^4``; should be small."""
        return float(np.sum(self.z**4) / self.z_norm2**2)

    @property
    def z_energy(self) -> float:
        """``||z_j||_2^2 / n``; should stay bounded away from 0."""
        return self.z_norm2 / self.z.shape[0]


@dataclass(frozen=True)
class DebiasedEstimate:
    j: int
    beta_db: float
    beta_lasso: float
    correction: float


def nodewise_direction(
    data: RegressionData,
    j: int,
    lambda_j: float,
    config: SolverConfig = SolverConfig(),
) -> DebiasArtifacts:
    """Residual of the Lasso regression of column ``j`` on the other columns."""
    n, p = data.X.shape
    if not 0 <= j < p:
        raise IndexError(f"coordinate {j} out of range for p={p}")
    if not lambda_j > 0:
        raise ValueError("lambda_j must be positive")
    xj = data.X[:, j]
    if p == 1:
        gamma, gap = np.zeros(0), 0.0
        z = xj.copy()
    else:
        others = np.delete(data.X, j, axis=1)
        gamma, gap, _, _ = _solve(others, xj, lambda_j, config)
        z = xj - others @ gamma
    denom = float(z @ xj)
    if denom <= DENOM_RTOL * n:
        raise DegenerateDirection(
            f"z_j^T x_j = {denom:.3e} for coordinate {j}; inference refused"
        )
    return DebiasArtifacts(
        j=j,
        z=z,
        gamma_hat=gamma,
        lambda_j=float(lambda_j),
        denom=denom,
        z_norm2=float(z @ z),
        nodewise_kkt_gap=gap,
    )


def estimate_sigma(data: RegressionData, fit: LassoFit) -> float:
    """Noise variance estimate ``||y - X beta_hat||^2 / (n - |support|)``.

    Note this returns the variance, not the standard deviation.
    """
    dof = data.n - fit.support_size
    if dof <= 0:
        raise SaturatedFit(f"support size {fit.support_size} >= n = {data.n}")
    resid = data.y - data.X @ fit.beta_hat
    return float(resid @ resid) / dof


def debias(
    data: RegressionData, fit: LassoFit, art: DebiasArtifacts
) -> DebiasedEstimate:
    if art.denom <= DENOM_RTOL * data.n:
        raise DegenerateDirection(f"coordinate {art.j} has a degenerate direction")
    resid = data.y - data.X @ fit.beta_hat
    correction = float(art.z @ resid) / art.denom
    b = float(fit.beta_hat[art.j])
    return DebiasedEstimate(art.j, b + correction, b, correction)


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")


def plugin_halfwidth(art: DebiasArtifacts, sigma_hat: float, alpha: float) -> float:
    _check_alpha(alpha)
    if sigma_hat < 0:
        raise ValueError("sigma_hat must be nonnegative")
    return sigma_hat * norm.ppf(1 - alpha / 2) * np.sqrt(art.z_norm2) / art.denom


def plugin_ci(
    est: DebiasedEstimate,
    art: DebiasArtifacts,
    sigma_hat: float,
    alpha: float = 0.05,
) -> ConfidenceInterval:
    """Normal-approximation interval centered at the debiased estimate."""
    h = plugin_halfwidth(art, sigma_hat, alpha)
    return ConfidenceInterval(est.j, est.beta_db - h, est.beta_db + h, 1 - alpha, "DB")
