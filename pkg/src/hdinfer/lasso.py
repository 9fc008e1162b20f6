"""Lasso by cyclic coordinate descent with a KKT certificate.

Objective: ``(1/2n) ||y - X b||^2 + lam ||b||_1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .core import RegressionData
from .errors import DegenerateResponse, NonFinite, NotConvergedWarning


@dataclass(frozen=True)
class SolverConfig:
    kkt_tol: float = 1e-8
    max_sweeps: int = 100_000
    coord_tol: float = 1e-10

    def __post_init__(self):
        if not (self.kkt_tol > 0 and self.max_sweeps > 0 and self.coord_tol > 0):
            raise ValueError("solver tolerances and max_sweeps must be positive")


@dataclass(frozen=True)
class LassoFit:
    beta_hat: np.ndarray
    active_set: np.ndarray
    lam: float
    kkt_gap: float
    iterations: int
    converged: bool
    objective_trace: np.ndarray | None = None

    @property
    def support_size(self) -> int:
        return int(self.active_set.size)


def soft_threshold(r, lam):
    """``sgn(r) * max(|r| - lam, 0)``; ``|r| <= lam`` maps to exactly 0."""
    r = np.asarray(r, dtype=np.float64)
    return np.where(np.abs(r) <= lam, 0.0, r - np.sign(r) * lam)


def lasso_objective(X, y, beta, lam) -> float:
    resid = y - X @ beta
    return float(resid @ resid / (2 * X.shape[0]) + lam * np.abs(beta).sum())


def kkt_gap(X, y, beta, lam) -> float:
    """Largest violation of the Lasso optimality conditions at ``beta``."""
    if X.shape[1] == 0:
        return 0.0
    grad = X.T @ (y - X @ beta) / X.shape[0]
    nz = beta != 0
    gap_nz = np.abs(grad[nz] - lam * np.sign(beta[nz]))
    gap_z = np.maximum(np.abs(grad[~nz]) - lam, 0.0)
    return float(max(gap_nz.max(initial=0.0), gap_z.max(initial=0.0)))


@numba.njit(cache=True, nogil=True)
def _cd_kernel(X, y, beta, lam, colsq, max_sweeps, coord_tol, trace):
    n, p = X.shape
    r = y.copy()
    for j in range(p):
        if beta[j] != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * beta[j]
    record = trace.shape[0] > 1
    sweeps = 0
    active_only = False
    while sweeps < max_sweeps:
        max_delta = 0.0
        for j in range(p):
            bj = beta[j]
            if active_only and bj == 0.0:
                continue
            if colsq[j] == 0.0:
                continue
            dot = 0.0
            for i in range(n):
                dot += X[i, j] * r[i]
            rho = dot / n + colsq[j] * bj
            if rho > lam:
                new = (rho - lam) / colsq[j]
            elif rho < -lam:
                new = (rho + lam) / colsq[j]
            else:
                new = 0.0
            delta = new - bj
            if delta != 0.0:
                for i in range(n):
                    r[i] -= X[i, j] * delta
                beta[j] = new
                step = abs(delta) * math.sqrt(colsq[j])
                if step > max_delta:
                    max_delta = step
        sweeps += 1
        if record:
            obj = 0.0
            for i in range(n):
                obj += r[i] * r[i]
            obj /= 2.0 * n
            for j in range(p):
                obj += lam * abs(beta[j])
            trace[sweeps - 1] = obj
        if max_delta < coord_tol:
            if active_only:
                active_only = False
            else:
                break
        else:
            active_only = True
    return sweeps


def _polish(X, y, beta, lam, gap):
    """Solve the KKT system on the current signed support exactly.

    Accepted only if the signs survive and the KKT gap does not grow; this
    removes the residual coordinate-descent error on the active set.
    """
    active = np.flatnonzero(beta)
    if active.size == 0 or active.size >= X.shape[0]:
        return beta, gap
    n = X.shape[0]
    signs = np.sign(beta[active])
    XA = X[:, active]
    try:
        b = np.linalg.solve(XA.T @ XA / n, XA.T @ y / n - lam * signs)
    except np.linalg.LinAlgError:
        return beta, gap
    if not np.array_equal(np.sign(b), signs):
        return beta, gap
    cand = np.zeros_like(beta)
    cand[active] = b
    cand_gap = kkt_gap(X, y, cand, lam)
    if cand_gap <= gap:
        return cand, cand_gap
    return beta, gap


def _solve(X, y, lam, config, beta0=None, colsq=None, record=False):
    """Array-level solver shared by the regression, nodewise and bootstrap fits.

    Returns ``(beta, kkt_gap, sweeps, trace)``.
    """
    n, p = X.shape
    if colsq is None:
        colsq = np.einsum("ij,ij->j", X, X) / n
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    X = np.asfortranarray(X)
    y = np.ascontiguousarray(y, dtype=np.float64)
    # lam at or above max|x_k^T y|/n: zero is optimal, return it exactly
    # rather than letting rounding in the sweep leave 1e-17 entries
    if np.abs(X.T @ y).max(initial=0.0) / n <= lam * (1 + 1e-12):
        beta = np.zeros(p)
        gap = kkt_gap(X, y, beta, lam)
        if gap <= config.kkt_tol:
            return beta, gap, 0, (np.empty(0) if record else None)
    budget = config.max_sweeps
    trace = np.empty(budget if record else 1)
    coord_tol = config.coord_tol
    used = 0
    while True:
        sweeps = _cd_kernel(
            X, y, beta, lam, colsq, budget - used, coord_tol,
            trace[used:] if record else trace,
        )
        used += sweeps
        if not np.isfinite(beta).all():
            raise NonFinite("coordinate descent produced a non-finite iterate")
        gap = kkt_gap(X, y, beta, lam)
        if gap > config.kkt_tol:
            beta, gap = _polish(X, y, beta, lam, gap)
        if gap <= config.kkt_tol or used >= budget or coord_tol < 1e-300:
            break
        coord_tol *= 1e-3
    return beta, gap, used, (trace[:used].copy() if record else None)


def fit_lasso(
    data: RegressionData,
    lam: float,
    config: SolverConfig = SolverConfig(),
    *,
    beta0: np.ndarray | None = None,
    record_objective: bool = False,
) -> LassoFit:
    """Minimize ``(1/2n)||y - Xb||^2 + lam ||b||_1`` by cyclic coordinate descent.

    ``beta0`` warm-starts the sweep.  A fit that misses ``config.kkt_tol``
    comes back with ``converged=False`` and a :class:`NotConvergedWarning`.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    beta, gap, sweeps, trace = _solve(
        data.X, data.y, lam, config, beta0=beta0, record=record_objective
    )
    converged = gap <= config.kkt_tol
    if not converged:
        warnings.warn(
            f"Lasso stopped after {sweeps} sweeps with KKT gap {gap:.3e}",
            NotConvergedWarning,
            stacklevel=2,
        )
    return LassoFit(
        beta_hat=beta,
        active_set=np.flatnonzero(beta),
        lam=float(lam),
        kkt_gap=gap,
        iterations=sweeps,
        converged=converged,
        objective_trace=trace,
    )


def universal_lambda(
    data: RegressionData, sigma_estimate: float, multiplier: float = 1.0
) -> float:
    """``multiplier * sigma * sqrt(2 log p / n)``.

    A nonpositive ``sigma_estimate`` falls back to the sample standard
    deviation of y as a pilot scale.
    """
    if sigma_estimate < 0:
        raise ValueError("sigma_estimate must be nonnegative")
    if data.p < 2:
        raise DegenerateResponse("universal level needs p >= 2 (log p = 0)")
    sigma = sigma_estimate if sigma_estimate > 0 else float(np.std(data.y, ddof=1))
    if sigma == 0:
        raise DegenerateResponse("response has zero sample variance")
    return multiplier * sigma * math.sqrt(2 * math.log(data.p) / data.n)


def fit_lasso_pipeline(
    data: RegressionData,
    config: SolverConfig = SolverConfig(),
    multiplier: float = 1.0,
) -> tuple[LassoFit, float]:
    """Two-stage universal-level fit; returns the final fit and its sigma_hat^2."""
    from .debias import estimate_sigma

    pilot = fit_lasso(data, universal_lambda(data, 0.0, multiplier), config)
    sigma2 = estimate_sigma(data, pilot)
    if sigma2 == 0:
        return pilot, sigma2
    lam = universal_lambda(data, math.sqrt(sigma2), multiplier)
    fit = fit_lasso(data, lam, config, beta0=pilot.beta_hat)
    return fit, estimate_sigma(data, fit)
