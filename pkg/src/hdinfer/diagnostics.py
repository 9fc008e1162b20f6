"""Numeric checks of the design conditions and the exact error decomposition.

The decomposition splits the debiased-Lasso error around the oracle estimator

    beta_o_S = beta_S + G^{-1} X_S^T eps / n - lam G^{-1} sgn(beta_S),

with ``G = X_S^T X_S / n`` and ``v = e_j - X^T z_j / (z_j^T x_j)``:

    noise     = z_j^T eps / d + v_S^T G^{-1} X_S^T eps / n
    bias      = -lam v_S^T G^{-1} sgn(beta_S)
    remainder = v^T (beta_hat - beta_o)

so that ``beta_db - beta_j = noise + bias + remainder`` holds exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import RegressionData
from .debias import DebiasArtifacts, debias
from .errors import SingularCovariance, SingularSupportGram
from .lasso import LassoFit

# smallest eigenvalue / largest eigenvalue below which a Gram block is singular
_EIG_RTOL = 1e-12


@dataclass(frozen=True)
class ConditionReport:
    kappa: float
    K1: float
    C_min: float
    s: int
    s_tilde: int
    band: float  # coefficients with 0 < |beta_j| < band count as weak
    K0: float | None = None
    z_reg: tuple[float, float] | None = None
    # population-covariance extras
    C_upper: float | None = None  # max_j Sigma_jj
    C_lower: float | None = None  # 1 / max_j (Sigma^{-1})_jj
    c_n: float | None = None
    C_n: float | None = None
    s_j: int | None = None

    def __post_init__(self):
        if min(self.kappa, self.K1, self.C_min) < 0 or (self.K0 is not None and self.K0 < 0):
            raise ValueError("condition quantities must be nonnegative")
        if self.s_tilde > self.s:
            raise ValueError("s_tilde cannot exceed s")

    @property
    def asymptotic_range(self) -> bool | None:
        """False when the Gram-deviation constant C_n is >= 1."""
        return None if self.C_n is None else self.C_n < 1

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["z_reg"] is not None:
            d["z_reg"] = list(d["z_reg"])
        return d

    def to_text(self) -> str:
        lines = []
        for k, v in self.to_dict().items():
            if v is None:
                continue
            if isinstance(v, list):
                v = ",".join(repr(float(x)) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class ErrorDecomposition:
    noise: float
    bias: float
    remainder: float
    total: float
    branch: str  # "sign-form" if the support of beta_hat lies in S, else "residual"


def _index(S) -> np.ndarray:
    S = np.unique(np.asarray(S, dtype=np.intp))
    if S.size == 0:
        raise ValueError("support set must be nonempty")
    return S


def _inverse(G: np.ndarray, exc: type[Exception]) -> np.ndarray:
    w = np.linalg.eigvalsh(G)
    if w[0] <= _EIG_RTOL * max(w[-1], 1.0):
        raise exc(f"matrix is singular (smallest eigenvalue {w[0]:.3e})")
    return np.linalg.inv(G)


def support_gram_inverse(data: RegressionData, S) -> np.ndarray:
    S = _index(S)
    XS = data.X[:, S]
    return _inverse(XS.T @ XS / data.n, SingularSupportGram)


def inf_norm(A: np.ndarray) -> float:
    """Maximum absolute row sum."""
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


def g1(lam, K1, sigma, C_min, n, p) -> float:
    """l_inf radius of the Lasso error on the support."""
    return K1 * lam + 8 * sigma * math.sqrt(2 * math.log(p) / (C_min * n))


def g1_prime(lam, K1, sigma, C_min, n, p) -> float:
    """l_inf radius of the bootstrap Lasso around beta_hat."""
    return K1 * lam + 2 * sigma * math.sqrt(2 * math.log(p) / (C_min * n))


def gram_deviation_constants(n: int, p: int, s: int) -> tuple[float, float]:
    """``(c_n, C_n)`` with ``c_n = max(sqrt s, sqrt log p)/sqrt n``."""
    c_n = max(math.sqrt(s), math.sqrt(math.log(p))) / math.sqrt(n)
    C_n = 4 * math.sqrt(s) * c_n / (1 - 2 * c_n) ** 2
    return c_n, C_n


def g2(lam, K1, sigma, C_min, n, p, s) -> float:
    """l_inf radius for Gaussian designs."""
    _, C_n = gram_deviation_constants(n, p, s)
    return (1 + C_n) * K1 * lam + 4 * sigma * math.sqrt(math.log(p) / (C_min * n))


def weak_signal_count(beta_true, band: float) -> int:
    a = np.abs(np.asarray(beta_true, dtype=np.float64))
    return int(np.count_nonzero((a > 0) & (a < band)))


def condition_report(
    data: RegressionData,
    S,
    art: DebiasArtifacts | None,
    beta_true,
    lam: float,
    sigma: float = 1.0,
) -> ConditionReport:
    """Sample-Gram quantities on the true support ``S``.

    ``sigma`` enters the weak-signal band ``g1 + g1'``; pass the true noise
    level in simulations and sigma_hat otherwise.
    """
    S = _index(S)
    n, p = data.X.shape
    Ginv = support_gram_inverse(data, S)
    Sc = np.setdiff1d(np.arange(p), S)
    cross = data.X[:, Sc].T @ data.X[:, S] / n
    K1 = inf_norm(Ginv)
    C_min = float(np.linalg.eigvalsh(data.X[:, S].T @ data.X[:, S] / n)[0])
    band = g1(lam, K1, sigma, C_min, n, p) + g1_prime(lam, K1, sigma, C_min, n, p)
    return ConditionReport(
        kappa=inf_norm(cross @ Ginv),
        K1=K1,
        C_min=C_min,
        s=int(S.size),
        s_tilde=weak_signal_count(beta_true, band),
        band=band,
        K0=float(np.abs(data.X).max()),
        z_reg=None if art is None else (art.z_moment_ratio, art.z_energy),
    )


def population_condition_report(
    Sigma,
    S,
    beta_true,
    lam: float,
    n: int,
    sigma: float = 1.0,
    j: int | None = None,
) -> ConditionReport:
    """Covariance-level quantities for Gaussian designs with covariance ``Sigma``.

    ``s_j`` (nonzeros in column ``j`` of the precision matrix) is reported
    only when ``j`` is given.
    """
    Sigma = np.asarray(Sigma, dtype=np.float64)
    S = _index(S)
    p = Sigma.shape[0]
    Sc = np.setdiff1d(np.arange(p), S)
    SSS = Sigma[np.ix_(S, S)]
    w, V = np.linalg.eigh(SSS)
    if w[0] <= _EIG_RTOL * max(w[-1], 1.0):
        raise SingularCovariance("Sigma_SS is not positive definite")
    SSS_inv = (V / w) @ V.T
    inv_sqrt = (V / np.sqrt(w)) @ V.T
    precision = _inverse(Sigma, SingularCovariance)
    K1 = inf_norm(inv_sqrt) ** 2
    C_min = float(w[0])
    c_n, C_n = gram_deviation_constants(n, p, S.size)
    band = 2 * g2(lam, K1, sigma, C_min, n, p, S.size)
    s_j = None
    if j is not None:
        col = precision[:, j]
        s_j = int(np.count_nonzero(np.abs(col) > 1e-12 * np.abs(col).max()))
    return ConditionReport(
        kappa=inf_norm(Sigma[np.ix_(Sc, S)] @ SSS_inv),
        K1=K1,
        C_min=C_min,
        s=int(S.size),
        s_tilde=weak_signal_count(beta_true, band),
        band=band,
        C_upper=float(np.diag(Sigma).max()),
        C_lower=float(1 / np.diag(precision).max()),
        c_n=c_n,
        C_n=C_n,
        s_j=s_j,
    )


def oracle_estimator(data: RegressionData, S, beta_true, eps, lam: float) -> np.ndarray:
    """Lasso proxy that knows the true support; sgn(0) is taken as 0."""
    S = _index(S)
    beta_true = np.asarray(beta_true, dtype=np.float64)
    Ginv = support_gram_inverse(data, S)
    W = data.X[:, S].T @ np.asarray(eps, dtype=np.float64) / data.n
    out = np.zeros(data.p)
    out[S] = beta_true[S] + Ginv @ W - lam * Ginv @ np.sign(beta_true[S])
    return out


def lasso_subgradient(data: RegressionData, fit: LassoFit) -> np.ndarray:
    """Subgradient element certified by the KKT conditions: sgn on the support,
    ``x_k^T r / (n lam)`` off it."""
    g = data.X.T @ (data.y - data.X @ fit.beta_hat) / (data.n * fit.lam)
    nz = fit.beta_hat != 0
    g[nz] = np.sign(fit.beta_hat[nz])
    return g


def decompose_error(
    data: RegressionData,
    S,
    beta_true,
    eps,
    fit: LassoFit,
    art: DebiasArtifacts,
    lam: float | None = None,
) -> ErrorDecomposition:
    """Split ``beta_db_j - beta_j`` into noise, bias and remainder.

    When the selected support lies in ``S`` the remainder uses the sign form
    ``-lam v_S^T G^{-1} (sgn(beta_hat_S) - sgn(beta_S))``, which is exactly 0
    under sign consistency; otherwise it is ``total - noise - bias``.
    """
    S = _index(S)
    lam = fit.lam if lam is None else lam
    beta_true = np.asarray(beta_true, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    n, j = data.n, art.j
    Ginv = support_gram_inverse(data, S)
    v = -(data.X.T @ art.z) / art.denom
    v[j] += 1.0
    w = Ginv @ v[S]
    noise = float(art.z @ eps) / art.denom + float(w @ (data.X[:, S].T @ eps)) / n
    sgn_true = np.sign(beta_true[S])
    bias = -lam * float(w @ sgn_true)
    total = debias(data, fit, art).beta_db - beta_true[j]
    if np.isin(fit.active_set, S).all():
        diff = lasso_subgradient(data, fit)[S] - sgn_true
        remainder = -lam * float(w @ diff) if diff.any() else 0.0
        branch = "sign-form"
    else:
        remainder = total - noise - bias
        branch = "residual"
    return ErrorDecomposition(noise, bias, remainder, float(total), branch)


def remainder_bound(K1: float, s_tilde: int, lam: float, art: DebiasArtifacts) -> float:
    """``2 K1 s_tilde lam lam_j / (z_j^T x_j / n)``."""
    return 2 * K1 * s_tilde * lam * art.lambda_j / (art.denom / art.z.shape[0])


def omega0_event(fit: LassoFit, S, beta_true, radius: float) -> bool:
    """Selected support inside ``S`` and ``max_S |beta_hat - beta| <= radius``."""
    S = _index(S)
    beta_true = np.asarray(beta_true, dtype=np.float64)
    if not np.isin(fit.active_set, S).all():
        return False
    return bool(np.abs(fit.beta_hat[S] - beta_true[S]).max() <= radius)
