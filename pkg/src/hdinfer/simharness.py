"""Monte-Carlo coverage study for BS-DB, DB and DDB intervals.

One replication draws a Gaussian design and response, fits the Lasso once,
builds the nodewise direction for every tested coordinate and shares one
bootstrap distribution per coordinate between the percentile interval and
the double-debiased estimate.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .bootstrap import (
    bootstrap_debiased_many,
    ddb_estimate,
    ddb_plugin_ci,
    percentile_ci,
    pivots,
)
from .core import RegressionData, SeedSpec, standardize
from .debias import debias, estimate_sigma, nodewise_direction, plugin_ci
from .diagnostics import condition_report, g1, omega0_event
from .errors import (
    AllReplicationsFailed,
    ConfigError,
    HDInferError,
    ReplicationFailureCeiling,
)
from .lasso import SolverConfig, fit_lasso, fit_lasso_pipeline, universal_lambda

METHODS = ("BS-DB", "DB", "DDB")
METRICS = ("cov_S", "cov_Sc", "len_S", "len_Sc")
ESTIMATORS = ("lasso", "db", "ddb")
THREADS_ENV = "HDINFER_THREADS"

# stream ids below 2**63 are replications; this one picks the null coordinates
_COORD_STREAM = 2**64 - 1
_DATA, _BOOT = 0, 1


@dataclass(frozen=True)
class SimConfig:
    """Simulation design.

    ``beta_spec`` is ``"setting_i"`` (all signals 2), ``"setting_ii"``
    (first five signals 1, the rest 2) or a tuple of custom coefficients for
    the first ``len(beta_spec)`` coordinates.  ``lambda_rule`` is
    ``"known_sigma"`` (universal level with the true noise level) or
    ``"two_stage"`` (universal level with a plug-in sigma_hat).
    """

    n: int = 100
    p: int = 500
    s: int = 20
    beta_spec: str | tuple[float, ...] = "setting_i"
    sigma_design: str = "identity"
    rho: float = 0.0
    noise_sigma: float = 1.0
    n_reps: int = 1000
    B: int = 500
    level: float = 0.95
    tested_coords: tuple[int, ...] | None = None
    n_null_coords: int = 30
    full_p: bool = False
    master_seed: int = 0
    methods: tuple[str, ...] = METHODS
    lambda_rule: str = "known_sigma"
    lambda_multiplier: float = 1.0
    lambda_j: float | None = None
    standardize: bool = False
    failure_ceiling: float = 0.05
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if isinstance(self.beta_spec, list):
            object.__setattr__(self, "beta_spec", tuple(self.beta_spec))
        if self.tested_coords is not None:
            object.__setattr__(self, "tested_coords", tuple(int(j) for j in self.tested_coords))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not (self.n >= 2 and self.p >= 2 and 1 <= self.s <= self.p):
            raise ConfigError("need n >= 2, p >= 2 and 1 <= s <= p")
        if isinstance(self.beta_spec, str):
            if self.beta_spec not in ("setting_i", "setting_ii"):
                raise ConfigError(f"unknown beta_spec {self.beta_spec!r}")
        elif len(self.beta_spec) not in (self.s, self.p):
            raise ConfigError("custom beta_spec must have length s or p")
        if self.sigma_design not in ("identity", "equicorrelated"):
            raise ConfigError(f"unknown sigma_design {self.sigma_design!r}")
        if self.sigma_design == "equicorrelated" and not -1 / (self.p - 1) < self.rho < 1:
            raise ConfigError("rho must lie in (-1/(p-1), 1)")
        if self.n_reps < 1 or self.B < 1:
            raise ConfigError("n_reps and B must be positive")
        if not 0 < self.level < 1:
            raise ConfigError("level must lie in (0, 1)")
        if not self.noise_sigma > 0:
            raise ConfigError("noise_sigma must be positive")
        if self.tested_coords is not None and not all(0 <= j < self.p for j in self.tested_coords):
            raise ConfigError("tested_coords must lie in 0..p-1")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}")
        if self.lambda_rule not in ("known_sigma", "two_stage"):
            raise ConfigError(f"unknown lambda_rule {self.lambda_rule!r}")

    def beta(self) -> np.ndarray:
        b = np.zeros(self.p)
        if self.beta_spec == "setting_i":
            b[: self.s] = 2.0
        elif self.beta_spec == "setting_ii":
            b[: self.s] = 2.0
            b[: min(5, self.s)] = 1.0
        else:
            b[: len(self.beta_spec)] = self.beta_spec
        return b

    def covariance(self) -> np.ndarray:
        if self.sigma_design == "identity":
            return np.eye(self.p)
        return equicorrelated(self.p, self.rho)

    def coords(self) -> np.ndarray:
        """Tested coordinates: explicit, all of 0..p-1, or S plus null draws."""
        if self.tested_coords is not None:
            return np.array(sorted(set(self.tested_coords)), dtype=np.intp)
        if self.full_p:
            return np.arange(self.p)
        support = np.flatnonzero(self.beta())
        null = np.setdiff1d(np.arange(self.p), support)
        rng = SeedSpec(self.master_seed, _COORD_STREAM).generator()
        k = min(self.n_null_coords, null.size)
        picked = rng.choice(null, size=k, replace=False)
        return np.sort(np.concatenate([support, picked]))


def equicorrelated(p: int, rho: float) -> np.ndarray:
    """Unit diagonal, constant off-diagonal ``rho``."""
    return (1 - rho) * np.eye(p) + rho * np.ones((p, p))


@lru_cache(maxsize=8)
def _cholesky(p: int, rho: float) -> np.ndarray:
    return np.linalg.cholesky(equicorrelated(p, rho))


# ---------------------------------------------------------------------------
# config files


_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig) if f.name != "solver"}
_INT = {"n", "p", "s", "n_reps", "B", "n_null_coords", "master_seed"}
_FLOAT = {"rho", "noise_sigma", "level", "lambda_multiplier", "failure_ceiling"}
_BOOL = {"full_p", "standardize"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT:
            return int(raw)
        if key in _FLOAT:
            return float(raw)
        if key in _BOOL:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if key == "lambda_j":
            return None if raw.lower() in ("", "none", "auto") else float(raw)
        if key == "tested_coords":
            if raw.lower() in ("", "none", "default"):
                return None
            return tuple(int(t) for t in raw.split(","))
        if key == "methods":
            return tuple(t.strip().upper() for t in raw.split(",") if t.strip())
        if key == "beta_spec":
            if raw in ("setting_i", "setting_ii"):
                return raw
            if raw.startswith("custom"):
                raw = raw.partition(":")[2] or raw[6:].strip("()")
            return tuple(float(t) for t in raw.split(","))
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config(text: str, **overrides) -> SimConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment.

    ``sigma_design = equicorrelated(0.2)`` sets ``rho`` as well.
    """
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key == "sigma_design" and "(" in raw:
            name, _, arg = raw.strip().partition("(")
            values["sigma_design"] = name.strip()
            values["rho"] = _parse_value("rho", arg.rstrip(")"))
            continue
        values[key] = _parse_value(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SimConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path, **overrides) -> SimConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), **overrides)


def format_config(cfg: SimConfig) -> str:
    lines = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        if v is None:
            v = "none"
        elif isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# replications


def generate_instance(cfg: SimConfig, rep: int):
    """Draw ``(data, beta_true, eps)`` for replication ``rep``.

    With ``cfg.standardize`` the columns are rescaled to squared norm n and
    ``beta_true`` is expressed on the rescaled columns.
    """
    rng = SeedSpec(cfg.master_seed, rep).child(_DATA).generator()
    X = rng.standard_normal((cfg.n, cfg.p))
    if cfg.sigma_design == "equicorrelated":
        X = X @ _cholesky(cfg.p, cfg.rho).T
    eps = cfg.noise_sigma * rng.standard_normal(cfg.n)
    beta = cfg.beta()
    data = RegressionData(X, X @ beta + eps)
    if cfg.standardize:
        data = standardize(data)
        beta = beta / data.column_scales
    return data, beta, eps


@dataclass(frozen=True)
class CoordinateRecord:
    j: int
    beta_true: float
    lasso: float
    db: float
    ddb: float
    R: float
    R_ddb: float
    intervals: dict[str, tuple[float, float]]

    def covered(self, method: str) -> bool:
        lo, hi = self.intervals[method]
        return lo <= self.beta_true <= hi

    def length(self, method: str) -> float:
        lo, hi = self.intervals[method]
        return hi - lo

    def estimate(self, method: str) -> float:
        return self.ddb if method == "DDB" else self.db


@dataclass(frozen=True)
class ReplicationResult:
    rep: int
    ok: bool
    error: str | None = None
    sigma_hat: float = math.nan
    lam: float = math.nan
    support_size: int = 0
    omega0: bool = False
    conditions: dict | None = None
    records: tuple[CoordinateRecord, ...] = ()

    def method_records(self, method: str) -> list[dict]:
        return [
            {"j": r.j, "covered": r.covered(method), "length": r.length(method),
             "estimate": r.estimate(method)}
            for r in self.records
        ]


def _lambda(cfg: SimConfig, data: RegressionData):
    if cfg.lambda_rule == "two_stage":
        fit, _ = fit_lasso_pipeline(data, cfg.solver, cfg.lambda_multiplier)
        return fit
    lam = universal_lambda(data, cfg.noise_sigma, cfg.lambda_multiplier)
    return fit_lasso(data, lam, cfg.solver)


def run_replication(cfg: SimConfig, rep: int) -> ReplicationResult:
    """One replication; solver or degenerate-direction errors mark it failed."""
    try:
        return _replicate(cfg, rep)
    except HDInferError as exc:
        return ReplicationResult(rep, ok=False, error=f"{type(exc).__name__}: {exc}")


def _replicate(cfg: SimConfig, rep: int) -> ReplicationResult:
    data, beta, _ = generate_instance(cfg, rep)
    fit = _lambda(cfg, data)
    if not fit.converged:
        return ReplicationResult(rep, ok=False, error="Lasso did not converge")
    sigma_hat = math.sqrt(estimate_sigma(data, fit))
    lam_j = cfg.lambda_j if cfg.lambda_j is not None else fit.lam
    coords = cfg.coords()
    arts = [nodewise_direction(data, int(j), lam_j, cfg.solver) for j in coords]
    if any(a.nodewise_kkt_gap > cfg.solver.kkt_tol for a in arts):
        return ReplicationResult(rep, ok=False, error="nodewise Lasso did not converge")
    need_boot = "BS-DB" in cfg.methods or "DDB" in cfg.methods
    dists = None
    if need_boot:
        seed = SeedSpec(cfg.master_seed, rep).child(_BOOT)
        dists = bootstrap_debiased_many(data, fit, sigma_hat, arts, cfg.B, seed, cfg.solver)
    records = []
    for k, art in enumerate(arts):
        est = debias(data, fit, art)
        bj = float(beta[art.j])
        ddb = ddb_estimate(est.beta_db, dists[k]) if dists else math.nan
        intervals = {}
        if "DB" in cfg.methods:
            ci = plugin_ci(est, art, sigma_hat, 1 - cfg.level)
            intervals["DB"] = (ci.lower, ci.upper)
        if "BS-DB" in cfg.methods:
            ci = percentile_ci(est.beta_db, dists[k], cfg.level)
            intervals["BS-DB"] = (ci.lower, ci.upper)
        if "DDB" in cfg.methods:
            ci = ddb_plugin_ci(ddb, art, sigma_hat, cfg.level)
            intervals["DDB"] = (ci.lower, ci.upper)
        if sigma_hat > 0 and dists:
            pv = pivots(est, ddb, art, sigma_hat, bj)
            R, R_ddb = pv.R_j, pv.R_j_ddb
        else:
            R, R_ddb = art.scale * (est.beta_db - bj), math.nan
        records.append(CoordinateRecord(
            art.j, bj, est.beta_lasso, est.beta_db, ddb, R, R_ddb, intervals
        ))

    support = np.flatnonzero(beta)
    conditions, omega0 = None, False
    try:
        rep_ = condition_report(data, support, None, beta, fit.lam, cfg.noise_sigma)
    except HDInferError:
        pass
    else:
        conditions = {
            "kappa": rep_.kappa, "K1": rep_.K1, "C_min": rep_.C_min,
            "K0": rep_.K0, "s_tilde": float(rep_.s_tilde),
            "z_moment_ratio": float(np.mean([a.z_moment_ratio for a in arts])),
            "z_energy": float(np.mean([a.z_energy for a in arts])),
        }
        radius = g1(fit.lam, rep_.K1, cfg.noise_sigma, rep_.C_min, data.n, data.p)
        omega0 = omega0_event(fit, support, beta, radius)
    return ReplicationResult(
        rep, ok=True, sigma_hat=sigma_hat, lam=fit.lam,
        support_size=fit.support_size, omega0=omega0,
        conditions=conditions, records=tuple(records),
    )


# ---------------------------------------------------------------------------
# aggregation and reports


@dataclass(frozen=True)
class MethodSummary:
    cov_S: float
    cov_Sc: float
    len_S: float
    len_Sc: float
    n_records: int


@dataclass(frozen=True)
class SimulationReport:
    methods: dict[str, MethodSummary]
    bias_table: dict[int, dict[str, float]]
    bias_groups: dict[str, dict[str, dict[str, float]]]
    mean_sigma_hat: float
    condition_summary: dict[str, float]
    omega0_rate: float
    n_reps: int
    n_failed: int
    level: float

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "n_reps": self.n_reps,
            "n_failed": self.n_failed,
            "mean_sigma_hat": self.mean_sigma_hat,
            "omega0_rate": self.omega0_rate,
            "methods": {m: dataclasses.asdict(s) for m, s in self.methods.items()},
            "bias_table": {str(j): row for j, row in self.bias_table.items()},
            "bias_groups": self.bias_groups,
            "condition_summary": self.condition_summary,
        }


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else math.nan


def _group_of(beta_j: float, strong: float) -> str:
    if beta_j == 0:
        return "zero"
    return "strong" if abs(beta_j) >= strong else "weak"


def aggregate(results, cfg: SimConfig) -> SimulationReport:
    """Means over successful replications, split by membership in S.

    Results are folded in replication order whatever order they arrive in.
    """
    results = sorted(results, key=lambda r: r.rep)
    good = [r for r in results if r.ok]
    if not good:
        raise AllReplicationsFailed(f"all {len(results)} replications failed")
    records = [rec for r in good for rec in r.records]

    methods = {}
    for m in cfg.methods:
        inS = [rec for rec in records if rec.beta_true != 0]
        outS = [rec for rec in records if rec.beta_true == 0]
        methods[m] = MethodSummary(
            cov_S=_mean([rec.covered(m) for rec in inS]),
            cov_Sc=_mean([rec.covered(m) for rec in outS]),
            len_S=_mean([rec.length(m) for rec in inS]),
            len_Sc=_mean([rec.length(m) for rec in outS]),
            n_records=len(inS) + len(outS),
        )

    by_coord: dict[int, list[CoordinateRecord]] = {}
    for rec in records:
        by_coord.setdefault(rec.j, []).append(rec)
    bias_table = {
        j: {"beta": recs[0].beta_true,
            **{e: _mean([getattr(r, e) - r.beta_true for r in recs]) for e in ESTIMATORS}}
        for j, recs in sorted(by_coord.items())
    }

    strong = float(np.abs(cfg.beta()).max())
    groups: dict[str, list[CoordinateRecord]] = {}
    for rec in records:
        groups.setdefault(_group_of(rec.beta_true, strong), []).append(rec)
    bias_groups = {}
    for g in ("weak", "strong", "zero"):
        if g not in groups:
            continue
        bias_groups[g] = {}
        for e in ESTIMATORS:
            est = np.array([getattr(r, e) for r in groups[g]])
            err = est - np.array([r.beta_true for r in groups[g]])
            q = np.quantile(est, [0.0, 0.25, 0.5, 0.75, 1.0]) if np.isfinite(est).all() else [math.nan] * 5
            bias_groups[g][e] = {
                "mean_bias": float(err.mean()),
                "mean_abs_error": float(np.abs(err).mean()),
                "min": float(q[0]), "q25": float(q[1]), "median": float(q[2]),
                "q75": float(q[3]), "max": float(q[4]),
            }

    cond = [r.conditions for r in good if r.conditions]
    condition_summary = {k: _mean([c[k] for c in cond]) for k in (cond[0] if cond else {})}
    return SimulationReport(
        methods=methods,
        bias_table=bias_table,
        bias_groups=bias_groups,
        mean_sigma_hat=_mean([r.sigma_hat for r in good]),
        condition_summary=condition_summary,
        omega0_rate=_mean([r.omega0 for r in good]),
        n_reps=len(good),
        n_failed=len(results) - len(good),
        level=cfg.level,
    )


REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["level", "n_reps", "n_failed", "mean_sigma_hat", "omega0_rate",
                 "methods", "bias_table", "bias_groups", "condition_summary"],
    "properties": {
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "n_reps": {"type": "integer", "minimum": 1},
        "n_failed": {"type": "integer", "minimum": 0},
        "mean_sigma_hat": {"type": ["number", "null"]},
        "omega0_rate": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "methods": {
            "type": "object",
            "propertyNames": {"enum": list(METHODS)},
            "additionalProperties": {
                "type": "object",
                "required": [*METRICS, "n_records"],
                "properties": {
                    "cov_S": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                    "cov_Sc": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                    "len_S": {"type": ["number", "null"], "minimum": 0},
                    "len_Sc": {"type": ["number", "null"], "minimum": 0},
                    "n_records": {"type": "integer", "minimum": 0},
                },
            },
        },
        "bias_table": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["beta", *ESTIMATORS],
                "additionalProperties": {"type": ["number", "null"]},
            },
        },
        "bias_groups": {
            "type": "object",
            "propertyNames": {"enum": ["weak", "strong", "zero"]},
        },
        "condition_summary": {
            "type": "object",
            "additionalProperties": {"type": ["number", "null"]},
        },
    },
}


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def emit_report(report: SimulationReport, fmt: str = "table") -> bytes:
    """Serialize as ``table`` (``text-table``), ``csv`` or ``json``."""
    if fmt in ("table", "text-table"):
        head = f"{'method':<8}" + "".join(f"{m:>9}" for m in METRICS)
        rows = [head]
        for m, s in report.methods.items():
            rows.append(f"{m:<8}" + "".join(f"{getattr(s, k):>9.3f}" for k in METRICS))
        rows.append("")
        rows.append(f"mean sigma_hat {report.mean_sigma_hat:.3f}   "
                    f"omega0 rate {report.omega0_rate:.3f}   "
                    f"reps {report.n_reps} (failed {report.n_failed})")
        return ("\n".join(rows) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "metric", "value"])
        for m, s in report.methods.items():
            for k in (*METRICS, "n_records"):
                w.writerow([m, k, repr(getattr(s, k))])
        for k in ("mean_sigma_hat", "omega0_rate", "n_reps", "n_failed", "level"):
            w.writerow(["run", k, repr(getattr(report, k))])
        return buf.getvalue().encode()
    if fmt == "json":
        return (json.dumps(_jsonable(report.to_dict()), indent=2) + "\n").encode()
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report_csv(blob: bytes) -> dict[tuple[str, str], float]:
    rows = list(csv.reader(io.StringIO(blob.decode())))
    return {(m, k): float(v) for m, k, v in rows[1:]}


def write_report(report: SimulationReport, path: str | Path, fmt: str) -> None:
    Path(path).write_bytes(emit_report(report, fmt))


# ---------------------------------------------------------------------------
# driver


def _worker_count(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _run_chunk(args):
    cfg, reps = args
    return [run_replication(cfg, rep) for rep in reps]


def run_replications(cfg: SimConfig, threads: int | None = None, progress=None):
    """Run all replications, in parallel processes when ``threads > 1``.

    Output order and content do not depend on the worker count.
    """
    reps = list(range(cfg.n_reps))
    workers = min(_worker_count(threads), len(reps))
    if workers == 1:
        out = []
        for rep in reps:
            out.append(run_replication(cfg, rep))
            if progress:
                progress(rep)
        return out
    chunks = [(cfg, reps[k::workers]) for k in range(workers)]
    with ProcessPoolExecutor(workers, mp_context=get_context("fork")) as pool:
        parts = list(pool.map(_run_chunk, chunks))
    return sorted((r for part in parts for r in part), key=lambda r: r.rep)


def run_simulation(cfg: SimConfig, threads: int | None = None, progress=None):
    """Replicate, enforce the failure ceiling and aggregate.

    Returns ``(report, results)``.
    """
    results = run_replications(cfg, threads, progress)
    failed = sum(not r.ok for r in results)
    if failed == len(results):
        raise AllReplicationsFailed(results[0].error)
    if failed > cfg.failure_ceiling * len(results):
        raise ReplicationFailureCeiling(
            f"{failed} of {len(results)} replications failed "
            f"(first: {next(r.error for r in results if not r.ok)})"
        )
    return aggregate(results, cfg), results
