"""Cross-sectional regressions of event CARs and the covariate correlation matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DomainError, EmptySampleError
from .factors import OLSResult, ols

COVARIATES = (
    "Issue Size", "Term", "Cpn", "Option in Issue", "Bonds in Issue",
    "FTI", "ROA", "D/E", "FCF", "Tobin's Q",
)
EXTRA_COVARIATES = ("MktCap", "Assets")
FIXED_EFFECTS = ("timeofday", "day", "year", "region")
TIME_OF_DAY_BUCKETS = ("PreMarket", "FirstHour", "MidSession", "LastHour", "PostMarket")
WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


def signed_log(x: float) -> float:
    return math.copysign(math.log1p(abs(x)), x)


@dataclass(frozen=True)
class CovariateRow:
    """Raw (untransformed) inputs for one event; monetary values in USD millions."""

    event_id: str
    sector: str
    size_usd: float
    term: float
    cpn: float
    option: bool
    n_bonds: int
    fti: Optional[bool]
    roa: Optional[float]
    de: Optional[float]
    fcf: Optional[float]
    tobins_q: Optional[float]
    mktcap: Optional[float] = None
    assets: Optional[float] = None
    time_of_day: str = "PreMarket"
    weekday: int = 0
    year: int = 2000
    region: str = ""
    cars: Mapping[str, float] = field(default_factory=dict)

    def transformed(self) -> dict:
        """Covariate values after the documented transforms (None when missing)."""

        def opt(v, fn=float):
            return None if v is None else fn(v)

        return {
            "Issue Size": math.log(self.size_usd) if self.size_usd > 0 else None,
            "Term": float(self.term),
            "Cpn": float(self.cpn),
            "Option in Issue": float(bool(self.option)),
            "Bonds in Issue": float(self.n_bonds),
            "FTI": opt(self.fti, lambda b: float(bool(b))),
            "ROA": opt(self.roa),
            "D/E": opt(self.de),
            "FCF": opt(self.fcf, signed_log),
            "Tobin's Q": opt(self.tobins_q),
            "MktCap": opt(self.mktcap, lambda v: math.log(v) if v > 0 else None),
            "Assets": opt(self.assets, lambda v: math.log(v) if v > 0 else None),
        }

    def fe_value(self, fe: str) -> str:
        if fe == "timeofday":
            return self.time_of_day
        if fe == "day":
            return WEEKDAYS[self.weekday]
        if fe == "year":
            return str(self.year)
        if fe == "region":
            return self.region
        raise DomainError(f"unknown fixed effect {fe!r}")


@dataclass(frozen=True)
class RegressionDesign:
    y: np.ndarray
    X: np.ndarray
    names: tuple
    event_ids: tuple
    dependent: str
    fixed_effects: tuple
    dropped: tuple = ()  # event ids removed for missing data


def _category_order(fe: str, values) -> list:
    present = set(values)
    if fe == "timeofday":
        return [b for b in TIME_OF_DAY_BUCKETS if b in present] + sorted(present - set(TIME_OF_DAY_BUCKETS))
    if fe == "day":
        return [d for d in WEEKDAYS if d in present]
    return sorted(present)


def build_design(
    rows: Sequence[CovariateRow],
    dependent: str,
    fixed_effects: Sequence[str] = ("timeofday", "day"),
    sample: Optional[str] = None,
    covariates: Sequence[str] = COVARIATES,
) -> RegressionDesign:
    """Complete-case design matrix: constant, transformed covariates, FE dummies.

    Each fixed effect contributes one dummy per category present in the
    sample, minus the first (reference) category.
    """
    for fe in fixed_effects:
        if fe not in FIXED_EFFECTS:
            raise DomainError(f"unknown fixed effect {fe!r}")
    kept, dropped, ys, xs = [], [], [], []
    for r in rows:
        if sample is not None and r.sector != sample:
            continue
        vals = r.transformed()
        x = [vals[c] for c in covariates]
        y = r.cars.get(dependent)
        if y is None or any(v is None or not math.isfinite(v) for v in x) or not math.isfinite(y):
            dropped.append(r.event_id)
            continue
        kept.append(r)
        ys.append(y)
        xs.append(x)
    if not kept:
        raise EmptySampleError(f"no complete observations for {dependent} (sample={sample})")
    names = ["Constant", *covariates]
    cols = [np.ones(len(kept)), *np.array(xs, dtype=float).T]
    for fe in fixed_effects:
        labels = [r.fe_value(fe) for r in kept]
        for cat in _category_order(fe, labels)[1:]:
            names.append(f"{fe}={cat}")
            cols.append(np.array([lab == cat for lab in labels], dtype=float))
    return RegressionDesign(
        np.array(ys, dtype=float), np.column_stack(cols), tuple(names),
        tuple(r.event_id for r in kept), dependent, tuple(fixed_effects), tuple(dropped),
    )


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    coef: float
    std_err: float
    t_stat: float
    p_value: float

    @property
    def stars(self) -> str:
        return stars(self.p_value)


@dataclass(frozen=True)
class RegressionResult:
    rows: tuple
    r2: float
    f_stat: float
    f_pvalue: float
    n: int
    fit: OLSResult

    def coef(self, name: str) -> CoefficientRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def stars(p: float) -> str:
    if not math.isfinite(p):
        return ""
    return "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.10 else ""


def regress(design: RegressionDesign, *, robust: bool = False) -> RegressionResult:
    fit = ols(design.y, design.X, design.names, cov_type="hc1" if robust else "classical")
    rows = tuple(
        CoefficientRow(n, float(c), float(s), float(t), float(p))
        for n, c, s, t, p in zip(fit.names, fit.coef, fit.std_err, fit.t_stat, fit.p_value)
    )
    return RegressionResult(rows, fit.r2, fit.f_stat, fit.f_pvalue, fit.n, fit)


@dataclass(frozen=True)
class CorrelationResult:
    matrix: np.ndarray
    names: tuple
    undefined: tuple  # constant columns; their off-diagonal entries are NaN


def correlations(data, names: Optional[Sequence[str]] = None) -> CorrelationResult:
    """Pearson correlation matrix over columns of ``data``."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DomainError("need a 2-D matrix with at least two rows")
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    Z = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(Z * Z, axis=0))
    const = norms <= 1e-12 * np.maximum(np.abs(X).max(axis=0), 1.0) * math.sqrt(X.shape[0])
    safe = np.where(const, 1.0, norms)
    C = (Z / safe).T @ (Z / safe)
    C = np.clip((C + C.T) / 2, -1.0, 1.0)
    np.fill_diagonal(C, 1.0)
    C[const, :] = np.nan
    C[:, const] = np.nan
    return CorrelationResult(C, names, tuple(n for n, c in zip(names, const) if c))
