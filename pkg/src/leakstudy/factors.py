"""Expected-return models and the least-squares machinery behind them."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import linalg, stats

from .core import FactorRow, ReturnObservation
from .errors import DomainError, FactorGapError, SingularDesignError, ThinHistoryError

COND_LIMIT = 1e10
DEFAULT_MIN_OBS = 100
ANNOUNCEMENT_WINDOW = (-310, -11)
LEAK_WINDOW = (-300, -1)


# --------------------------------------------------------------------------- OLS

@dataclass(frozen=True)
class OLSResult:
    coef: np.ndarray
    std_err: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray  # two-sided
    residual_std: float
    r2: float
    f_stat: float
    f_pvalue: float
    n: int
    df_resid: int
    names: tuple
    resid: np.ndarray = field(repr=False)
    has_intercept: bool = False
    cov_type: str = "classical"

    def params(self) -> dict:
        return dict(zip(self.names, self.coef))


def _intercept_columns(X: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.all(X == X[:1], axis=0) & (X[0] != 0))


def ols(
    y,
    X,
    names: Optional[Sequence[str]] = None,
    *,
    cond_limit: float = COND_LIMIT,
    cov_type: str = "classical",
) -> OLSResult:
    """Least squares via a QR factorisation.

    The design is first checked on column-equilibrated singular values; a
    condition number above ``cond_limit`` (or an all-zero column) raises
    :class:`SingularDesignError` naming the columns in the near-null space.
    R-squared is centred when a constant column is present and uncentred
    otherwise; the F statistic tests all non-constant columns jointly.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(p))
    if len(names) != p or y.shape != (n,):
        raise DomainError(f"shape mismatch: y {y.shape}, X {X.shape}, {len(names)} names")
    if n <= p:
        raise SingularDesignError(f"need more rows than columns, got {n} x {p}", columns=",".join(names))
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite values in regression inputs")
    if cov_type not in ("classical", "hc1"):
        raise DomainError(f"unknown cov_type {cov_type!r}")

    norms = np.linalg.norm(X, axis=0)
    zero = [names[j] for j in np.flatnonzero(norms == 0)]
    if zero:
        raise SingularDesignError(f"all-zero column(s): {', '.join(zero)}", columns=",".join(zero))
    _, s, vt = np.linalg.svd(X / norms, full_matrices=False)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    if cond > cond_limit:
        v = np.abs(vt[-1])
        culprits = [names[j] for j in np.flatnonzero(v > 0.1 * v.max())]
        raise SingularDesignError(
            f"design is singular or ill-conditioned (condition {cond:.3g}); collinear columns: {', '.join(culprits)}",
            columns=",".join(culprits),
        )

    q, r = np.linalg.qr(X)
    coef = linalg.solve_triangular(r, q.T @ y)
    resid = y - X @ coef
    df = n - p
    ssr = float(resid @ resid)
    sigma2 = ssr / df
    r_inv = linalg.solve_triangular(r, np.eye(p))
    xtx_inv = r_inv @ r_inv.T
    if cov_type == "classical":
        cov = sigma2 * xtx_inv
    else:
        meat = (X * resid[:, None] ** 2).T @ X
        cov = xtx_inv @ meat @ xtx_inv * n / df
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, coef / se, np.sign(coef) * np.inf)
    t = np.nan_to_num(t, nan=0.0)
    pval = 2.0 * stats.t.sf(np.abs(t), df)

    const = _intercept_columns(X)
    has_intercept = const.size > 0
    if has_intercept:
        sst = float(np.sum((y - y.mean()) ** 2))
    else:
        sst = float(y @ y)
    r2 = 0.0 if sst == 0 else max(0.0, 1.0 - ssr / sst)
    k = p - const.size if has_intercept else p
    if k == 0:
        f_stat, f_p = float("nan"), float("nan")
    elif ssr == 0:
        f_stat, f_p = float("inf"), 0.0
    else:
        f_stat = ((sst - ssr) / k) / sigma2
        f_p = float(stats.f.sf(f_stat, k, df))
    return OLSResult(
        coef=coef, std_err=se, t_stat=t, p_value=pval, residual_std=float(np.sqrt(sigma2)), r2=r2,
        f_stat=float(f_stat), f_pvalue=f_p, n=n, df_resid=df, names=names, resid=resid,
        has_intercept=has_intercept, cov_type=cov_type,
    )


# --------------------------------------------------------------------------- models

class ModelKind(str, enum.Enum):
    MARKET_ADJUSTED = "madj"
    CAPM = "capm"
    FF3 = "ff3"
    CARHART = "carhart"


REGRESSORS = {
    ModelKind.MARKET_ADJUSTED: (),
    ModelKind.CAPM: ("mkt_rf",),
    ModelKind.FF3: ("mkt_rf", "smb", "hml"),
    ModelKind.CARHART: ("mkt_rf", "smb", "hml", "mom"),
}


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    estimation_window: Optional[tuple] = LEAK_WINDOW
    min_obs: int = DEFAULT_MIN_OBS
    intercept: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.kind is ModelKind.MARKET_ADJUSTED:
            return
        if self.estimation_window is None:
            raise DomainError(f"{self.kind.value} needs an estimation window")
        a, b = self.estimation_window
        if not a <= b:
            raise DomainError(f"estimation window [{a}, {b}] is reversed")
        if b >= 0:
            raise DomainError(f"estimation window [{a}, {b}] overlaps the event day")
        if b - a + 1 < self.min_obs:
            raise DomainError(f"estimation window [{a}, {b}] is shorter than min_obs={self.min_obs}")

    @classmethod
    def for_anchor(cls, kind, anchor: str, **kw) -> "ModelSpec":
        window = {"leak": LEAK_WINDOW, "announce": ANNOUNCEMENT_WINDOW}[anchor]
        return cls(ModelKind(kind), window, **kw)


@dataclass(frozen=True)
class ModelFit:
    kind: ModelKind
    betas: tuple  # aligned with REGRESSORS[kind]; (1.0,) on the market for madj
    alpha: float = 0.0
    residual_std: Optional[float] = None
    n_obs: int = 0
    r2: Optional[float] = None
    std_err: tuple = ()

    @property
    def names(self) -> tuple:
        return REGRESSORS[self.kind] or ("mkt",)


def _factor_vector(kind: ModelKind, obs: ReturnObservation, row: Optional[FactorRow]) -> Optional[tuple]:
    """(rf, regressors...) for one period, or None when the factor row is missing."""
    if row is None:
        if kind is ModelKind.CAPM:
            return (obs.rf, obs.r_m - obs.rf)
        return None
    if kind is ModelKind.CARHART and row.mom is None:
        raise FactorGapError(f"momentum factor missing on {row.date}", date=str(row.date))
    vals = {"mkt_rf": row.mkt_rf, "smb": row.smb, "hml": row.hml, "mom": row.mom}
    return (row.rf,) + tuple(vals[k] for k in REGRESSORS[kind])


def window_positions(dates: Sequence[date], anchor: date, window: tuple) -> tuple[int, int, int]:
    """(day-0 index, first, last+1) positions of ``window`` relative to ``anchor``."""
    i0 = int(np.searchsorted(np.array(dates, dtype="datetime64[D]"), np.datetime64(anchor, "D")))
    if i0 >= len(dates):
        raise ThinHistoryError(f"no observation on or after anchor {anchor}")
    lo, hi = i0 + window[0], i0 + window[1] + 1
    return i0, max(lo, 0), max(hi, 0)


def fit_model(
    spec: ModelSpec,
    returns: Sequence[ReturnObservation],
    factors: Optional[Mapping[date, FactorRow]],
    event_anchor: date,
) -> ModelFit:
    """Estimate one model over the estimation window preceding ``event_anchor``.

    Day 0 is the first return observation on or after the anchor; window
    offsets count observations, so non-trading days never enter.  When no
    factor table is supplied, CAPM falls back to ``r_m - rf`` from the
    observations themselves.
    """
    if spec.kind is ModelKind.MARKET_ADJUSTED:
        return ModelFit(spec.kind, (1.0,))
    returns = sorted(returns, key=lambda o: o.date)
    if factors is None and spec.kind is not ModelKind.CAPM:
        raise FactorGapError(f"{spec.kind.value} needs a factor table")
    dates = [o.date for o in returns]
    _, lo, hi = window_positions(dates, event_anchor, spec.estimation_window)
    ys, xs = [], []
    for obs in returns[lo:hi]:
        vec = _factor_vector(spec.kind, obs, None if factors is None else factors.get(obs.date))
        if vec is None:
            continue
        ys.append(obs.r_i - vec[0])
        xs.append(vec[1:])
    if len(ys) < spec.min_obs:
        raise ThinHistoryError(
            f"{len(ys)} aligned observations in window {spec.estimation_window}, need {spec.min_obs}",
            n=len(ys),
        )
    X = np.array(xs, dtype=float)
    names = REGRESSORS[spec.kind]
    # a style factor that is identically zero over the window carries no
    # information; its loading is pinned at 0 so the model nests the smaller one
    keep = np.array([k == 0 or bool(np.any(X[:, k] != 0.0)) for k in range(X.shape[1])])
    Xk, kept = X[:, keep], tuple(n for n, m in zip(names, keep) if m)
    if spec.intercept:
        Xk = np.column_stack([np.ones(len(ys)), Xk])
        kept = ("alpha",) + kept
    res = ols(np.array(ys), Xk, kept)
    coef, se = res.coef, res.std_err
    alpha = 0.0
    if spec.intercept:
        alpha, coef, se = float(coef[0]), coef[1:], se[1:]
    betas, ses = np.zeros(X.shape[1]), np.zeros(X.shape[1])
    betas[keep], ses[keep] = coef, se
    return ModelFit(
        spec.kind, tuple(float(c) for c in betas), alpha, res.residual_std, res.n, res.r2,
        tuple(float(s) for s in ses),
    )


def expected_return(fit: ModelFit, obs: ReturnObservation, factor_row: Optional[FactorRow] = None) -> float:
    if fit.kind is ModelKind.MARKET_ADJUSTED:
        return obs.r_m
    vec = _factor_vector(fit.kind, obs, factor_row)
    if vec is None:
        raise FactorGapError(f"no factor row for {obs.date}", date=str(obs.date))
    return vec[0] + fit.alpha + float(np.dot(fit.betas, vec[1:]))


def abnormal_return(fit: ModelFit, obs: ReturnObservation, factor_row: Optional[FactorRow] = None) -> float:
    return obs.r_i - expected_return(fit, obs, factor_row)
