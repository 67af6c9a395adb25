"""Cross-sectional aggregation of abnormal returns and volumes.

A panel is an ``(events x offsets)`` array; NaN marks an unavailable cell.
Inference is the Brown-Warner cross-sectional t-test: the standard error at
an offset (or over a window) is the sample standard deviation of the event
values divided by sqrt(n), with n - 1 degrees of freedom.  p-values are
one-sided in the direction of the estimate unless ``two_sided`` is set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, InsufficientBaselineError

DAILY_WINDOWS = ((-10, 10), (-5, 5), (-3, 3), (0, 1), (0, 2), (0, 3), (0, 5), (0, 7), (0, 10), (11, 21), (21, 30))
INTRADAY_OFFSETS = tuple(range(0, 60, 5)) + tuple(range(60, 481, 60))
INTRADAY_BASELINE_BARS = 96
DAILY_BASELINE_DAYS = 20


@dataclass(frozen=True)
class Inference:
    n: int
    estimate: float
    std_err: float
    t_stat: float
    p_value: float

    @property
    def available(self) -> bool:
        return self.n >= 2 and not math.isnan(self.t_stat)


def one_sided_p(t: float, df: int) -> float:
    """Upper-tail probability of |t|: the one-sided p in the direction of t."""
    return float(stats.t.sf(abs(t), df))


def t_test(values, *, two_sided: bool = False) -> Inference:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    n = v.size
    if n == 0:
        return Inference(0, math.nan, math.nan, math.nan, math.nan)
    est = float(np.mean(v))
    if n < 2:
        return Inference(n, est, math.nan, math.nan, math.nan)
    sd = float(np.std(v, ddof=1))
    # identical inputs leave rounding dust in the variance
    if sd <= 1e-13 * max(abs(est), 1e-300):
        se = 0.0
        t = 0.0 if est == 0 else math.copysign(math.inf, est)
        p = 0.5 if est == 0 else 0.0
    else:
        se = sd / math.sqrt(n)
        t = est / se
        p = one_sided_p(t, n - 1)
    if two_sided:
        p = min(1.0, 2 * p)
    return Inference(n, est, se, t, p)


@dataclass(frozen=True)
class EventMeta:
    event_id: str
    ticker: str = ""
    role: str = "leak"
    timing: str = ""
    sector: str = ""
    region: str = ""


@dataclass
class EventPanel:
    offsets: np.ndarray
    values: np.ndarray
    events: tuple = ()
    excluded: list = field(default_factory=list)  # (event_id, reason)

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=int)
        self.values = np.asarray(self.values, dtype=float).reshape(-1, self.offsets.size)
        if not self.events:
            self.events = tuple(EventMeta(str(i)) for i in range(self.values.shape[0]))
        if len(self.events) != self.values.shape[0]:
            raise DomainError("one EventMeta per panel row is required")

    @property
    def n_events(self) -> int:
        return self.values.shape[0]

    def col(self, t: int) -> np.ndarray:
        hits = np.flatnonzero(self.offsets == t)
        if hits.size == 0:
            raise DomainError(f"offset {t} is not on the panel grid")
        return self.values[:, hits[0]]

    def subset(self, mask) -> "EventPanel":
        mask = np.asarray(mask, dtype=bool)
        return EventPanel(self.offsets, self.values[mask], tuple(e for e, m in zip(self.events, mask) if m))

    def availability(self) -> np.ndarray:
        return np.isfinite(self.values)


def aar(panel: EventPanel, t: int, *, two_sided: bool = False) -> Inference:
    return t_test(panel.col(t), two_sided=two_sided)


def car_values(panel: EventPanel, window: tuple) -> np.ndarray:
    """Per-event sum over ``[a, b]``; NaN for events missing any day (complete case)."""
    a, b = window
    if a > b:
        raise DomainError(f"window [{a}, {b}] is reversed")
    cols = np.flatnonzero((panel.offsets >= a) & (panel.offsets <= b))
    if cols.size != b - a + 1:
        raise DomainError(f"window [{a}, {b}] is not inside the panel grid")
    block = panel.values[:, cols]
    out = block.sum(axis=1)
    out[~np.all(np.isfinite(block), axis=1)] = np.nan
    return out


def caar(panel: EventPanel, window: tuple, *, two_sided: bool = False) -> Inference:
    return t_test(car_values(panel, window), two_sided=two_sided)


def split_window(outer: tuple, outer_value: float, inner: tuple, inner_value: float) -> tuple[tuple, float]:
    """CAAR over ``outer`` minus ``inner`` when the two share an endpoint.

    Returns the remaining window and its cumulative value, e.g. [-3,3] and
    [0,3] give [-3,-1].
    """
    (a, b), (c, d) = outer, inner
    if not (a <= c <= d <= b):
        raise DomainError(f"{inner} is not contained in {outer}")
    if (c, d) == (a, b):
        raise DomainError("windows are identical; nothing remains")
    if d == b:
        rest = (a, c - 1)
    elif c == a:
        rest = (d + 1, b)
    else:
        raise DomainError(f"{inner} must share an endpoint with {outer}")
    return rest, outer_value - inner_value


# --------------------------------------------------------------------------- grouping

def split_groups(panel: EventPanel, split: str) -> list[tuple[str, EventPanel]]:
    if split == "all":
        return [("All", panel)]
    attr, labels = {
        "timing": ("timing", ("EarlyMarket", "LateMarket")),
        "sector": ("sector", ("Financial", "NonFinancial")),
    }[split]
    return [(lab, panel.subset([getattr(e, attr) == lab for e in panel.events])) for lab in labels]


@dataclass(frozen=True)
class StudyRow:
    group: str
    window: str
    stat: Inference
    display_pct: Optional[float] = None  # volume tables: 100 * (exp(estimate) - 1)

    @property
    def log_points_pct(self) -> float:
        return 100.0 * self.stat.estimate


def window_label(w) -> str:
    return f"[{w[0]},{w[1]}]" if isinstance(w, tuple) else str(w)


def daily_caar_table(panel: EventPanel, windows: Iterable[tuple] = DAILY_WINDOWS, split: str = "all",
                     *, two_sided: bool = False) -> list[StudyRow]:
    rows = []
    for label, sub in split_groups(panel, split):
        for w in windows:
            rows.append(StudyRow(label, window_label(w), caar(sub, tuple(w), two_sided=two_sided)))
    return rows


def daily_aar_table(panel: EventPanel, days: Iterable[int] = range(0, 11), split: str = "all",
                    *, two_sided: bool = False) -> list[StudyRow]:
    return [
        StudyRow(label, str(t), aar(sub, t, two_sided=two_sided))
        for label, sub in split_groups(panel, split)
        for t in days
    ]


def intraday_caar(panel: EventPanel, offsets: Sequence[int] = INTRADAY_OFFSETS, split: str = "all",
                  *, two_sided: bool = False) -> list[StudyRow]:
    """Cumulative abnormal return from minute 0 to each offset (minutes).

    Panel cells already hold each event's cumulative AR since minute 0, so the
    estimate at an offset is a cross-sectional mean over the events still in
    session.  Minute 0 reports n only.
    """
    rows = []
    for label, sub in split_groups(panel, split):
        for k in offsets:
            col = sub.col(k)
            if k == 0:
                n = int(np.isfinite(col).sum())
                rows.append(StudyRow(label, "0", Inference(n, math.nan, math.nan, math.nan, math.nan)))
            else:
                rows.append(StudyRow(label, str(k), t_test(col, two_sided=two_sided)))
    return rows


# --------------------------------------------------------------------------- volume

def log_turnover(volume: float, shares_outstanding: Optional[float] = None, scope: str = "daily") -> float:
    """Daily: ln(volume / shares).  Intraday: ln(1 + volume), defined on quiet bars."""
    if scope == "daily":
        if not (volume > 0 and shares_outstanding is not None and shares_outstanding > 0):
            raise DomainError(f"daily turnover undefined for volume={volume}, shares={shares_outstanding}")
        return math.log(volume / shares_outstanding)
    if scope == "intraday":
        if not volume >= 0:
            raise DomainError(f"negative volume {volume}")
        return math.log1p(volume)
    raise DomainError(f"unknown turnover scope {scope!r}")


def abnormal_volume(event_tau: float, baseline_tau: Sequence[float], T: int) -> float:
    """Event log turnover minus the mean over the last ``T`` baseline periods.

    NaN entries in the baseline are invalid periods; at least ``T/2`` valid
    ones are required.
    """
    base = np.asarray(baseline_tau, dtype=float)[-T:]
    valid = base[np.isfinite(base)]
    if valid.size < T / 2:
        raise InsufficientBaselineError(f"{valid.size} valid baseline periods, need {T / 2:g}", valid=int(valid.size))
    return float(event_tau - np.mean(valid))


def volume_display_pct(log_points: float) -> float:
    return 100.0 * math.expm1(log_points)


def aav_caav(panel: EventPanel, offsets: Optional[Sequence[int]] = None, split: str = "all",
             *, cumulative: bool = True, two_sided: bool = False) -> list[tuple[StudyRow, Optional[StudyRow]]]:
    """AAV at each offset and, when ``cumulative``, the CAAV from the first offset."""
    offsets = list(panel.offsets if offsets is None else offsets)
    out = []
    for label, sub in split_groups(panel, split):
        for k in offsets:
            s = aar(sub, k, two_sided=two_sided)
            row = StudyRow(label, str(k), s, volume_display_pct(s.estimate) if s.n else None)
            crow = None
            if cumulative:
                c = caar(sub, (offsets[0], k), two_sided=two_sided)
                crow = StudyRow(label, window_label((offsets[0], k)), c, volume_display_pct(c.estimate) if c.n else None)
            out.append((row, crow))
    return out
