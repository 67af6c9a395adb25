"""Build event panels (abnormal returns / abnormal volumes) from bar data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import BAR_MINUTES, DailyBar, ExchangeCalendar, FactorRow, IntradayBar, ReturnObservation
from .errors import InsufficientBaselineError, LeakStudyError
from .eventstudy import (
    DAILY_BASELINE_DAYS,
    INTRADAY_BASELINE_BARS,
    EventMeta,
    EventPanel,
    abnormal_volume,
    log_turnover,
)
from .factors import ModelKind, ModelSpec, abnormal_return, fit_model

DAILY_OFFSETS = tuple(range(-10, 31))
INTRADAY_GRID = tuple(range(0, 481, BAR_MINUTES))


@dataclass(frozen=True)
class EventInput:
    """One event to place on a panel.

    ``anchor`` is day 0 for daily panels; ``start`` (minute 0) and ``calendar``
    are needed only for intraday panels.
    """

    meta: EventMeta
    ticker: str
    market: str
    anchor: date
    start: Optional[datetime] = None
    calendar: Optional[ExchangeCalendar] = None
    factors: Optional[Mapping[date, FactorRow]] = None


def return_observations(
    bars: Sequence[DailyBar],
    market_bars: Sequence[DailyBar],
    factors: Optional[Mapping[date, FactorRow]] = None,
) -> list[ReturnObservation]:
    """Close-to-close returns on dates where both series trade on consecutive rows."""
    mkt = {}
    for a, b in zip(market_bars, market_bars[1:]):
        mkt[b.date] = (a.date, b.close / a.close - 1.0)
    out = []
    for a, b in zip(bars, bars[1:]):
        m = mkt.get(b.date)
        if m is None or m[0] != a.date:
            continue
        rf = 0.0
        if factors is not None and b.date in factors:
            rf = factors[b.date].rf
        out.append(ReturnObservation(b.date, b.close / a.close - 1.0, m[1], rf))
    return out


def daily_return_panel(
    events: Sequence[EventInput],
    prices: Mapping[str, Sequence[DailyBar]],
    spec: ModelSpec,
    offsets: Sequence[int] = DAILY_OFFSETS,
) -> EventPanel:
    """Abnormal returns at each relative trading day.

    Events whose model cannot be fitted are listed in ``panel.excluded`` with
    the error code, not silently dropped.
    """
    offsets = np.asarray(offsets, dtype=int)
    rows, metas, excluded = [], [], []
    for ev in events:
        try:
            if ev.ticker not in prices or ev.market not in prices:
                raise LeakStudyError(f"no daily prices for {ev.ticker if ev.ticker not in prices else ev.market}")
            obs = return_observations(prices[ev.ticker], prices[ev.market], ev.factors)
            fit = fit_model(spec, obs, ev.factors, ev.anchor)
        except LeakStudyError as exc:
            excluded.append((ev.meta.event_id, exc.code))
            continue
        dates = np.array([o.date for o in obs], dtype="datetime64[D]")
        i0 = int(np.searchsorted(dates, np.datetime64(ev.anchor, "D")))
        row = np.full(offsets.size, np.nan)
        for j, k in enumerate(offsets):
            i = i0 + k
            if not 0 <= i < len(obs):
                continue
            o = obs[i]
            frow = None if ev.factors is None else ev.factors.get(o.date)
            if spec.kind in (ModelKind.FF3, ModelKind.CARHART) and frow is None:
                continue
            row[j] = abnormal_return(fit, o, frow)
        rows.append(row)
        metas.append(ev.meta)
    values = np.array(rows) if rows else np.empty((0, offsets.size))
    return EventPanel(offsets, values, tuple(metas), excluded)


def daily_volume_panel(
    events: Sequence[EventInput],
    prices: Mapping[str, Sequence[DailyBar]],
    offsets: Sequence[int] = tuple(range(0, 11)),
    baseline: int = DAILY_BASELINE_DAYS,
) -> EventPanel:
    """Abnormal log turnover versus the mean over the ``baseline`` days before day 0."""
    offsets = np.asarray(offsets, dtype=int)
    rows, metas, excluded = [], [], []
    for ev in events:
        bars = prices.get(ev.ticker)
        if not bars:
            excluded.append((ev.meta.event_id, "DATA"))
            continue
        tau = np.array([
            log_turnover(b.volume, b.shares_outstanding) if b.volume > 0 else np.nan for b in bars
        ])
        i0 = int(np.searchsorted(np.array([b.date for b in bars], dtype="datetime64[D]"),
                                 np.datetime64(ev.anchor, "D")))
        base = tau[max(i0 - baseline, 0):i0]
        if base.size < baseline:
            base = np.concatenate([np.full(baseline - base.size, np.nan), base])
        try:
            level = -abnormal_volume(0.0, base, baseline)
        except InsufficientBaselineError as exc:
            excluded.append((ev.meta.event_id, exc.code))
            continue
        row = np.full(offsets.size, np.nan)
        for j, k in enumerate(offsets):
            i = i0 + k
            if 0 <= i < len(bars) and np.isfinite(tau[i]):
                row[j] = tau[i] - level
        rows.append(row)
        metas.append(ev.meta)
    values = np.array(rows) if rows else np.empty((0, offsets.size))
    return EventPanel(offsets, values, tuple(metas), excluded)


def _session_marks(bars: Sequence[IntradayBar], start: datetime, close: datetime, grid: Sequence[int]):
    """Bars at each grid minute from ``start``; None once a bar is missing or the session is over."""
    by_ts = {b.timestamp: b for b in bars}
    marks, alive = [], True
    for k in grid:
        ts = start + timedelta(minutes=int(k))
        bar = by_ts.get(ts) if alive and ts < close else None
        if bar is None:
            alive = False
        marks.append(bar)
    return marks


def intraday_return_panel(
    events: Sequence[EventInput],
    intraday: Mapping[str, Sequence[IntradayBar]],
    grid: Sequence[int] = INTRADAY_GRID,
) -> EventPanel:
    """Cumulative market-adjusted return from minute 0 to each grid minute.

    Availability ends at the first missing bar or at the session close, so it
    is monotone in elapsed time.
    """
    grid = np.asarray(grid, dtype=int)
    rows, metas, excluded = [], [], []
    for ev in events:
        bars, mbars = intraday.get(ev.ticker), intraday.get(ev.market)
        if not bars or not mbars:
            excluded.append((ev.meta.event_id, "DATA"))
            continue
        close = ev.calendar.session_bounds(ev.calendar.local_date(ev.start))[1]
        eq = _session_marks(bars, ev.start, close, grid)
        mk = _session_marks(mbars, ev.start, close, grid)
        row = np.full(grid.size, np.nan)
        car = 0.0
        for j in range(grid.size):
            if eq[j] is None or mk[j] is None:
                break
            if j > 0:
                car += (eq[j].price / eq[j - 1].price - 1.0) - (mk[j].price / mk[j - 1].price - 1.0)
            row[j] = car
        if math.isnan(row[0]):
            excluded.append((ev.meta.event_id, "DATA"))
            continue
        rows.append(row)
        metas.append(ev.meta)
    values = np.array(rows) if rows else np.empty((0, grid.size))
    return EventPanel(grid, values, tuple(metas), excluded)


def intraday_volume_panel(
    events: Sequence[EventInput],
    intraday: Mapping[str, Sequence[IntradayBar]],
    grid: Sequence[int] = INTRADAY_GRID,
    baseline: int = INTRADAY_BASELINE_BARS,
) -> EventPanel:
    """Abnormal ln(1 + volume) per 5-minute bar against the ``baseline`` bars before minute 0."""
    grid = np.asarray(grid, dtype=int)
    rows, metas, excluded = [], [], []
    for ev in events:
        bars = intraday.get(ev.ticker)
        if not bars:
            excluded.append((ev.meta.event_id, "DATA"))
            continue
        before = [log_turnover(b.volume, scope="intraday") for b in bars if b.timestamp < ev.start][-baseline:]
        before = [math.nan] * (baseline - len(before)) + before
        close = ev.calendar.session_bounds(ev.calendar.local_date(ev.start))[1]
        marks = _session_marks(bars, ev.start, close, grid)
        row = np.full(grid.size, np.nan)
        try:
            for j, bar in enumerate(marks):
                if bar is None:
                    break
                row[j] = abnormal_volume(log_turnover(bar.volume, scope="intraday"), before, baseline)
            if math.isnan(row[0]):
                raise LeakStudyError("no bar at minute 0")
        except LeakStudyError as exc:
            excluded.append((ev.meta.event_id, exc.code))
            continue
        rows.append(row)
        metas.append(ev.meta)
    values = np.array(rows) if rows else np.empty((0, grid.size))
    return EventPanel(grid, values, tuple(metas), excluded)
