"""CSV loading and validation, USD rebasing, and firm fundamentals preparation.

Every loader goes through :func:`load_table`, which is the single place where
rows are parsed and type invariants enforced.  Errors carry the 1-based row
number (the header is row 1) and the column name.
"""

from __future__ import annotations

import bisect
import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, time
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .core import (
    BondAnnouncement,
    DailyBar,
    ExchangeCalendar,
    FactorRow,
    Headline,
    IntradayBar,
    SectorClass,
    SecurityRecord,
)
from .errors import DomainError, FxGapError, IngestError, InsufficientHistoryError

FIRST_DAYS_RULE = 45  # announcements on day-of-year <= 45 use trailing-12M figures
HISTORY_YEARS = 3


# --------------------------------------------------------------------------- parsers

def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in {"1", "true", "t", "yes", "y"}:
        return True
    if t in {"0", "false", "f", "no", "n"}:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_date(text: str) -> date:
    return date.fromisoformat(text.strip())


def parse_instant(text: str) -> datetime:
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    ts = datetime.fromisoformat(t)
    if ts.tzinfo is None:
        raise ValueError(f"instant {text!r} has no zone offset")
    return ts


def parse_time(text: str) -> time:
    return time.fromisoformat(text.strip())


def parse_float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite number {text!r}")
    return v


def parse_list(text: str) -> tuple:
    return tuple(p.strip() for p in text.replace(",", ";").split(";") if p.strip())


def optional(parser: Callable) -> Callable:
    def parse(text: str):
        return None if text.strip() == "" else parser(text)

    return parse


# --------------------------------------------------------------------------- generic loader

@dataclass(frozen=True)
class Schema:
    """Column parsers plus a builder turning the parsed row into a record."""

    name: str
    required: Mapping[str, Callable]
    build: Callable[[dict], object]
    optional: Mapping[str, Callable] = None


def load_table(path, schema: Schema) -> list:
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path} does not exist", file=str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in schema.required if c not in header]
        if missing:
            raise IngestError(f"{path.name}: missing column(s) {', '.join(missing)}", file=path.name)
        opt = {c: p for c, p in (schema.optional or {}).items() if c in header}
        out = []
        for rownum, raw in enumerate(reader, start=2):
            parsed = {}
            for col, parser in list(schema.required.items()) + list(opt.items()):
                cell = raw.get(col)
                if cell is None:
                    raise IngestError(f"{path.name} row {rownum}: short row", file=path.name, row=rownum)
                try:
                    parsed[col] = parser(cell)
                except (ValueError, TypeError) as exc:
                    raise IngestError(
                        f"{path.name} row {rownum} column {col}: unparsable cell {cell!r} ({exc})",
                        file=path.name,
                        row=rownum,
                        column=col,
                    ) from exc
            try:
                out.append(schema.build(parsed))
            except DomainError as exc:
                raise IngestError(f"{path.name} row {rownum}: {exc}", file=path.name, row=rownum) from exc
        return out


# --------------------------------------------------------------------------- file schemas

@dataclass(frozen=True)
class TickerBar:
    ticker: str
    bar: object


@dataclass(frozen=True)
class FxRate:
    pair: str
    timestamp: datetime
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"fx rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class FilingRecord:
    ticker: str
    fiscal_year: int
    mktcap: float
    assets: float
    roa: float
    de: float
    fcf: float
    first_time_issuer: bool
    period: str = "FY"

    def __post_init__(self):
        if self.period not in ("FY", "TTM"):
            raise DomainError(f"period must be FY or TTM, got {self.period!r}")
        if not self.assets > 0:
            raise DomainError("assets must be positive")
        if not self.mktcap > 0:
            raise DomainError("mktcap must be positive")


DAILY_SCHEMA = Schema(
    "prices_daily",
    {"ticker": str.strip, "date": parse_date, "close": parse_float, "volume": parse_float,
     "shares_outstanding": parse_float},
    lambda r: TickerBar(r["ticker"], DailyBar(r["date"], r["close"], r["volume"], r["shares_outstanding"])),
)

INTRADAY_SCHEMA = Schema(
    "prices_intraday",
    {"ticker": str.strip, "timestamp": parse_instant, "price": parse_float, "volume": parse_float},
    lambda r: TickerBar(r["ticker"], IntradayBar(r["timestamp"], r["price"], r["volume"])),
)


def _factor_schema(scale: float) -> Schema:
    def build(r):
        mom = r.get("mom")
        return FactorRow(
            r["date"], r["mkt_rf"] * scale, r["smb"] * scale, r["hml"] * scale, r["rf"] * scale,
            None if mom is None else mom * scale,
        )

    return Schema(
        "factors",
        {"date": parse_date, "mkt_rf": parse_float, "smb": parse_float, "hml": parse_float, "rf": parse_float},
        build,
        {"mom": optional(parse_float)},
    )


HEADLINE_SCHEMA = Schema(
    "headlines",
    {"feed": str.strip, "timestamp": parse_instant, "headline": str, "article_chars": int,
     "tickers": parse_list, "green_label": parse_bool},
    lambda r: Headline(r["feed"], r["timestamp"], r["headline"], r["article_chars"], r["tickers"], r["green_label"]),
)

ANNOUNCEMENT_SCHEMA = Schema(
    "announcements",
    {"ticker": str.strip, "announce_date": parse_date, "currency": str.strip, "amount": parse_float,
     "maturity_date": optional(parse_date), "perpetual": parse_bool, "coupon_pct": parse_float,
     "has_option": parse_bool, "yield": optional(parse_float)},
    lambda r: BondAnnouncement(
        r["ticker"], r["announce_date"], r["currency"].upper(), r["amount"], r["maturity_date"],
        r["perpetual"], r["coupon_pct"], r["has_option"], r["yield"],
    ),
)

FUNDAMENTALS_SCHEMA = Schema(
    "fundamentals",
    {"ticker": str.strip, "fiscal_year": int, "mktcap": parse_float, "assets": parse_float, "roa": parse_float,
     "de": parse_float, "fcf": parse_float, "first_time_issuer": parse_bool},
    lambda r: FilingRecord(
        r["ticker"], r["fiscal_year"], r["mktcap"], r["assets"], r["roa"], r["de"], r["fcf"],
        r["first_time_issuer"], (r.get("period") or "FY").upper(),
    ),
    {"period": str.strip},
)

FX_SCHEMA = Schema(
    "fx",
    {"pair": lambda s: s.strip().upper().replace("/", ""), "timestamp": parse_instant, "rate": parse_float},
    lambda r: FxRate(r["pair"], r["timestamp"], r["rate"]),
)


def _parse_early_closes(text: str) -> dict:
    out = {}
    for item in parse_list(text):
        d, _, t = item.partition("@")
        out[parse_date(d)] = parse_time(t)
    return out


CALENDAR_SCHEMA = Schema(
    "calendar",
    {"exchange_id": str.strip, "timezone": str.strip, "open": parse_time, "close": parse_time,
     "holiday_dates": lambda s: frozenset(parse_date(x) for x in parse_list(s))},
    lambda r: _build_calendar(r),
    {"early_closes": _parse_early_closes, "weekend_days": lambda s: frozenset(int(x) for x in parse_list(s)),
     "coverage_start": optional(parse_date), "coverage_end": optional(parse_date)},
)


def _build_calendar(r: dict) -> ExchangeCalendar:
    try:
        return ExchangeCalendar(
            r["exchange_id"], r["timezone"], r["open"], r["close"], r["holiday_dates"],
            r.get("weekend_days") or frozenset({5, 6}), r.get("early_closes") or {},
            r.get("coverage_start"), r.get("coverage_end"),
        )
    except Exception as exc:  # zoneinfo raises its own error types
        if isinstance(exc, DomainError):
            raise
        raise DomainError(str(exc)) from exc


SECURITIES_SCHEMA = Schema(
    "securities",
    {"ticker": str.strip, "exchange_id": str.strip, "region": str.strip, "industry": str.strip},
    lambda r: SecurityRecord(
        r["ticker"], r["exchange_id"], r["region"], SectorClass.from_industry(r["industry"]),
        (r.get("currency") or "USD").upper(),
    ),
    {"currency": str.strip},
)


# --------------------------------------------------------------------------- typed loaders

def _group(rows: Iterable[TickerBar], key) -> dict:
    out = defaultdict(list)
    for tb in rows:
        out[tb.ticker].append(tb.bar)
    for bars in out.values():
        bars.sort(key=key)
    return dict(out)


def load_daily_prices(path) -> dict[str, list[DailyBar]]:
    grouped = _group(load_table(path, DAILY_SCHEMA), key=lambda b: b.date)
    for ticker, bars in grouped.items():
        for a, b in zip(bars, bars[1:]):
            if a.date == b.date:
                raise IngestError(f"duplicate daily bar for {ticker} on {a.date}", file=str(path))
    return grouped


def load_intraday_prices(path) -> dict[str, list[IntradayBar]]:
    grouped = _group(load_table(path, INTRADAY_SCHEMA), key=lambda b: b.timestamp)
    for ticker, bars in grouped.items():
        for a, b in zip(bars, bars[1:]):
            if a.timestamp == b.timestamp:
                raise IngestError(f"duplicate intraday bar for {ticker} at {a.timestamp}", file=str(path))
    return grouped


def load_factors(path, units: str = "decimal") -> dict[date, FactorRow]:
    if units not in ("decimal", "percent"):
        raise IngestError(f"factor units must be decimal or percent, got {units!r}")
    rows = load_table(path, _factor_schema(0.01 if units == "percent" else 1.0))
    return {r.date: r for r in rows}


def load_headlines(path) -> list[Headline]:
    return load_table(path, HEADLINE_SCHEMA)


def load_announcements(path) -> list[BondAnnouncement]:
    return load_table(path, ANNOUNCEMENT_SCHEMA)


def load_fundamentals(path) -> dict[str, list[FilingRecord]]:
    out = defaultdict(list)
    for rec in load_table(path, FUNDAMENTALS_SCHEMA):
        out[rec.ticker].append(rec)
    return dict(out)


def load_calendars(path) -> dict[str, ExchangeCalendar]:
    return {c.exchange_id: c for c in load_table(path, CALENDAR_SCHEMA)}


def load_securities(path) -> dict[str, SecurityRecord]:
    return {s.ticker: s for s in load_table(path, SECURITIES_SCHEMA)}


# --------------------------------------------------------------------------- FX

class FxTable:
    """Rates keyed by pair ``XXXUSD`` (USD per unit of XXX), looked up LOCF."""

    def __init__(self, rates: Iterable[FxRate] = ()):
        series = defaultdict(list)
        for r in rates:
            series[r.pair].append((r.timestamp, r.rate))
        self._series = {}
        for pair, obs in series.items():
            obs.sort()
            self._series[pair] = ([t for t, _ in obs], [v for _, v in obs])

    @classmethod
    def load(cls, path) -> "FxTable":
        return cls(load_table(path, FX_SCHEMA))

    def rate(self, currency: str, at: datetime) -> float:
        currency = currency.upper()
        if currency == "USD":
            return 1.0
        direct = self._lookup(f"{currency}USD", at)
        if direct is not None:
            return direct
        inverse = self._lookup(f"USD{currency}", at)
        if inverse is not None:
            return 1.0 / inverse
        raise FxGapError(f"no {currency}/USD rate at or before {at.isoformat()}", currency=currency)

    def _lookup(self, pair: str, at: datetime) -> Optional[float]:
        if pair not in self._series:
            return None
        times, values = self._series[pair]
        i = bisect.bisect_right(times, at)
        return values[i - 1] if i else None


def rebase_usd(amount: float, currency: str, leak_ts: datetime, fx: Optional[FxTable]) -> float:
    if currency.upper() == "USD":
        return amount
    if fx is None:
        raise FxGapError(f"no FX table supplied to rebase {currency}", currency=currency)
    return amount * fx.rate(currency, leak_ts)


# --------------------------------------------------------------------------- fundamentals

@dataclass(frozen=True)
class FirmFundamentals:
    fti: bool
    mktcap_usd: float
    assets_usd: float
    fcf_usd: float
    roa: float
    de: float
    tobins_q: float
    basis: str  # "ThreeYearAverage" | "Trailing12M"


def in_first_days(d: date, days: int = FIRST_DAYS_RULE) -> bool:
    return d.timetuple().tm_yday <= days


def macaulay_perpetual(yield_: float) -> float:
    """Duration proxy for a perpetual bond, in years."""
    if not yield_ > 0:
        raise DomainError(f"perpetual yield must be positive, got {yield_}")
    return (1.0 + yield_) / yield_


def prepare_fundamentals(
    filings: Sequence[FilingRecord],
    announcement_date: date,
    *,
    currency: str = "USD",
    leak_ts: Optional[datetime] = None,
    fx: Optional[FxTable] = None,
) -> FirmFundamentals:
    """Average the three fiscal years before the announcement.

    Announcements in the first 45 days of a year use the trailing-12M filing
    (``period == "TTM"``) tagged with the announcement year, because the
    previous annual report was not yet public.
    """
    year = announcement_date.year
    if in_first_days(announcement_date):
        ttm = [f for f in filings if f.period == "TTM" and f.fiscal_year == year]
        if not ttm:
            raise InsufficientHistoryError(
                f"announcement on {announcement_date} needs a trailing-12M filing for {year}"
            )
        rows, basis = ttm[-1:], "Trailing12M"
    else:
        fy = sorted((f for f in filings if f.period == "FY" and f.fiscal_year < year), key=lambda f: f.fiscal_year)
        if len(fy) < HISTORY_YEARS:
            raise InsufficientHistoryError(
                f"only {len(fy)} fiscal year(s) before {announcement_date}, need {HISTORY_YEARS}"
            )
        rows, basis = fy[-HISTORY_YEARS:], "ThreeYearAverage"

    def mean(attr):
        return math.fsum(getattr(r, attr) for r in rows) / len(rows)

    if currency.upper() != "USD" and leak_ts is None:
        raise FxGapError("leak timestamp required to rebase non-USD fundamentals", currency=currency)
    scale = rebase_usd(1.0, currency, leak_ts, fx) if currency.upper() != "USD" else 1.0
    mktcap = mean("mktcap") * scale
    assets = mean("assets") * scale
    latest = max(rows, key=lambda r: r.fiscal_year)
    return FirmFundamentals(
        fti=latest.first_time_issuer,
        mktcap_usd=mktcap,
        assets_usd=assets,
        fcf_usd=mean("fcf") * scale,
        roa=mean("roa"),
        de=mean("de"),
        tobins_q=mktcap / assets,
        basis=basis,
    )
