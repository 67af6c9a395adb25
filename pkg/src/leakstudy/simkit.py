"""Seeded synthetic markets with known loadings and injected event effects.

Random numbers come from numpy's ``Generator`` over the counter-based
Philox4x64-10 bit generator.  Every stream is keyed by ``(seed, stream_id)``
with ``stream_id = 0`` for the factor paths and ``1 + 8*i + k`` for draw
family ``k`` of security ``i`` (0 returns, 1 volumes, 2 intraday, 3 metadata).
A security's draws therefore do not depend on how many other securities are
generated or in which order.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Optional, Sequence
from zoneinfo import ZoneInfo

import numpy as np
from scipy import stats

from .errors import ConfigError, DomainError
from .factors import LEAK_WINDOW, REGRESSORS, ModelKind, ols
from .outputs import write_csv

INDEX_TICKER = "SIMIDX"
EXCHANGE_ID = "SIM"
REGION = "SIM"
TIMEZONE = "Europe/London"
SESSION_OPEN = time(8, 0)
SESSION_CLOSE = time(16, 30)
BARS_PER_SESSION = 102
STREAM_FACTORS = 0
RETURNS, VOLUMES, INTRADAY, META = range(4)


def stream(seed: int, stream_id: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def security_stream(seed: int, i: int, family: int) -> np.random.Generator:
    return stream(seed, 1 + 8 * i + family)


@dataclass(frozen=True)
class Injection:
    unit: str  # "day" or "bar"
    offset: int
    return_bp: float = 0.0
    volume_mult: float = 1.0

    def __post_init__(self):
        if self.unit not in ("day", "bar"):
            raise DomainError(f"injection unit must be day or bar, got {self.unit!r}")
        if not (math.isfinite(self.return_bp) and math.isfinite(self.volume_mult) and self.volume_mult > 0):
            raise DomainError("injection shocks must be finite and multipliers positive")


@dataclass(frozen=True)
class SimSpec:
    seed: int = 0
    n_securities: int = 50
    n_days: int = 400
    event_day: Optional[int] = None  # index of day 0; defaults to n_days - 40
    intraday: bool = False
    beta: float = 1.0
    beta_spread: float = 0.0
    smb: float = 0.0
    hml: float = 0.0
    mom: float = 0.0
    sigma: float = 0.02
    sigma_intraday: float = 0.001
    market_sigma: float = 0.01
    factor_sigma: float = 0.005
    rf: float = 0.0001
    volume_mean: float = 1_000_000.0
    volume_sigma: float = 0.3
    shares_outstanding: float = 100_000_000.0
    financial_share: float = 0.5
    announce_lag: int = 5
    start_date: date = date(2019, 1, 1)
    injections: tuple = ()

    def __post_init__(self):
        if not self.sigma > 0 or not self.sigma_intraday > 0:
            raise DomainError("sigma must be positive")
        if self.n_securities < 1:
            raise DomainError("n_securities must be at least 1")
        object.__setattr__(self, "injections", tuple(self.injections))
        last = max([i.offset for i in self.injections if i.unit == "day"] + [self.announce_lag, 0])
        if not (0 < self.day0 and self.day0 + last < self.n_days):
            raise DomainError(f"event day {self.day0} does not fit in {self.n_days} days")

    @property
    def day0(self) -> int:
        return self.n_days - 40 if self.event_day is None else self.event_day

    def with_seed(self, seed: int) -> "SimSpec":
        return dataclasses.replace(self, seed=seed)


_SPEC_TYPES = {f.name: f.type for f in dataclasses.fields(SimSpec)}


def parse_spec(text: str) -> SimSpec:
    """Parse ``key=value`` lines; ``inject=unit:offset:bp[:mult]`` may repeat."""
    kw, injections = {}, []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (p.strip() for p in line.partition("="))
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value", line=lineno)
        try:
            if key == "inject":
                parts = value.split(":")
                injections.append(Injection(parts[0], int(parts[1]), float(parts[2]),
                                            float(parts[3]) if len(parts) > 3 else 1.0))
            elif key == "event_day":
                kw[key] = int(value)
            elif key == "intraday":
                kw[key] = value.lower() in ("1", "true", "yes")
            elif key == "start_date":
                kw[key] = date.fromisoformat(value)
            elif key in ("seed", "n_securities", "n_days", "announce_lag"):
                kw[key] = int(value)
            elif key in _SPEC_TYPES:
                kw[key] = float(value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}", line=lineno)
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}", line=lineno) from exc
    return SimSpec(injections=tuple(injections), **kw)


# --------------------------------------------------------------------------- daily draws

@dataclass
class DailyDraws:
    dates: list
    mkt_rf: np.ndarray
    smb: np.ndarray
    hml: np.ndarray
    mom: np.ndarray
    rf: np.ndarray
    loadings: np.ndarray  # (n_sec, 4): beta, smb, hml, mom
    returns: np.ndarray  # (n_sec, n_days); column 0 is a zero placeholder
    volumes: np.ndarray  # (n_sec, n_days)

    @property
    def market_returns(self) -> np.ndarray:
        return self.mkt_rf + self.rf


def trading_dates(start: date, n: int) -> list:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def draw_daily(spec: SimSpec, *, with_volumes: bool = True) -> DailyDraws:
    n, m = spec.n_days, spec.n_securities
    g = stream(spec.seed, STREAM_FACTORS)
    mkt_rf = g.normal(0.0003, spec.market_sigma, n)
    smb, hml, mom = (g.normal(0.0, spec.factor_sigma, n) for _ in range(3))
    rf = np.full(n, spec.rf)
    mkt_rf[0] = smb[0] = hml[0] = mom[0] = 0.0

    day_shock = np.zeros(n)
    vol_mult = np.ones(n)
    for inj in spec.injections:
        if inj.unit == "day":
            day_shock[spec.day0 + inj.offset] += inj.return_bp * 1e-4
            vol_mult[spec.day0 + inj.offset] *= inj.volume_mult

    loadings = np.empty((m, 4))
    returns = np.empty((m, n))
    volumes = np.empty((m, n)) if with_volumes else np.empty((m, 0))
    F = np.vstack([mkt_rf, smb, hml, mom])
    for i in range(m):
        g = security_stream(spec.seed, i, RETURNS)
        beta = spec.beta + spec.beta_spread * g.uniform(-1.0, 1.0)
        loadings[i] = (beta, spec.smb, spec.hml, spec.mom)
        eps = g.normal(0.0, spec.sigma, n)
        returns[i] = rf + loadings[i] @ F + eps + day_shock
        if with_volumes:
            gv = security_stream(spec.seed, i, VOLUMES)
            mu = math.log(spec.volume_mean) - spec.volume_sigma ** 2 / 2
            volumes[i] = np.round(np.exp(gv.normal(mu, spec.volume_sigma, n)) * vol_mult)
    returns[:, 0] = 0.0
    return DailyDraws(trading_dates(spec.start_date, n), mkt_rf, smb, hml, mom, rf, loadings, returns, volumes)


# --------------------------------------------------------------------------- full dataset

@dataclass
class SimEvent:
    ticker: str
    leak_ts: datetime
    announce_date: date
    sector: str
    currency: str


@dataclass
class SimData:
    spec: SimSpec
    draws: DailyDraws
    tickers: list
    closes: np.ndarray
    index_closes: np.ndarray
    events: list
    intraday_rows: list = field(default_factory=list)  # (ticker, ts, price, volume)


def _prices(returns: np.ndarray, start: float = 100.0) -> np.ndarray:
    return start * np.cumprod(1.0 + returns, axis=-1)


def generate(spec: SimSpec) -> SimData:
    draws = draw_daily(spec)
    closes = _prices(draws.returns)
    index_closes = _prices(np.concatenate([[0.0], draws.market_returns[1:]]), 1000.0)
    tz = ZoneInfo(TIMEZONE)
    d0 = draws.dates[spec.day0]
    announce = draws.dates[spec.day0 + spec.announce_lag]
    tickers = [f"SIM{i:04d}" for i in range(spec.n_securities)]
    events = []
    for i, t in enumerate(tickers):
        g = security_stream(spec.seed, i, META)
        if g.uniform() < 0.5:
            ts = datetime.combine(d0, time(7, 0), tz) + timedelta(minutes=int(g.integers(0, 60)))
        else:
            ts = datetime.combine(d0, SESSION_OPEN, tz) + timedelta(minutes=int(g.integers(0, 300)))
        sector = "Financial" if g.uniform() < spec.financial_share else "NonFinancial"
        currency = "EUR" if i % 3 == 2 else "USD"
        events.append(SimEvent(t, ts, announce, sector, currency))
    data = SimData(spec, draws, tickers, closes, index_closes, events)
    if spec.intraday:
        data.intraday_rows = _intraday(spec, data)
    return data


def _intraday(spec: SimSpec, data: SimData) -> list:
    """Bars for the two sessions before day 0, day 0 and the session after."""
    tz = ZoneInfo(TIMEZONE)
    days = range(spec.day0 - 2, spec.day0 + 2)
    bar_sigma_m = spec.market_sigma / math.sqrt(BARS_PER_SESSION)
    g = stream(spec.seed, STREAM_FACTORS + 7)
    sessions = {}
    for k in days:
        opened = datetime.combine(data.draws.dates[k], SESSION_OPEN, tz)
        stamps = [opened + timedelta(minutes=5 * j) for j in range(BARS_PER_SESSION)]
        mret = g.normal(0.0, bar_sigma_m, BARS_PER_SESSION)
        sessions[k] = (stamps, mret)
    rows = []
    for k in days:
        stamps, mret = sessions[k]
        prices = data.index_closes[k - 1] * np.cumprod(1.0 + mret)
        rows += [(INDEX_TICKER, ts, float(p), 0.0) for ts, p in zip(stamps, prices)]

    bar_shock = {inj.offset: inj for inj in spec.injections if inj.unit == "bar"}
    mu_v = math.log(spec.volume_mean / BARS_PER_SESSION) - spec.volume_sigma ** 2 / 2
    for i, ev in enumerate(data.events):
        g = security_stream(spec.seed, i, INTRADAY)
        beta = data.draws.loadings[i, 0]
        start = _clock_start(ev.leak_ts)
        for k in days:
            stamps, mret = sessions[k]
            r = beta * mret + g.normal(0.0, spec.sigma_intraday, BARS_PER_SESSION)
            v = np.exp(g.normal(mu_v, spec.volume_sigma, BARS_PER_SESSION))
            for j, ts in enumerate(stamps):
                off = int((ts - start).total_seconds() // 300)
                inj = bar_shock.get(off)
                if inj is not None and ts >= start:
                    r[j] += inj.return_bp * 1e-4
                    v[j] *= inj.volume_mult
            prices = data.closes[i, k - 1] * np.cumprod(1.0 + r)
            rows += [(ev.ticker, ts, float(p), float(round(vol))) for ts, p, vol in zip(stamps, prices, v)]
    return rows


def _clock_start(ts: datetime) -> datetime:
    local = ts.astimezone(ZoneInfo(TIMEZONE))
    opened = datetime.combine(local.date(), SESSION_OPEN, local.tzinfo)
    if local <= opened:
        return opened
    steps = math.ceil((local - opened).total_seconds() / 300)
    return opened + timedelta(minutes=5 * steps)


# --------------------------------------------------------------------------- files

def write_dataset(data: SimData, out_dir) -> dict:
    """Write the dataset in the ingest file formats; returns the run config written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec, dr = data.spec, data.draws
    dates = dr.dates

    write_csv(out / "calendar.csv", ["exchange_id", "timezone", "open", "close", "holiday_dates"],
           [(EXCHANGE_ID, TIMEZONE, SESSION_OPEN.strftime("%H:%M"), SESSION_CLOSE.strftime("%H:%M"), "")])
    write_csv(out / "securities.csv", ["ticker", "exchange_id", "region", "industry", "currency"],
           [(ev.ticker, EXCHANGE_ID, REGION, "bank" if ev.sector == "Financial" else "utilities", ev.currency)
            for ev in data.events])

    def daily_rows():
        for k, d in enumerate(dates):
            yield (INDEX_TICKER, d, float(data.index_closes[k]), 0.0, 1.0)
        for i, t in enumerate(data.tickers):
            for k, d in enumerate(dates):
                yield (t, d, float(data.closes[i, k]), float(dr.volumes[i, k]), float(spec.shares_outstanding))

    write_csv(out / "prices_daily.csv", ["ticker", "date", "close", "volume", "shares_outstanding"], daily_rows())
    write_csv(out / f"factors_{REGION}.csv", ["date", "mkt_rf", "smb", "hml", "mom", "rf"],
           [(d, float(dr.mkt_rf[k]), float(dr.smb[k]), float(dr.hml[k]), float(dr.mom[k]), float(dr.rf[k]))
            for k, d in enumerate(dates)])
    if spec.intraday:
        write_csv(out / "prices_intraday.csv", ["ticker", "timestamp", "price", "volume"], data.intraday_rows)

    tz = ZoneInfo(TIMEZONE)
    headlines, bonds, funds, fx = [], [], [], []
    for i, ev in enumerate(data.events):
        g = security_stream(spec.seed, i, META)
        g.uniform(size=2)
        text = f"{ev.ticker} Mandates Banks; Mandate for Green Bond Issue"
        headlines.append(("BN", ev.leak_ts, text, 900, ev.ticker, True))
        headlines.append(("BFW", ev.leak_ts + timedelta(minutes=1), text, 400, ev.ticker, True))
        headlines.append(("BN", ev.leak_ts + timedelta(days=3), f"{ev.ticker} Green Bond Mandate Update", 700,
                          ev.ticker, True))
        headlines.append(("BN", ev.leak_ts - timedelta(days=20), f"{ev.ticker} Green Bond Priced", 500,
                          ev.ticker, True))
        for b in range(1 + int(g.integers(0, 3))):
            perpetual = bool(g.uniform() < 0.1)
            maturity = None if perpetual else ev.announce_date + timedelta(days=int(365 * g.integers(2, 15)))
            bonds.append((ev.ticker, ev.announce_date, ev.currency, float(round(g.uniform(50, 900), 2)), maturity or "",
                          perpetual, float(round(g.uniform(0, 6), 3)), bool(g.uniform() < 0.4),
                          float(round(g.uniform(0.03, 0.07), 4)) if perpetual else ""))
        mk = float(round(np.exp(g.normal(9, 1)), 2))
        for fy in range(ev.announce_date.year - 4, ev.announce_date.year):
            funds.append((ev.ticker, fy, float(round(mk * g.uniform(0.8, 1.2), 2)),
                          float(round(mk * g.uniform(1, 10), 2)), float(round(g.normal(3, 3), 3)),
                          float(round(abs(g.normal(2, 2)), 3)), float(round(g.normal(500, 3000), 2)),
                          bool(g.uniform() < 0.5), "FY"))
        funds.append((ev.ticker, ev.announce_date.year, float(round(mk, 2)), float(round(mk * 4, 2)),
                      3.0, 2.0, 100.0, True, "TTM"))
    for k, d in enumerate(dates):
        fx.append(("EURUSD", datetime.combine(d, time(0, 0), tz), float(round(1.1 + 0.01 * math.sin(k / 20), 6))))

    write_csv(out / "headlines.csv", ["feed", "timestamp", "headline", "article_chars", "tickers", "green_label"],
           headlines)
    write_csv(out / "announcements.csv", ["ticker", "announce_date", "currency", "amount", "maturity_date", "perpetual",
                                       "coupon_pct", "has_option", "yield"], bonds)
    write_csv(out / "fundamentals.csv", ["ticker", "fiscal_year", "mktcap", "assets", "roa", "de", "fcf",
                                      "first_time_issuer", "period"], funds)
    write_csv(out / "fx.csv", ["pair", "timestamp", "rate"], fx)
    write_csv(out / "truth.csv", ["ticker", "leak_ts", "announce_date", "sector", "beta", "smb", "hml", "mom"],
           [(ev.ticker, ev.leak_ts, ev.announce_date, ev.sector, *map(float, data.draws.loadings[i]))
            for i, ev in enumerate(data.events)])

    config = {
        "headlines": "headlines.csv",
        "announcements": "announcements.csv",
        "calendars": "calendar.csv",
        "securities": "securities.csv",
        "prices_daily": "prices_daily.csv",
        "fundamentals": "fundamentals.csv",
        "fx": "fx.csv",
        "factor_files": {REGION: f"factors_{REGION}.csv"},
        "market_index": {EXCHANGE_ID: INDEX_TICKER},
        "seed": spec.seed,
    }
    if spec.intraday:
        config["prices_intraday"] = "prices_intraday.csv"
    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return config


# --------------------------------------------------------------------------- power / size

@dataclass(frozen=True)
class PowerRow:
    label: str
    model: str
    shock_bp: float
    day: int
    trials: int
    n: int
    rejection_rate: float
    mean_estimate: float
    coverage_2se: float


def event_abnormal_returns(spec: SimSpec, model, day: int) -> np.ndarray:
    """Abnormal return at ``day`` for every security, estimated as the pipeline would."""
    kind = ModelKind(model)
    dr = draw_daily(spec, with_volumes=False)
    t = spec.day0 + day
    r_m = dr.market_returns
    if kind is ModelKind.MARKET_ADJUSTED:
        return dr.returns[:, t] - r_m[t]
    lo, hi = spec.day0 + LEAK_WINDOW[0], spec.day0 + LEAK_WINDOW[1] + 1
    lo = max(lo, 1)
    cols = {"mkt_rf": dr.mkt_rf, "smb": dr.smb, "hml": dr.hml, "mom": dr.mom}
    F = np.column_stack([cols[c] for c in REGRESSORS[kind]])
    # every security shares the factor design, so one multi-column solve fits them all
    ols(dr.returns[0, lo:hi] - dr.rf[lo:hi], F[lo:hi], REGRESSORS[kind])  # conditioning guard
    Y = (dr.returns[:, lo:hi] - dr.rf[lo:hi]).T
    coef = np.linalg.lstsq(F[lo:hi], Y, rcond=None)[0]
    return dr.returns[:, t] - (dr.rf[t] + F[t] @ coef)


def power_size(
    grid: Sequence[SimSpec],
    model="capm",
    alpha: float = 0.05,
    trials: int = 200,
    *,
    day: Optional[int] = None,
    alternative: Optional[str] = None,
    labels: Optional[Sequence[str]] = None,
) -> list[PowerRow]:
    """Empirical rejection rates of the AAR t-test over seeded trials.

    Trial ``j`` of a spec reruns it with seed ``spec.seed * 100003 + j``.  The
    test direction defaults to the sign of the injected shock (``less`` for a
    null injection), so the null rejection rate targets ``alpha``.
    """
    if trials < 100:
        raise DomainError(f"trials must be at least 100, got {trials}")
    rows = []
    for g_i, spec in enumerate(grid):
        shocks = [inj for inj in spec.injections if inj.unit == "day" and inj.return_bp != 0]
        d = day if day is not None else (shocks[0].offset if shocks else 0)
        shock_bp = math.fsum(inj.return_bp for inj in spec.injections if inj.unit == "day" and inj.offset == d)
        alt = alternative or ("greater" if shock_bp > 0 else "less")
        n = spec.n_securities
        crit = stats.t.ppf(1 - alpha / (2 if alt == "two-sided" else 1), n - 1)
        rejects, ests, covered = 0, [], 0
        for j in range(trials):
            ar = event_abnormal_returns(spec.with_seed(spec.seed * 100003 + j), model, d)
            est = float(ar.mean())
            se = float(ar.std(ddof=1) / math.sqrt(n))
            t = est / se
            rejects += {"less": t < -crit, "greater": t > crit, "two-sided": abs(t) > crit}[alt]
            covered += abs(est - shock_bp * 1e-4) <= 2 * se
            ests.append(est)
        label = labels[g_i] if labels else f"shock={shock_bp:g}bp"
        rows.append(PowerRow(label, ModelKind(model).value, shock_bp, d, trials, n, float(rejects / trials),
                             float(np.mean(ests)), covered / trials))
    return rows
