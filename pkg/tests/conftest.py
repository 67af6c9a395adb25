from datetime import date, datetime, time, timedelta
from zoneinfo import ZoneInfo

import pytest
from hypothesis import HealthCheck, settings

from leakstudy.core import ExchangeCalendar, Headline

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

NY = ZoneInfo("America/New_York")


def nyse(**kw) -> ExchangeCalendar:
    base = dict(exchange_id="XNYS", timezone="America/New_York", session_open=time(9, 30),
                session_close=time(16, 0), holidays=frozenset({date(2021, 7, 5), date(2021, 12, 24)}))
    base.update(kw)
    return ExchangeCalendar(**base)


@pytest.fixture
def cal():
    return nyse()


def at(d: date, hh: int, mm: int = 0, tz=NY) -> datetime:
    return datetime.combine(d, time(hh, mm), tz)


def headline(ts, text="ACME Mandates Banks for Green Bond", ticker="ACME", chars=500, feed="BN", label=True):
    return Headline(feed, ts, text, chars, (ticker,) if ticker else (), label)


def open_plus(d: date, minutes: int) -> datetime:
    return at(d, 9, 30) + timedelta(minutes=minutes)


def covariate_rows(seed, n=100, dependent="CAR[0,1]", coef=None, sigma=0.01, fixed_effects=("day", "year", "region")):
    """Seeded events whose CAR is an exact linear function of the design plus noise.

    Returns ``(rows, true_coef_by_name)``.
    """
    import numpy as np
    from dataclasses import replace
    from leakstudy.crosssection import CovariateRow, build_design

    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        rows.append(CovariateRow(
            event_id=f"E{i:03d}", sector="Financial" if i % 2 else "NonFinancial",
            size_usd=float(np.exp(rng.normal(6.0, 0.8))), term=float(rng.uniform(2, 30)),
            cpn=float(rng.uniform(0, 6)), option=bool(rng.random() < 0.4), n_bonds=int(rng.integers(1, 5)),
            fti=bool(rng.random() < 0.3), roa=float(rng.normal(3, 2)), de=float(rng.gamma(2.0, 1.0)),
            fcf=float(rng.normal(0, 2000)), tobins_q=float(rng.gamma(3.0, 0.5)),
            time_of_day=str(rng.choice(["PreMarket", "FirstHour", "MidSession", "LastHour", "PostMarket"])),
            weekday=int(rng.integers(0, 5)), year=int(rng.integers(2016, 2022)),
            region=str(rng.choice(["Americas", "EMEA", "APAC"])), cars={dependent: 0.0},
        ))
    design = build_design(rows, dependent, fixed_effects)
    beta = rng.normal(0, 0.5, design.X.shape[1]) if coef is None else np.asarray(coef, dtype=float)
    y = design.X @ beta + rng.normal(0, sigma, n)
    rows = [replace(r, cars={dependent: float(v)}) for r, v in zip(rows, y)]
    return rows, dict(zip(design.names, beta))


GATE_LINES = []


def gate(number: int, title: str, ok: bool, detail: str) -> None:
    """Record and print one acceptance line, then assert it."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} | {detail}"
    GATE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if GATE_LINES:
        terminalreporter.section("acceptance gate")
        for line in sorted(GATE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
