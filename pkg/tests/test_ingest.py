import math
from datetime import date, datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from leakstudy import ingest
from leakstudy.errors import FxGapError, IngestError, InsufficientHistoryError
from leakstudy.ingest import FilingRecord, FxRate, FxTable, macaulay_perpetual, prepare_fundamentals, rebase_usd

T = datetime(2021, 3, 1, 12, 0, tzinfo=timezone.utc)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_daily_happy_path(tmp_path):
    p = write(tmp_path, "d.csv", "ticker,date,close,volume,shares_outstanding\n"
                                 "A,2021-01-04,10,100,1000\nA,2021-01-05,11,120,1000\nB,2021-01-04,5,10,50\n")
    rows = ingest.load_table(p, ingest.DAILY_SCHEMA)
    assert len(rows) == 3
    grouped = ingest.load_daily_prices(p)
    assert [b.close for b in grouped["A"]] == [10.0, 11.0]


def test_header_only_is_empty(tmp_path):
    p = write(tmp_path, "d.csv", "ticker,date,close,volume,shares_outstanding\n")
    assert ingest.load_table(p, ingest.DAILY_SCHEMA) == []


def test_bad_close_names_row(tmp_path):
    p = write(tmp_path, "d.csv", "ticker,date,close,volume,shares_outstanding\n"
                                 "A,2021-01-04,10,100,1000\nA,2021-01-05,-1,120,1000\n")
    with pytest.raises(IngestError) as exc:
        ingest.load_table(p, ingest.DAILY_SCHEMA)
    assert exc.value.context["row"] == 3
    assert "row=3" in exc.value.one_line()


def test_missing_column(tmp_path):
    p = write(tmp_path, "d.csv", "ticker,date,close,volume\nA,2021-01-04,10,100\n")
    with pytest.raises(IngestError, match="shares_outstanding"):
        ingest.load_table(p, ingest.DAILY_SCHEMA)


def test_unparsable_cell_names_column(tmp_path):
    p = write(tmp_path, "d.csv", "ticker,date,close,volume,shares_outstanding\nA,2021-13-04,10,100,1000\n")
    with pytest.raises(IngestError) as exc:
        ingest.load_table(p, ingest.DAILY_SCHEMA)
    assert exc.value.context["column"] == "date"


def test_instant_requires_offset(tmp_path):
    p = write(tmp_path, "i.csv", "ticker,timestamp,price,volume\nA,2021-01-04T10:00:00,10,100\n")
    with pytest.raises(IngestError):
        ingest.load_table(p, ingest.INTRADAY_SCHEMA)


def test_factor_units_percent(tmp_path):
    p = write(tmp_path, "f.csv", "date,mkt_rf,smb,hml,rf\n2021-01-04,1.5,0.2,-0.1,0.01\n")
    row = ingest.load_factors(p, "percent")[date(2021, 1, 4)]
    assert row.mkt_rf == pytest.approx(0.015)
    assert row.mom is None


def test_calendar_file(tmp_path):
    p = write(tmp_path, "c.csv", "exchange_id,timezone,open,close,holiday_dates,early_closes\n"
                                 "XNYS,America/New_York,09:30,16:00,2021-07-05;2021-12-24,2021-11-26@13:00\n")
    cal = ingest.load_calendars(p)["XNYS"]
    assert date(2021, 7, 5) in cal.holidays
    assert cal.session_minutes(date(2021, 11, 26)) == 210


def fx(*rates):
    return FxTable([FxRate("EURUSD", ts, r) for ts, r in rates])


def test_rebase_examples():
    assert rebase_usd(100, "USD", T, None) == 100
    assert rebase_usd(100, "EUR", T, fx((T, 1.10))) == pytest.approx(110)
    table = fx((T - timedelta(hours=1), 1.10), (T + timedelta(hours=1), 1.20))
    assert rebase_usd(100, "EUR", T, table) == pytest.approx(110)


def test_rebase_inverse_pair():
    table = FxTable([FxRate("USDJPY", T, 100.0)])
    assert rebase_usd(1000, "JPY", T, table) == pytest.approx(10.0)


def test_rebase_gap():
    with pytest.raises(FxGapError):
        rebase_usd(100, "EUR", T, fx((T + timedelta(hours=1), 1.2)))
    with pytest.raises(FxGapError):
        rebase_usd(100, "GBP", T, fx((T, 1.1)))


@given(st.floats(0.01, 1e6), st.floats(0.01, 100))
def test_rebase_homogeneous(a, k):
    table = fx((T, 1.13))
    assert rebase_usd(k * a, "EUR", T, table) == pytest.approx(k * rebase_usd(a, "EUR", T, table), rel=1e-12)


def filings(roas, ticker="A", first=2017):
    return [FilingRecord(ticker, first + i, 100.0 + i, 50.0 + i, r, 1.0, 10.0 * (i + 1), i == len(roas) - 1)
            for i, r in enumerate(roas)]


def test_fundamentals_average():
    assert prepare_fundamentals(filings([3.0, 3.0, 3.0]), date(2020, 6, 1)).roa == 3.0
    f = prepare_fundamentals(filings([1.0, 2.0, 6.0]), date(2020, 6, 1))
    assert f.roa == 3.0
    assert f.basis == "ThreeYearAverage"
    assert f.tobins_q == pytest.approx(f.mktcap_usd / f.assets_usd, rel=1e-9)
    assert f.fti is True


def test_fundamentals_uses_last_three_years_before_announcement():
    f = prepare_fundamentals(filings([100.0, 1.0, 2.0, 6.0, 50.0], first=2016), date(2020, 6, 1))
    assert f.roa == 3.0


def test_fundamentals_first_days_use_ttm():
    rows = filings([1.0, 2.0, 6.0]) + [FilingRecord("A", 2020, 200.0, 80.0, 9.0, 1.0, 5.0, False, "TTM")]
    f = prepare_fundamentals(rows, date(2020, 1, 20))
    assert f.basis == "Trailing12M"
    assert f.roa == 9.0
    with pytest.raises(InsufficientHistoryError):
        prepare_fundamentals(filings([1.0, 2.0, 6.0]), date(2020, 1, 20))


def test_fundamentals_day_45_boundary():
    rows = filings([1.0, 2.0, 6.0]) + [FilingRecord("A", 2020, 200.0, 80.0, 9.0, 1.0, 5.0, False, "TTM")]
    assert prepare_fundamentals(rows, date(2020, 2, 14)).basis == "Trailing12M"
    assert prepare_fundamentals(rows, date(2020, 2, 15)).basis == "ThreeYearAverage"


def test_fundamentals_short_history():
    with pytest.raises(InsufficientHistoryError):
        prepare_fundamentals(filings([1.0, 2.0]), date(2020, 6, 1))


@given(st.permutations([0, 1, 2]))
def test_fundamentals_permutation_invariant(order):
    rows = filings([1.5, -2.0, 7.25])
    shuffled = [rows[i] for i in order]
    assert prepare_fundamentals(shuffled, date(2020, 6, 1)) == prepare_fundamentals(rows, date(2020, 6, 1))


def test_fundamentals_rebased():
    rows = filings([1.0, 2.0, 6.0])
    f = prepare_fundamentals(rows, date(2020, 6, 1), currency="EUR", leak_ts=T, fx=fx((T, 2.0)))
    assert f.mktcap_usd == pytest.approx(2 * 101.0)
    assert f.roa == 3.0


@pytest.mark.parametrize("y,expected", [(0.05, 21.0), (0.10, 11.0), (1.00, 2.0)])
def test_macaulay(y, expected):
    assert macaulay_perpetual(y) == pytest.approx(expected, abs=1e-12)


def test_macaulay_domain():
    from leakstudy.errors import DomainError
    with pytest.raises(DomainError):
        macaulay_perpetual(0.0)


def test_headlines_and_announcements(tmp_path):
    h = write(tmp_path, "h.csv", "feed,timestamp,headline,article_chars,tickers,green_label\n"
                                 "BN,2021-06-07T09:00:00-04:00,\"X, Mandate Green\",900,ACME;ACME2,true\n")
    [row] = ingest.load_headlines(h)
    assert row.tickers == ("ACME", "ACME2") and row.primary_ticker == "ACME"
    a = write(tmp_path, "a.csv", "ticker,announce_date,currency,amount,maturity_date,perpetual,coupon_pct,"
                                 "has_option,yield\nACME,2021-06-08,eur,300,,true,4.5,false,0.05\n")
    [bond] = ingest.load_announcements(a)
    assert bond.currency == "EUR" and bond.perpetual and math.isclose(bond.yield_, 0.05)
