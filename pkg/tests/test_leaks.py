from datetime import date, datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import at, headline, nyse, open_plus
from leakstudy.core import BondAnnouncement, IntradayBar, business_days_between
from leakstudy.errors import CalendarGapError, DataError
from leakstudy.leaks import (
    Timing,
    condense_announcements,
    dedup_headlines,
    filter_headlines,
    liquidity_check,
    match_leaks,
    matches_search,
    time_of_day_bucket,
    timing_class,
)

MON = date(2021, 6, 7)


def bond(ticker="ACME", d=MON + timedelta(days=1), amount=300.0, **kw):
    base = dict(currency="USD", maturity_date=d + timedelta(days=3653), perpetual=False, coupon_pct=2.0,
                has_option=False)
    base.update(kw)
    return BondAnnouncement(ticker, d, base["currency"], amount, base["maturity_date"], base["perpetual"],
                            base["coupon_pct"], base["has_option"], base.get("yield_"))


def events(*bonds):
    return condense_announcements(bonds)


# --------------------------------------------------------------------------- announcements

def test_condense_groups_same_day():
    [ev] = events(bond(amount=300.0), bond(amount=200.0))
    assert ev.n_bonds == 2
    assert ev.size_usd() == 500.0


def test_condense_adjacent_dates_are_separate():
    evs = events(bond(d=MON), bond(d=MON + timedelta(days=1)))
    assert len(evs) == 2


def test_perpetual_term_and_missing_yield():
    [ev] = events(bond(perpetual=True, maturity_date=None, yield_=0.05))
    assert ev.avg_term == 21.0
    with pytest.raises(DataError):
        events(bond(perpetual=True, maturity_date=None))


def test_dated_term_in_years():
    [ev] = events(bond(d=date(2020, 1, 1), maturity_date=date(2030, 1, 1)))
    assert ev.avg_term == pytest.approx(3653 / 365.25)


# --------------------------------------------------------------------------- filtering

T0 = open_plus(MON, -60)


def test_filter_examples():
    keep = headline(T0, "Mandate for Green Bond")
    no_mandate = headline(T0, "Green Bond priced")
    no_ticker = headline(T0, "Mandate for Green Bond", ticker=None)
    unlabelled = headline(T0, "Mandate for Green Bond", label=False)
    assert filter_headlines([keep, no_mandate, no_ticker, unlabelled]) == [keep]
    assert no_ticker in filter_headlines([no_ticker], require_ticker=False)


@pytest.mark.parametrize("text,expected", [
    ("ACME MANDATES banks; mandate green", True),
    ("mandated Greenfield deal", False),
    ("Mandate, green.", True),
    ("greenmandate", False),
])
def test_search_whole_words(text, expected):
    assert matches_search(text) is expected


# --------------------------------------------------------------------------- dedup

def test_dedup_keeps_longer_article():
    a = headline(T0, chars=500, feed="BN")
    b = headline(T0 + timedelta(minutes=2), chars=900, feed="BFW")
    assert dedup_headlines([a, b]) == [b]


def test_dedup_keeps_earliest_update():
    first = headline(T0, "ACME mandate green bond")
    update = headline(T0 + timedelta(days=3), "ACME mandate green bond: books open")
    assert dedup_headlines([update, first]) == [first]


def test_dedup_unrelated_tickers_both_kept():
    a = headline(T0, ticker="ACME")
    b = headline(T0, ticker="BETA", text="BETA Mandates Banks for Green Bond")
    assert len(dedup_headlines([a, b])) == 2


def test_dedup_new_chain_after_horizon():
    a = headline(T0)
    b = headline(T0 + timedelta(days=61), "ACME new green mandate")
    assert dedup_headlines([a, b]) == [a, b]


times = st.integers(0, 200 * 24 * 60).map(lambda m: T0 + timedelta(minutes=m))
heads = st.builds(
    lambda ts, t, txt, n, feed: headline(ts, f"{t} {txt} green mandate", t, n, feed),
    times, st.sampled_from(["ACME", "BETA"]), st.sampled_from(["a", "b"]), st.integers(1, 3).map(lambda k: 100 * k),
    st.sampled_from(["BN", "BFW"]),
)


@given(st.lists(heads, max_size=25))
def test_dedup_idempotent(hs):
    once = dedup_headlines(hs)
    assert dedup_headlines(once) == once


@given(st.lists(heads, max_size=25), st.randoms())
def test_dedup_order_independent(hs, rnd):
    shuffled = list(hs)
    rnd.shuffle(shuffled)
    assert dedup_headlines(shuffled) == dedup_headlines(hs)


# --------------------------------------------------------------------------- matching

def test_match_next_day(cal):
    [lk] = match_leaks([headline(at(MON, 9))], events(bond(d=MON + timedelta(days=1))), {"ACME": cal})
    assert lk.event.announce_date == MON + timedelta(days=1)
    assert lk.timing is Timing.EARLY


def test_match_same_day_rejected(cal):
    assert match_leaks([headline(at(MON, 9))], events(bond(d=MON)), {"ACME": cal}) == []


def test_match_friday_to_monday(cal):
    fri = MON + timedelta(days=4)
    assert len(match_leaks([headline(at(fri, 11))], events(bond(d=fri + timedelta(days=3))), {"ACME": cal})) == 1


def test_match_over_weekend_only_rejected(cal):
    # Friday leak, Saturday "announcement": no business day in between
    fri = MON + timedelta(days=4)
    assert match_leaks([headline(at(fri, 11))], events(bond(d=fri + timedelta(days=1))), {"ACME": cal}) == []


def test_match_horizon(cal):
    h = headline(at(MON, 9))
    assert match_leaks([h], events(bond(d=MON + timedelta(days=61))), {"ACME": cal}) == []
    assert len(match_leaks([h], events(bond(d=MON + timedelta(days=60))), {"ACME": cal})) == 1
    assert len(match_leaks([h], events(bond(d=MON + timedelta(days=61))), {"ACME": cal}, horizon_days=90)) == 1


def test_match_uses_local_date(cal):
    # 01:00 UTC Tuesday is Monday evening in New York, so a Tuesday announcement is a day later
    ts = datetime(2021, 6, 8, 1, 0, tzinfo=timezone.utc)
    assert len(match_leaks([headline(ts)], events(bond(d=MON + timedelta(days=1))), {"ACME": cal})) == 1


def test_match_missing_calendar():
    with pytest.raises(CalendarGapError):
        match_leaks([headline(at(MON, 9))], events(bond()), {})


def test_event_claimed_once(cal):
    hs = [headline(at(MON, 9)), headline(at(MON, 10), "other mandate green")]
    leaks = match_leaks(hs, events(bond(d=MON + timedelta(days=2))), {"ACME": cal})
    assert len(leaks) == 1 and leaks[0].leak_ts == at(MON, 9)


def test_match_picks_earliest_eligible_event(cal):
    evs = events(bond(d=MON), bond(d=MON + timedelta(days=2)), bond(d=MON + timedelta(days=9)))
    [lk] = match_leaks([headline(at(MON, 9))], evs, {"ACME": cal})
    assert lk.event.announce_date == MON + timedelta(days=2)


ann_dates = st.integers(0, 120).map(lambda k: MON + timedelta(days=k))


@given(st.lists(heads, max_size=15), st.lists(ann_dates, max_size=6), st.randoms())
def test_match_invariants(hs, ds, rnd):
    cal = nyse()
    cals = {"ACME": cal, "BETA": cal}
    evs = events(*[bond(t, d) for t in ("ACME", "BETA") for d in ds])
    leaks = match_leaks(hs, evs, cals)
    for lk in leaks:
        leak_date = cal.local_date(lk.leak_ts)
        assert business_days_between(leak_date, lk.event.announce_date, cal) >= 1
        assert 1 <= (lk.event.announce_date - leak_date).days <= 60
        assert lk.headline.primary_ticker == lk.ticker
    keys = [(lk.ticker, lk.event.announce_date) for lk in leaks]
    assert len(keys) == len(set(keys))
    shuffled_h, shuffled_e = list(hs), list(evs)
    rnd.shuffle(shuffled_h)
    rnd.shuffle(shuffled_e)
    assert match_leaks(shuffled_h, shuffled_e, cals) == leaks


# --------------------------------------------------------------------------- timing

@pytest.mark.parametrize("minutes,expected", [(-30, Timing.EARLY), (0, Timing.EARLY), (59, Timing.EARLY),
                                              (60, Timing.LATE), (61, Timing.LATE), (300, Timing.LATE)])
def test_timing_boundaries(cal, minutes, expected):
    assert timing_class(open_plus(MON, minutes), cal) is expected


def test_post_close_is_early_next_session(cal):
    h = headline(at(MON, 17))
    [lk] = match_leaks([h], events(bond(d=MON + timedelta(days=3))), {"ACME": cal})
    assert lk.timing is Timing.EARLY
    assert lk.session_date == MON + timedelta(days=1)
    assert lk.event_start == open_plus(MON + timedelta(days=1), 0)


@pytest.mark.parametrize("ts,bucket", [
    (open_plus(MON, -5), "PreMarket"), (open_plus(MON, 10), "FirstHour"), (open_plus(MON, 120), "MidSession"),
    (open_plus(MON, 340), "LastHour"), (at(MON, 18), "PostMarket"), (at(MON - timedelta(days=1), 12), "PreMarket"),
])
def test_time_of_day(cal, ts, bucket):
    assert time_of_day_bucket(ts, cal) == bucket


# --------------------------------------------------------------------------- liquidity

def leak_at(cal, ts):
    [lk] = match_leaks([headline(ts)], events(bond(d=MON + timedelta(days=3))), {"ACME": cal})
    return lk


def bars_from(start, volumes):
    return [IntradayBar(start + timedelta(minutes=5 * i), 10.0, v) for i, v in enumerate(volumes)]


@pytest.mark.parametrize("total,expected", [(10_000, False), (10_001, True)])
def test_liquidity_volume_boundary(cal, total, expected):
    lk = leak_at(cal, open_plus(MON, 30))
    bars = bars_from(open_plus(MON, 30), [1, 1, 1] + [0] * 20 + [total - 3])
    assert liquidity_check(lk, bars) is expected


def test_liquidity_single_trade_excluded(cal):
    lk = leak_at(cal, open_plus(MON, 30))
    bars = bars_from(open_plus(MON, 30), [50_000] + [0] * 30)
    assert liquidity_check(lk, bars) is False


def test_liquidity_missing_is_unknown(cal):
    lk = leak_at(cal, open_plus(MON, 30))
    assert liquidity_check(lk, None) is None
    assert liquidity_check(lk, bars_from(open_plus(MON, -300), [100] * 10)) is None


def test_liquidity_out_of_session_measured_from_open(cal):
    lk = leak_at(cal, at(MON, 7))
    bars = bars_from(open_plus(MON, 0), [6000, 6000])
    assert liquidity_check(lk, bars) is True
