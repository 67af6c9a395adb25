import hashlib
import math

import numpy as np
import pytest

from leakstudy import ingest
from leakstudy.errors import ConfigError, DomainError
from leakstudy.simkit import (
    INDEX_TICKER,
    Injection,
    SimSpec,
    draw_daily,
    event_abnormal_returns,
    generate,
    parse_spec,
    power_size,
    stream,
    write_dataset,
)


def digest_dir(path):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(path.iterdir())}


def test_streams_are_independent_and_reproducible():
    a = stream(7, 3).normal(size=5)
    assert np.array_equal(a, stream(7, 3).normal(size=5))
    assert not np.array_equal(a, stream(7, 4).normal(size=5))
    assert not np.array_equal(a, stream(8, 3).normal(size=5))


def test_adding_securities_keeps_existing_paths():
    small = draw_daily(SimSpec(seed=3, n_securities=2, n_days=200))
    big = draw_daily(SimSpec(seed=3, n_securities=5, n_days=200))
    np.testing.assert_array_equal(small.returns, big.returns[:2])


def test_same_seed_byte_identical(tmp_path):
    spec = SimSpec(seed=11, n_securities=6, n_days=330, intraday=True,
                   injections=(Injection("day", 2, -21.0), Injection("bar", 3, -10.0, 3.0)))
    write_dataset(generate(spec), tmp_path / "a")
    write_dataset(generate(spec), tmp_path / "b")
    assert digest_dir(tmp_path / "a") == digest_dir(tmp_path / "b")
    write_dataset(generate(spec.with_seed(12)), tmp_path / "c")
    assert digest_dir(tmp_path / "c")["prices_daily.csv"] != digest_dir(tmp_path / "a")["prices_daily.csv"]


def test_files_round_trip_through_ingest(tmp_path):
    spec = SimSpec(seed=5, n_securities=4, n_days=320, intraday=True)
    data = generate(spec)
    write_dataset(data, tmp_path)
    daily = ingest.load_daily_prices(tmp_path / "prices_daily.csv")
    assert set(daily) == set(data.tickers) | {INDEX_TICKER}
    closes = np.array([b.close for b in daily[data.tickers[1]]])
    np.testing.assert_array_equal(closes, data.closes[1])
    factors = ingest.load_factors(tmp_path / "factors_SIM.csv")
    assert factors[data.draws.dates[10]].mkt_rf == data.draws.mkt_rf[10]
    assert len(ingest.load_intraday_prices(tmp_path / "prices_intraday.csv")) == 5
    heads = ingest.load_headlines(tmp_path / "headlines.csv")
    assert len(heads) == 4 * spec.n_securities
    assert {b.ticker for b in ingest.load_announcements(tmp_path / "announcements.csv")} == set(data.tickers)
    assert set(ingest.load_fundamentals(tmp_path / "fundamentals.csv")) == set(data.tickers)
    assert "SIM" in ingest.load_calendars(tmp_path / "calendar.csv")
    assert set(ingest.load_securities(tmp_path / "securities.csv")) == set(data.tickers)


def test_returns_follow_the_factor_model():
    spec = SimSpec(seed=2, n_securities=3, n_days=250, beta=1.2, smb=0.3, hml=-0.2, mom=0.1, sigma=1e-9)
    d = draw_daily(spec)
    F = np.vstack([d.mkt_rf, d.smb, d.hml, d.mom])
    expected = d.rf + d.loadings @ F
    np.testing.assert_allclose(d.returns[:, 1:], expected[:, 1:], atol=1e-8)


@pytest.mark.parametrize("model", ["madj", "capm", "carhart"])
def test_noiseless_null_has_no_abnormal_returns(model):
    spec = SimSpec(seed=4, n_securities=20, n_days=360, sigma=1e-12)
    ar = event_abnormal_returns(spec, model, 2)
    assert np.max(np.abs(ar)) < 1e-9


def test_day_shock_recovered_exactly_when_noiseless():
    spec = SimSpec(seed=4, n_securities=20, n_days=360, sigma=1e-12, injections=(Injection("day", 2, -21.0),))
    ar = event_abnormal_returns(spec, "capm", 2)
    np.testing.assert_allclose(ar, -0.0021, atol=1e-9)


def test_volume_multiplier():
    base = draw_daily(SimSpec(seed=9, n_securities=5, n_days=300))
    doubled = draw_daily(SimSpec(seed=9, n_securities=5, n_days=300, injections=(Injection("day", 0, 0.0, 2.0),)))
    t = 260
    # rounding to whole shares is the only source of error
    np.testing.assert_allclose(np.log(doubled.volumes[:, t] / base.volumes[:, t]), math.log(2), atol=1e-5)


def test_spec_validation():
    with pytest.raises(DomainError):
        SimSpec(sigma=0.0)
    with pytest.raises(DomainError):
        SimSpec(n_days=100, event_day=98, injections=(Injection("day", 5, -1.0),))
    with pytest.raises(DomainError):
        Injection("day", 0, float("nan"))
    with pytest.raises(DomainError):
        Injection("week", 0, 1.0)


def test_parse_spec():
    spec = parse_spec("seed=3\nn_securities = 10  # comment\nsigma=0.01\nintraday=true\n"
                      "inject=day:2:-21\ninject=bar:1:-5:2.5\n")
    assert spec.seed == 3 and spec.n_securities == 10 and spec.sigma == 0.01 and spec.intraday
    assert spec.injections == (Injection("day", 2, -21.0), Injection("bar", 1, -5.0, 2.5))
    with pytest.raises(ConfigError):
        parse_spec("colour=blue\n")
    with pytest.raises(ConfigError):
        parse_spec("seed\n")


def test_power_needs_enough_trials():
    with pytest.raises(DomainError):
        power_size([SimSpec()], trials=0)
    with pytest.raises(DomainError):
        power_size([SimSpec()], trials=99)


def test_large_shock_power():
    spec = SimSpec(seed=1, n_securities=214, n_days=360, sigma=0.01, injections=(Injection("day", 2, -50.0),))
    [row] = power_size([spec], "capm", trials=100)
    # analytic power of the one-sided test is ~1 here (shift of 7 SE)
    assert row.rejection_rate > 0.9
    assert row.mean_estimate == pytest.approx(-0.005, abs=0.0005)


def test_null_size_within_binomial_bound():
    trials, alpha = 200, 0.05
    spec = SimSpec(seed=2, n_securities=214, n_days=360, sigma=0.02)
    [row] = power_size([spec], "capm", alpha, trials, day=2)
    assert row.shock_bp == 0.0
    assert abs(row.rejection_rate - alpha) <= 2 * math.sqrt(alpha * (1 - alpha) / trials)
