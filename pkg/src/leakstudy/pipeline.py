"""Run configuration and the end-to-end stages the command line drives.

Each stage is a plain function of a :class:`RunConfig` and loaded
:class:`Inputs`; file writing and manifests live here too so that scripts
and tests can run a stage without going through argparse.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import ingest
from .core import ExchangeCalendar, SectorClass
from .crosssection import (
    COVARIATES,
    CovariateRow,
    build_design,
    correlations,
    regress,
    stars,
)
from .errors import ConfigError, EmptySampleError, FactorGapError, LeakStudyError
from .eventstudy import (
    DAILY_WINDOWS,
    INTRADAY_OFFSETS,
    EventMeta,
    EventPanel,
    aav_caav,
    car_values,
    daily_aar_table,
    daily_caar_table,
    intraday_caar,
)
from .factors import ModelKind, ModelSpec
from .leaks import (
    DEFAULT_HORIZON_DAYS,
    LeakEvent,
    apply_liquidity,
    condense_announcements,
    dedup_headlines,
    filter_headlines,
    match_leaks,
)
from .outputs import canonical_json, sha256_file, sha256_text, write_csv
from .panels import (
    EventInput,
    daily_return_panel,
    daily_volume_panel,
    intraday_return_panel,
    intraday_volume_panel,
)

PATH_KEYS = ("headlines", "announcements", "calendars", "securities", "prices_daily",
             "prices_intraday", "fundamentals", "fx")
FUNNEL_STAGES = ("candidates", "deduped", "ticker_bearing", "matched", "liquidity_passing", "factor_covered")
SAMPLES = {"fin": SectorClass.FINANCIAL.value, "nonfin": SectorClass.NON_FINANCIAL.value, "all": None}


def parse_window(text: str) -> tuple:
    a, sep, b = text.strip().partition(":")
    if not sep:
        a, sep, b = text.strip().strip("[]").partition(",")
    try:
        w = (int(a), int(b))
    except ValueError as exc:
        raise ConfigError(f"bad window {text!r}; expected a:b") from exc
    if w[0] > w[1]:
        raise ConfigError(f"window {text!r} is reversed")
    return w


@dataclass
class RunConfig:
    headlines: Optional[Path] = None
    announcements: Optional[Path] = None
    calendars: Optional[Path] = None
    securities: Optional[Path] = None
    prices_daily: Optional[Path] = None
    prices_intraday: Optional[Path] = None
    fundamentals: Optional[Path] = None
    fx: Optional[Path] = None
    factor_files: dict = field(default_factory=dict)  # region -> path
    factor_units: str = "decimal"
    market_index: dict = field(default_factory=dict)  # exchange_id -> index ticker
    exclude_unmapped_regions: bool = False
    model: str = "capm"
    anchor: str = "leak"
    windows: Optional[list] = None  # None: presets
    split: str = "all"
    two_sided: bool = False
    intercept: bool = False
    min_obs: int = 100
    horizon_days: int = DEFAULT_HORIZON_DAYS
    car_window: tuple = (0, 1)
    sample: str = "all"
    fixed_effects: tuple = ("timeofday", "day")
    robust: bool = False
    out_dir: Path = Path("out")
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict, base: Path = Path(".")) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        kw = dict(raw)
        for k in PATH_KEYS + ("out_dir",):
            if kw.get(k) is not None:
                kw[k] = (base / kw[k]).resolve()
        if "factor_files" in kw:
            kw["factor_files"] = {r: (base / p).resolve() for r, p in kw["factor_files"].items()}
        if kw.get("windows") is not None:
            kw["windows"] = [parse_window(w) if isinstance(w, str) else tuple(w) for w in kw["windows"]]
        if "car_window" in kw:
            cw = kw["car_window"]
            kw["car_window"] = parse_window(cw) if isinstance(cw, str) else tuple(cw)
        if "fixed_effects" in kw:
            fe = kw["fixed_effects"]
            kw["fixed_effects"] = tuple(fe.split(",") if isinstance(fe, str) else fe)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw, path.parent)

    def replace(self, **overrides) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def validate(self, required: Sequence[str] = ()) -> None:
        for k in required:
            if getattr(self, k) is None:
                raise ConfigError(f"config needs {k!r}", key=k)
        for k in PATH_KEYS:
            p = getattr(self, k)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{k} file does not exist: {p}", key=k)
        for region, p in self.factor_files.items():
            if not Path(p).is_file():
                raise ConfigError(f"factor file for region {region} does not exist: {p}", region=region)
        if self.factor_units not in ("decimal", "percent"):
            raise ConfigError(f"factor_units must be decimal or percent, got {self.factor_units!r}")
        try:
            ModelKind(self.model)
        except ValueError as exc:
            raise ConfigError(f"unknown model {self.model!r}") from exc
        if self.anchor not in ("leak", "announce"):
            raise ConfigError(f"anchor must be leak or announce, got {self.anchor!r}")
        if self.split not in ("all", "timing", "sector"):
            raise ConfigError(f"split must be all, timing or sector, got {self.split!r}")
        if self.sample not in SAMPLES:
            raise ConfigError(f"sample must be fin, nonfin or all, got {self.sample!r}")

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        return canonical_json(d)

    def digest(self) -> str:
        return sha256_text(self.to_json())


# --------------------------------------------------------------------------- inputs

@dataclass
class Inputs:
    headlines: list
    events: list
    calendars: dict  # exchange_id -> calendar
    securities: dict
    daily: dict
    intraday: Optional[dict]
    factors: dict  # region -> {date: FactorRow}
    fundamentals: Optional[dict]
    fx: Optional[ingest.FxTable]
    hashes: dict

    def calendar_for(self, ticker: str) -> Optional[ExchangeCalendar]:
        sec = self.securities.get(ticker)
        return None if sec is None else self.calendars.get(sec.exchange_id)

    @property
    def calendars_by_ticker(self) -> dict:
        return {t: self.calendars[s.exchange_id] for t, s in self.securities.items() if s.exchange_id in self.calendars}


def load_inputs(cfg: RunConfig) -> Inputs:
    cfg.validate(("headlines", "announcements", "calendars", "securities"))
    hashes = {}

    def track(key, path):
        if path is not None:
            hashes[key] = sha256_file(path)
        return path

    headlines = ingest.load_headlines(track("headlines", cfg.headlines))
    events = condense_announcements(ingest.load_announcements(track("announcements", cfg.announcements)))
    calendars = ingest.load_calendars(track("calendars", cfg.calendars))
    securities = ingest.load_securities(track("securities", cfg.securities))
    daily = ingest.load_daily_prices(track("prices_daily", cfg.prices_daily)) if cfg.prices_daily else {}
    intraday = ingest.load_intraday_prices(track("prices_intraday", cfg.prices_intraday)) if cfg.prices_intraday else None
    factors = {
        region: ingest.load_factors(track(f"factors[{region}]", p), cfg.factor_units)
        for region, p in sorted(cfg.factor_files.items())
    }
    fundamentals = ingest.load_fundamentals(track("fundamentals", cfg.fundamentals)) if cfg.fundamentals else None
    fx = ingest.FxTable.load(track("fx", cfg.fx)) if cfg.fx else None
    return Inputs(headlines, events, calendars, securities, daily, intraday, factors, fundamentals, fx, hashes)


# --------------------------------------------------------------------------- leak selection

@dataclass
class Selection:
    leaks: list  # liquidity-passing leak events
    matched: list  # all matched, with liquidity flags
    funnel: dict


def select_leaks(cfg: RunConfig, inp: Inputs) -> Selection:
    candidates = filter_headlines(inp.headlines, require_ticker=False)
    deduped = dedup_headlines(candidates, horizon_days=cfg.horizon_days)
    with_ticker = [h for h in deduped if h.primary_ticker in inp.securities]
    matched = match_leaks(with_ticker, inp.events, inp.calendars_by_ticker, cfg.horizon_days, inp.fx)
    if inp.intraday is not None:
        matched = apply_liquidity(matched, inp.intraday)
        liquid = [lk for lk in matched if lk.passes_liquidity is True]
    else:
        liquid = list(matched)
    funnel = {
        "candidates": len(candidates),
        "deduped": len(deduped),
        "ticker_bearing": len(with_ticker),
        "matched": len(matched),
        "liquidity_passing": len(liquid),
    }
    return Selection(liquid, matched, funnel)


def event_id(leak: LeakEvent) -> str:
    return f"{leak.ticker}@{leak.leak_ts.isoformat()}"


def event_inputs(cfg: RunConfig, inp: Inputs, leaks: Sequence[LeakEvent], anchor: str, model: str):
    """Panel inputs for each leak; returns (inputs, excluded) with excluded as (event_id, code)."""
    needs_factors = ModelKind(model) is not ModelKind.MARKET_ADJUSTED
    out, excluded = [], []
    for lk in leaks:
        sec = inp.securities[lk.ticker]
        eid = event_id(lk)
        factors = inp.factors.get(sec.region)
        if needs_factors and factors is None:
            if not cfg.exclude_unmapped_regions:
                raise FactorGapError(f"no factor file mapped for region {sec.region}", region=sec.region)
            excluded.append((eid, FactorGapError.code))
            continue
        market = cfg.market_index.get(sec.exchange_id)
        if market is None:
            excluded.append((eid, "NO_MARKET_INDEX"))
            continue
        meta = EventMeta(eid, lk.ticker, anchor, lk.timing.value, sec.sector_class.value, sec.region)
        day0 = lk.session_date if anchor == "leak" else lk.event.announce_date
        out.append(EventInput(meta, lk.ticker, market, day0, lk.event_start, inp.calendar_for(lk.ticker), factors))
    return out, excluded


def return_panel(cfg: RunConfig, inp: Inputs, leaks, *, anchor=None, model=None, offsets=None) -> EventPanel:
    anchor = anchor or cfg.anchor
    model = model or cfg.model
    evs, excluded = event_inputs(cfg, inp, leaks, anchor, model)
    spec = ModelSpec.for_anchor(model, anchor, min_obs=cfg.min_obs, intercept=cfg.intercept)
    if offsets is None:
        ws = windows_of(cfg)
        offsets = range(min(-10, *(w[0] for w in ws)), max(30, *(w[1] for w in ws)) + 1)
    panel = daily_return_panel(evs, inp.daily, spec, tuple(offsets))
    panel.excluded = excluded + panel.excluded
    return panel


def windows_of(cfg: RunConfig) -> list:
    return list(cfg.windows) if cfg.windows else list(DAILY_WINDOWS)


def funnel_with_coverage(cfg: RunConfig, inp: Inputs, sel: Selection) -> dict:
    if inp.daily:
        covered = return_panel(cfg, inp, sel.leaks).n_events
    else:
        covered = 0
    return {**sel.funnel, "factor_covered": covered}


# --------------------------------------------------------------------------- manifests

def write_manifest(out_dir: Path, command: str, cfg: RunConfig, inp: Inputs, funnel: dict,
                   outputs: Sequence[Path], excluded=()) -> Path:
    manifest = {
        "command": command,
        "config_sha256": cfg.digest(),
        "horizon_days": cfg.horizon_days,
        "inputs": dict(sorted(inp.hashes.items())),
        "funnel": [[k, funnel[k]] for k in FUNNEL_STAGES if k in funnel],
        "outputs": {p.name: sha256_file(p) for p in sorted(outputs)},
        "excluded": [list(x) for x in sorted(excluded)],
    }
    path = out_dir / "manifest.json"
    path.write_text(canonical_json(manifest), encoding="utf-8")
    return path


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


STUDY_HEADER = ("group", "window", "n", "estimate", "std_err", "t", "p")


def _study_rows(rows):
    return [(r.group, r.window, r.stat.n, r.stat.estimate, r.stat.std_err, r.stat.t_stat, r.stat.p_value)
            for r in rows]


# --------------------------------------------------------------------------- commands

def run_match(cfg: RunConfig) -> list[Path]:
    inp = load_inputs(cfg)
    sel = select_leaks(cfg, inp)
    out = _prepare_out(cfg)
    path = write_csv(
        out / "leaks.csv",
        ("ticker", "leak_ts", "announce_date", "timing", "passes_liquidity", "n_bonds", "size_usd", "avg_coupon",
         "has_option", "avg_term", "time_of_day", "event_start"),
        [(lk.ticker, lk.leak_ts, lk.event.announce_date, lk.timing, lk.passes_liquidity, lk.event.n_bonds,
          lk.size_usd, lk.event.avg_coupon, lk.event.has_option, lk.event.avg_term, lk.time_of_day, lk.event_start)
         for lk in sel.matched],
    )
    funnel = funnel_with_coverage(cfg, inp, sel)
    return [path, write_manifest(out, "match", cfg, inp, funnel, [path])]


def run_study(cfg: RunConfig, *, intraday: bool = False) -> list[Path]:
    inp = load_inputs(cfg)
    sel = select_leaks(cfg, inp)
    out = _prepare_out(cfg)
    if intraday:
        if inp.intraday is None:
            raise ConfigError("intraday study needs prices_intraday", key="prices_intraday")
        evs, excluded = event_inputs(cfg, inp, sel.leaks, "leak", "madj")
        panel = intraday_return_panel(evs, inp.intraday)
        panel.excluded = excluded + panel.excluded
        rows = intraday_caar(panel, INTRADAY_OFFSETS, cfg.split, two_sided=cfg.two_sided)
        files = [write_csv(out / "study_intraday.csv", STUDY_HEADER, _study_rows(rows))]
        (out / "study_intraday.md").write_text(render_study(rows, "Minutes"), encoding="utf-8")
        files.append(out / "study_intraday.md")
    else:
        panel = return_panel(cfg, inp, sel.leaks)
        rows = daily_caar_table(panel, windows_of(cfg), cfg.split, two_sided=cfg.two_sided)
        aars = daily_aar_table(panel, range(0, 11), cfg.split, two_sided=cfg.two_sided)
        files = [
            write_csv(out / "study.csv", STUDY_HEADER, _study_rows(rows)),
            write_csv(out / "study_aar.csv", STUDY_HEADER, _study_rows(aars)),
        ]
        (out / "study.md").write_text(render_study(rows, "Event Window") + "\n" + render_study(aars, "Day"),
                                      encoding="utf-8")
        files.append(out / "study.md")
    funnel = funnel_with_coverage(cfg, inp, sel)
    return files + [write_manifest(out, "study", cfg, inp, funnel, files, panel.excluded)]


VOLUME_HEADER = ("group", "day", "n", "aav_log", "aav_pct", "aav_t", "aav_p",
                 "caav_log", "caav_pct", "caav_t", "caav_p")


def run_volume(cfg: RunConfig) -> list[Path]:
    inp = load_inputs(cfg)
    sel = select_leaks(cfg, inp)
    out = _prepare_out(cfg)
    evs, excluded = event_inputs(cfg, inp, sel.leaks, cfg.anchor, "madj")
    panel = daily_volume_panel(evs, inp.daily)
    excluded += panel.excluded
    files = [write_csv(out / "volume.csv", VOLUME_HEADER, _volume_rows(aav_caav(panel, split=cfg.split,
                                                                                  two_sided=cfg.two_sided)))]
    if inp.intraday is not None:
        ipanel = intraday_volume_panel(evs, inp.intraday)
        excluded += ipanel.excluded
        pairs = aav_caav(ipanel, INTRADAY_OFFSETS, cfg.split, cumulative=False, two_sided=cfg.two_sided)
        files.append(write_csv(out / "volume_intraday.csv", VOLUME_HEADER, _volume_rows(pairs)))
    funnel = funnel_with_coverage(cfg, inp, sel)
    return files + [write_manifest(out, "volume", cfg, inp, funnel, files, excluded)]


def _volume_rows(pairs):
    rows = []
    for a, c in pairs:
        row = [a.group, a.window, a.stat.n, a.stat.estimate, a.display_pct, a.stat.t_stat, a.stat.p_value]
        row += [None] * 4 if c is None else [c.stat.estimate, c.display_pct, c.stat.t_stat, c.stat.p_value]
        rows.append(row)
    return rows


def covariate_rows(cfg: RunConfig, inp: Inputs, leaks: Sequence[LeakEvent], panel: EventPanel) -> list[CovariateRow]:
    """One covariate row per event on ``panel``; CARs are in percent."""
    by_id = {event_id(lk): lk for lk in leaks}
    cars = {w: car_values(panel, w) for w in ((0, 1), (0, 2), tuple(cfg.car_window))}
    rows = []
    for j, meta in enumerate(panel.events):
        lk = by_id[meta.event_id]
        sec = inp.securities[lk.ticker]
        fund = None
        if inp.fundamentals is not None and lk.ticker in inp.fundamentals:
            try:
                fund = ingest.prepare_fundamentals(inp.fundamentals[lk.ticker], lk.event.announce_date,
                                                   currency=sec.currency, leak_ts=lk.leak_ts, fx=inp.fx)
            except LeakStudyError:
                fund = None
        local = inp.calendar_for(lk.ticker).local_date(lk.leak_ts)
        rows.append(CovariateRow(
            event_id=meta.event_id, sector=sec.sector_class.value, size_usd=lk.size_usd,
            term=lk.event.avg_term, cpn=lk.event.avg_coupon, option=lk.event.has_option, n_bonds=lk.event.n_bonds,
            fti=None if fund is None else fund.fti, roa=None if fund is None else fund.roa,
            de=None if fund is None else fund.de, fcf=None if fund is None else fund.fcf_usd,
            tobins_q=None if fund is None else fund.tobins_q,
            mktcap=None if fund is None else fund.mktcap_usd, assets=None if fund is None else fund.assets_usd,
            time_of_day=lk.time_of_day, weekday=local.weekday(), year=local.year, region=sec.region,
            cars={f"CAR[{a},{b}]": 100.0 * float(v[j]) for (a, b), v in cars.items() if math.isfinite(v[j])},
        ))
    return rows


def run_regress(cfg: RunConfig) -> list[Path]:
    inp = load_inputs(cfg)
    sel = select_leaks(cfg, inp)
    out = _prepare_out(cfg)
    panel = return_panel(cfg, inp, sel.leaks)
    rows = covariate_rows(cfg, inp, sel.leaks, panel)
    a, b = cfg.car_window
    design = build_design(rows, f"CAR[{a},{b}]", cfg.fixed_effects, SAMPLES[cfg.sample])
    res = regress(design, robust=cfg.robust)
    table = [(r.name, r.coef, r.std_err, r.t_stat, r.p_value, r.stars) for r in res.rows]
    table += [("R2", res.r2, None, None, None, ""), ("F", res.f_stat, None, None, res.f_pvalue, ""),
              ("n", float(res.n), None, None, None, "")]
    files = [write_csv(out / "regress.csv", ("name", "coef", "std_err", "t", "p", "stars"), table)]
    funnel = funnel_with_coverage(cfg, inp, sel)
    excluded = panel.excluded + [(e, "INCOMPLETE_COVARIATES") for e in design.dropped]
    return files + [write_manifest(out, "regress", cfg, inp, funnel, files, excluded)]


def run_correlations(cfg: RunConfig) -> list[Path]:
    inp = load_inputs(cfg)
    sel = select_leaks(cfg, inp)
    out = _prepare_out(cfg)
    panel = return_panel(cfg, inp, sel.leaks)
    rows = covariate_rows(cfg, inp, sel.leaks, panel)
    if SAMPLES[cfg.sample] is not None:
        rows = [r for r in rows if r.sector == SAMPLES[cfg.sample]]
    data, dropped = [], []
    for r in rows:
        v = r.transformed()
        x = [v[c] for c in COVARIATES]
        if any(e is None for e in x):
            dropped.append((r.event_id, "INCOMPLETE_COVARIATES"))
            continue
        data.append(x)
    if len(data) < 2:
        raise EmptySampleError(f"{len(data)} complete covariate rows; need at least 2")
    res = correlations(np.array(data), COVARIATES)
    files = [write_csv(out / "correlations.csv", ("", *res.names),
                       [(n, *res.matrix[i]) for i, n in enumerate(res.names)])]
    funnel = funnel_with_coverage(cfg, inp, sel)
    return files + [write_manifest(out, "correlations", cfg, inp, funnel, files, panel.excluded + dropped)]


# --------------------------------------------------------------------------- rendering

def pct(x: float, stars_: str = "", digits: int = 2) -> str:
    if x is None or not math.isfinite(x):
        return "–"
    return f"{100 * x:+.{digits}f}%{stars_}"


def num(x: float, digits: int = 3) -> str:
    return "–" if x is None or not math.isfinite(x) else f"{x:.{digits}f}"


def render_study(rows, first_col: str) -> str:
    lines = [f"| Group | {first_col} | n | Estimate | Std. err. | t-stat | p-value |", "|---|---|---|---|---|---|---|"]
    for r in rows:
        s = r.stat
        lines.append(f"| {r.group} | {r.window} | {s.n} | {pct(s.estimate, stars(s.p_value))} | "
                     f"{pct(s.std_err)} | {num(s.t_stat)} | {num(s.p_value)} |")
    return "\n".join(lines) + "\n"
