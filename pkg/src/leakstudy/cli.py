"""Command-line entry point: ``leakstudy <command> --config FILE [overrides]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline, report, simkit
from .errors import ConfigError, LeakStudyError
from .pipeline import RunConfig, parse_window

SAMPLE_CHOICES = ("fin", "nonfin", "all")


def _windows(text: str):
    if text == "preset":
        return None
    return [parse_window(w) for w in text.split(",") if w.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leakstudy", description="Event studies of pre-announcement news leaks.")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", type=Path, help="JSON run configuration")
        sp.add_argument("--out", type=Path, dest="out_dir", help="output directory (overrides config)")
        return sp

    m = with_config("match", "filter, dedup and match headlines to announcements; writes leaks.csv")
    m.add_argument("--headlines", type=Path)
    m.add_argument("--announcements", type=Path)
    m.add_argument("--calendars", type=Path)
    m.add_argument("--securities", type=Path)
    m.add_argument("--horizon-days", type=int, dest="horizon_days")

    s = with_config("study", "AAR/CAAR tables")
    s.add_argument("--model", choices=("madj", "capm", "ff3", "carhart"))
    s.add_argument("--anchor", choices=("leak", "announce"))
    s.add_argument("--windows", type=_windows,
                   help="'preset' or a comma list; use --windows=-8:-7,0:2 when a window starts negative")
    s.add_argument("--split", choices=("all", "timing", "sector"))
    s.add_argument("--intraday", action="store_true", help="intraday CAAR from minute 0 instead of daily")
    s.add_argument("--two-sided", action="store_true", default=None, dest="two_sided")

    v = with_config("volume", "AAV/CAAV tables")
    v.add_argument("--anchor", choices=("leak", "announce"))
    v.add_argument("--split", choices=("all", "timing", "sector"))

    r = with_config("regress", "cross-sectional regression of CARs")
    r.add_argument("--car-window", type=parse_window, dest="car_window", help="0:1 or 0:2")
    r.add_argument("--sample", choices=SAMPLE_CHOICES)
    r.add_argument("--fe", type=lambda t: tuple(x for x in t.split(",") if x), dest="fixed_effects",
                   help="comma list from timeofday,day,year,region")
    r.add_argument("--model", choices=("madj", "capm", "ff3", "carhart"))
    r.add_argument("--robust", action="store_true", default=None)

    c = with_config("correlations", "covariate correlation matrix")
    c.add_argument("--sample", choices=SAMPLE_CHOICES)

    with_config("report", "markdown report with AAR, volume and CAAR tables")

    sim = sub.add_parser("simulate", help="write a synthetic dataset")
    sim.add_argument("--spec", type=Path, required=True, help="key=value simulation spec")
    sim.add_argument("--out", type=Path, required=True)
    return p


OVERRIDES = ("out_dir", "headlines", "announcements", "calendars", "securities", "horizon_days", "model",
             "anchor", "split", "two_sided", "car_window", "sample", "fixed_effects", "robust")


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    over = {k: getattr(args, k) for k in OVERRIDES if getattr(args, k, None) is not None}
    for k in ("headlines", "announcements", "calendars", "securities", "out_dir"):
        if k in over:
            over[k] = over[k].resolve()
    if getattr(args, "windows", None) is not None:
        cfg.windows = args.windows
    cfg = cfg.replace(**over)
    cfg.validate()
    return cfg


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            try:
                text = args.spec.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read spec {args.spec}: {exc.strerror}") from exc
            written = simkit.write_dataset(simkit.generate(simkit.parse_spec(text)), args.out)
            print(f"wrote {len(written)} config entries to {args.out / 'config.json'}")
            return 0
        cfg = _config(args)
        if args.command == "match":
            files = pipeline.run_match(cfg)
        elif args.command == "study":
            files = pipeline.run_study(cfg, intraday=args.intraday)
        elif args.command == "volume":
            files = pipeline.run_volume(cfg)
        elif args.command == "regress":
            files = pipeline.run_regress(cfg)
        elif args.command == "correlations":
            files = pipeline.run_correlations(cfg)
        else:
            files = report.run_report(cfg)
    except LeakStudyError as exc:
        print(exc.one_line(), file=sys.stderr)
        return exc.exit_status
    for f in files:
        print(f)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
