"""Markdown report with the layouts of the daily AAR, volume and wider-window CAAR tables."""

from __future__ import annotations

from pathlib import Path

from .crosssection import stars
from .eventstudy import DAILY_WINDOWS, aar, aav_caav, caar, window_label
from .outputs import write_csv
from .panels import daily_volume_panel
from .pipeline import (
    RunConfig,
    _prepare_out,
    event_inputs,
    funnel_with_coverage,
    load_inputs,
    num,
    pct,
    return_panel,
    select_leaks,
    write_manifest,
)

DAYS = tuple(range(0, 11))
PANELS = (("announce", "Panel A. Public Announcement"), ("leak", "Panel B. Leaked News"))


def _n(*counts) -> str:
    distinct = sorted(set(counts))
    return str(distinct[0]) if len(distinct) == 1 else "/".join(str(c) for c in counts)


def aar_table(panels: dict) -> tuple[str, list]:
    """Day, n, then AAR / t / p for each anchor."""
    md = ["| Day from Announcement | n | A: AAR | A: t-stat | A: p-value | B: AAR | B: t-stat | B: p-value |",
          "|---|---|---|---|---|---|---|---|"]
    rows = []
    for d in DAYS:
        s = {a: aar(panels[a], d) for a, _ in PANELS}
        md.append(f"| {d} | {_n(*(x.n for x in s.values()))} | " + " | ".join(
            f"{pct(x.estimate, stars(x.p_value))} | {num(x.t_stat)} | {num(x.p_value)}" for x in s.values()) + " |")
        rows.append([d] + [v for x in s.values() for v in (x.n, x.estimate, x.t_stat, x.p_value)])
    return "\n".join(md) + "\n", rows


def volume_table(panels: dict) -> tuple[str, list]:
    """Day, n, then AAV / t / CAAV / t for each anchor (display percent)."""
    md = ["| Day from Announcement | n | A: AAV | A: t-stat | A: CAAV | A: t-stat | "
          "B: AAV | B: t-stat | B: CAAV | B: t-stat |",
          "|---|---|---|---|---|---|---|---|---|---|"]
    rows = []
    pairs = {a: aav_caav(panels[a], DAYS) for a, _ in PANELS}
    for i, d in enumerate(DAYS):
        cells, raw, ns = [], [d], []
        for a, _ in PANELS:
            av, cv = pairs[a][i]
            ns.append(av.stat.n)
            for row in (av, cv):
                shown = "–" if row.display_pct is None else f"{row.display_pct:+.2f}%{stars(row.stat.p_value)}"
                cells += [shown, num(row.stat.t_stat)]
                raw += [row.stat.n, row.stat.estimate, row.display_pct, row.stat.t_stat, row.stat.p_value]
        md.append(f"| {d} | {_n(*ns)} | " + " | ".join(cells) + " |")
        rows.append(raw)
    return "\n".join(md) + "\n", rows


def caar_table(panels: dict) -> tuple[str, list]:
    """Event window, n, then FF3 / Carhart CAAR (t) for each anchor.

    Leak-anchored windows that start before day 0 are left blank.
    """
    md = ["| Event Window | n | A: Fama-French CAAR (t) | A: Carhart CAAR (t) | "
          "B: Fama-French CAAR (t) | B: Carhart CAAR (t) |",
          "|---|---|---|---|---|---|"]
    rows = []
    for w in DAILY_WINDOWS:
        cells, raw, ns = [], [window_label(w)], []
        for anchor, _ in PANELS:
            for model in ("ff3", "carhart"):
                if anchor == "leak" and w[0] < 0:
                    cells.append("–")
                    raw += [None] * 4
                    continue
                s = caar(panels[(anchor, model)], w)
                ns.append(s.n)
                cells.append(f"{pct(s.estimate, stars(s.p_value))} ({num(s.t_stat, 2)})")
                raw += [s.n, s.estimate, s.t_stat, s.p_value]
        md.append(f"| {window_label(w)} | {_n(*ns)} | " + " | ".join(cells) + " |")
        rows.append(raw)
    return "\n".join(md) + "\n", rows


def _cols(prefixes, fields):
    return [f"{p}_{f}" for p in prefixes for f in fields]


def run_report(cfg: RunConfig) -> list[Path]:
    inp = load_inputs(cfg)
    sel = select_leaks(cfg, inp)
    out = _prepare_out(cfg)
    excluded = []

    capm = {}
    for anchor, _ in PANELS:
        capm[anchor] = return_panel(cfg, inp, sel.leaks, anchor=anchor, model="capm")
        excluded += [(f"{anchor}:capm:{e}", c) for e, c in capm[anchor].excluded]
    vol = {}
    for anchor, _ in PANELS:
        evs, exc = event_inputs(cfg, inp, sel.leaks, anchor, "madj")
        vol[anchor] = daily_volume_panel(evs, inp.daily, DAYS)
        excluded += [(f"{anchor}:volume:{e}", c) for e, c in exc + vol[anchor].excluded]
    wide = {}
    for anchor, _ in PANELS:
        for model in ("ff3", "carhart"):
            wide[(anchor, model)] = p = return_panel(cfg, inp, sel.leaks, anchor=anchor, model=model)
            excluded += [(f"{anchor}:{model}:{e}", c) for e, c in p.excluded]

    t4, r4 = aar_table(capm)
    t5, r5 = volume_table(vol)
    t6, r6 = caar_table(wide)
    files = [
        write_csv(out / "table_aar.csv", ["day", *_cols("A", "n est t p".split()), *_cols("B", "n est t p".split())], r4),
        write_csv(out / "table_volume.csv",
                  ["day", *_cols(["A_aav", "A_caav", "B_aav", "B_caav"], "n log pct t p".split())], r5),
        write_csv(out / "table_caar.csv",
                  ["window", *_cols(["A_ff3", "A_carhart", "B_ff3", "B_carhart"], "n est t p".split())], r6),
    ]
    doc = [
        "# Event study report", "",
        "Panel A is anchored on the public announcement, Panel B on the leaked news. "
        "Stars mark one-sided significance at 10%, 5% and 1%.", "",
        "## Average abnormal returns, CAPM", "", t4,
        "## Average abnormal volumes", "",
        "Displayed as 100·(exp(x)−1); raw log points are in table_volume.csv.", "", t5,
        "## Cumulative average abnormal returns, Fama-French and Carhart", "", t6,
    ]
    (out / "report.md").write_text("\n".join(doc), encoding="utf-8")
    files.append(out / "report.md")
    funnel = funnel_with_coverage(cfg, inp, sel)
    return files + [write_manifest(out, "report", cfg, inp, funnel, files, excluded)]
