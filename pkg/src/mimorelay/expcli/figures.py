"""Regenerate the data behind the published figures as CSV plus a gnuplot script.

Parameter sets are fixed per figure. Where a figure shows "fixed bits"
curves, the bits are the scaled plan evaluated at the sweep midpoint (15 dB),
and the CSV header comment records the values used. The curves are for
qualitative comparison; the original trial counts and seeds are unknown.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .. import bounds
from ..precoder import SystemConfig
from .config import Scenario, db_to_linear
from .runner import CSV_COLUMNS, FirstTermCache, run_point, scenario_rows, write_csv

__all__ = ["FIGURES", "FigureResult", "reproduce_figure", "midpoint_bits"]

FIGURES = (2, 3, 4, 5, 6, 7, 8)
POWER_SWEEP = tuple(float(v) for v in range(0, 31, 5))
HIGH_SNR_SWEEP = tuple(float(v) for v in range(0, 61, 5))
MIDPOINT_DB = 15.0


@dataclass
class FigureResult:
    figure: int
    rows: list
    comments: list
    csv_path: Optional[Path] = None
    script_path: Optional[Path] = None


def midpoint_bits(M, N, P1_dB, P2_dB, b=2.0, theta=0.5):
    """Integer scaled-plan bits at one operating point, used for the fixed-bits curves."""
    plan = bounds.scale_bits(M, N, db_to_linear(P1_dB), db_to_linear(P2_dB), b, theta)
    return plan.B1, plan.B2


def _labelled(rows, prefix):
    return [replace(r, series=f"{prefix}{r.series}") for r in rows]


def _power_scenario(M, N, axis, fixed_db, trials, seed, workers, name):
    P1_dB = fixed_db if axis == "P2_dB" else None
    P2_dB = fixed_db if axis == "P1_dB" else None
    # bits for the fixed curve: scaled plan at the sweep midpoint
    mid1 = MIDPOINT_DB if P1_dB is None else P1_dB
    mid2 = MIDPOINT_DB if P2_dB is None else P2_dB
    B1, B2 = midpoint_bits(M, N, mid1, mid2)
    cfg = SystemConfig(M, N, 1.0, 1.0, B1=B1, B2=B2, trials=trials, seed=seed)
    return Scenario(
        cfg=cfg, sweep_axis=axis, sweep_values=POWER_SWEEP, modes=("perfect", "scaled", "fixed"),
        workers=workers, name=name, P1_dB=P1_dB, P2_dB=P2_dB,
        comments=(f"fixed bits B1={B1} B2={B2} from the scaled plan at P1_dB={mid1:g} P2_dB={mid2:g}",),
    )


def _fig2(trials, seed, workers):
    M, N, p_db = 4, 2, 25.0
    P = db_to_linear(p_db)
    cache = FirstTermCache(trials, seed)
    rows = []
    for B2 in range(2, 11):
        for B1 in range(4, 15):
            cfg = SystemConfig(M, N, P, P, B1=B1, B2=B2, trials=trials, seed=seed)
            rows.append(run_point(cfg, float(B1), "fixed", cache, workers, series=f"B2={B2}"))
    comments = [
        f"figure 2: rate loss per user vs B1 for B2 in 2..10, M={M} N={N} P1_dB=P2_dB={p_db:g}",
        f"trials={trials} seed={seed}; sweep_value is B1",
    ]
    return rows, comments


def _fig3(trials, seed, workers):
    M, N = 4, 2
    cache = FirstTermCache(trials, seed)
    rows = []
    for B1, B2 in ((None, None), (None, 2), (None, 4), (6, None), (9, None)):
        mode = "perfect" if B1 is None and B2 is None else "fixed"
        label = mode if mode == "perfect" else f"B1={'inf' if B1 is None else B1},B2={'inf' if B2 is None else B2}"
        for db in HIGH_SNR_SWEEP:
            P = db_to_linear(db)
            cfg = SystemConfig(M, N, P, P, B1=B1, B2=B2, trials=trials, seed=seed)
            rows.append(run_point(cfg, db, mode, cache, workers, series=label))
    comments = [
        f"figure 3: sum rate vs P1_dB=P2_dB up to 60 dB with interference-limited ceilings, M={M} N={N}",
        f"trials={trials} seed={seed}; R_U1/R_U2 are per-user ceilings in units of (2/N) R",
    ]
    return rows, comments


def _sweep_fig(fig, M, N, axis, fixed_db, trials, seed, workers, caption):
    s = _power_scenario(M, N, axis, fixed_db, trials, seed, workers, f"fig{fig}")
    rows = list(scenario_rows(s))
    comments = [f"figure {fig}: {caption}", f"M={M} N={N} trials={trials} seed={seed} b=2 theta=0.5"]
    return rows, comments + list(s.comments)


def _fig4(trials, seed, workers):
    rows, comments = [], ["figure 4: sum rate with fixed bits vs perfect CSI, M=4 N in {2,4}, P1_dB=P2_dB 0..30"]
    for N in (2, 4):
        s = _power_scenario(4, N, "joint", None, trials, seed, workers, "fig4")
        s = replace(s, modes=("perfect", "fixed"))
        rows += _labelled(scenario_rows(s), f"N={N} ")
        comments += [f"N={N}: {c}" for c in s.comments]
    comments.append(f"trials={trials} seed={seed}")
    return rows, comments


_BUILDERS = {
    2: _fig2,
    3: _fig3,
    4: _fig4,
    5: lambda t, s, w: _sweep_fig(5, 4, 2, "joint", None, t, s, w, "perfect, scaled and fixed bits, P1_dB=P2_dB 0..30"),
    6: lambda t, s, w: _sweep_fig(6, 4, 4, "joint", None, t, s, w, "perfect, scaled and fixed bits, P1_dB=P2_dB 0..30"),
    7: lambda t, s, w: _sweep_fig(7, 4, 2, "P2_dB", 10.0, t, s, w, "fixed P1_dB=10, P2_dB 0..30"),
    8: lambda t, s, w: _sweep_fig(8, 4, 2, "P1_dB", 20.0, t, s, w, "fixed P2_dB=20, P1_dB 0..30"),
}


def _series(rows):
    seen = []
    for r in rows:
        if r.series not in seen:
            seen.append(r.series)
    return seen


def _pick(series, col, scale=""):
    return f'(strcol("series") eq "{series}" ? {scale}column("{col}") : NaN)'


def plot_script(fig: int, csv_name: str, rows) -> str:
    """gnuplot commands that draw the figure from ``csv_name``."""
    lines = [
        f"# gnuplot script for figure {fig}; run: gnuplot fig{fig}.gp",
        'set datafile separator ","',
        "set datafile columnheaders",
        "set grid",
        "set key left top",
        "set terminal pngcairo size 900,600",
        f'set output "fig{fig}.png"',
    ]
    series = _series(rows)
    plots = []
    if fig == 2:
        lines += ['set xlabel "B1 (bits)"', 'set ylabel "rate loss per user (b/s/Hz)"', "set logscale y"]
        for s in series:
            plots.append(f'"{csv_name}" using 1:{_pick(s, "delta_R_per_user")} with linespoints title "simulated {s}"')
            plots.append(f'"{csv_name}" using 1:{_pick(s, "bound_full_est")} with lines dashtype 2 title "bound {s}"')
    elif fig == 3:
        lines += ["N = 2", 'set xlabel "P1 = P2 (dB)"', 'set ylabel "(2/N) sum rate (b/s/Hz)"']
        for s in series:
            rate = "R_P" if s == "perfect" else "R_Q"
            plots.append(f'"{csv_name}" using 1:{_pick(s, rate, "2.0/N*")} with linespoints title "{s}"')
            col = "R_U2" if "B1=inf" in s else "R_U1"
            if s != "perfect":
                plots.append(f'"{csv_name}" using 1:{_pick(s, col)} with lines dashtype 2 title "ceiling {s}"')
    else:
        xlabel = {7: "P2 (dB)", 8: "P1 (dB)"}.get(fig, "P1 = P2 (dB)")
        lines += [f'set xlabel "{xlabel}"', 'set ylabel "sum rate (b/s/Hz)"']
        for s in series:
            col = "R_P" if s.endswith("perfect") else "R_Q"
            plots.append(f'"{csv_name}" using 1:{_pick(s, col)} with linespoints title "{s}"')
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def reproduce_figure(fig: int, out_dir=".", trials: int = 20000, seed: int = 0, workers: int = 1, write: bool = True):
    """Simulate figure ``fig`` and write ``fig<id>.csv`` and ``fig<id>.gp`` into ``out_dir``."""
    if fig not in _BUILDERS:
        raise KeyError(f"unknown figure {fig}; choose from {', '.join(map(str, FIGURES))}")
    rows, comments = _BUILDERS[fig](trials, seed, workers)
    result = FigureResult(fig, rows, comments)
    if write:
        out = Path(out_dir)
        result.csv_path = write_csv(out / f"fig{fig}.csv", rows, comments, CSV_COLUMNS)
        result.script_path = out / f"fig{fig}.gp"
        result.script_path.write_text(plot_script(fig, result.csv_path.name, rows), encoding="utf-8")
    return result
