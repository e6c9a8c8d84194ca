"""Run a scenario sweep and write its rows as CSV.

Each sweep point yields one row per mode. Quantized rows come from paired
draws, so ``R_P`` on a quantized row is the perfect-CSI rate on the very same
channels and ``delta_R_per_user`` is ``(R_P - R_Q)/N`` on those pairs.
The ceilings ``R_U1``/``R_U2`` are per-user values in units of ``(2/N) R``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Optional

from .. import bounds
from ..precoder import SystemConfig
from ..ratesim import simulate
from .config import Scenario

__all__ = ["ResultRow", "CSV_COLUMNS", "run_point", "run_scenario", "format_csv", "write_csv", "ScenarioAborted"]

log = logging.getLogger(__name__)


class ScenarioAborted(RuntimeError):
    """A sweep stopped early; ``rows`` holds what finished and ``cause`` the error."""

    def __init__(self, message, rows, cause):
        super().__init__(message)
        self.rows = rows
        self.cause = cause


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    mode: str
    series: str
    R_P: Optional[float]
    R_P_stderr: Optional[float]
    R_Q: Optional[float] = None
    R_Q_stderr: Optional[float] = None
    delta_R_per_user: Optional[float] = None
    delta_R_stderr: Optional[float] = None
    bound_high_snr: Optional[float] = None
    bound_full_est: Optional[float] = None
    R_U1: Optional[float] = None
    R_U2: Optional[float] = None
    B1_used: Optional[int] = None
    B2_used: Optional[int] = None
    discards: int = 0
    flags: str = ""


CSV_COLUMNS = tuple(f.name for f in fields(ResultRow))


class FirstTermCache:
    """Memoizes the B1-only bound term, which does not depend on the powers."""

    def __init__(self, trials: int, seed: int, codebook: str = "auto"):
        self.trials, self.seed, self.codebook = trials, seed, codebook
        self._store = {}

    def __call__(self, M, N, B1):
        if B1 is None:
            return 0.0
        key = (M, N, B1)
        if key not in self._store:
            est = bounds.first_term_estimate(M, N, B1, self.trials, self.seed, self.codebook)
            self._store[key] = est.term
        return self._store[key]


def _bits_label(b):
    return "inf" if b is None else str(b)


def _ceilings(M, N, B1, B2):
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", bounds.ApproximationWarning)
        u1 = None if B1 is None else bounds.ceiling_R_U1(M, N, B1)
        u2 = None if B2 is None else bounds.ceiling_R_U2(M, N, B2)
    if caught:
        flags.append("ceiling_asymptotic")
    return u1, u2, flags


def run_point(
    cfg: SystemConfig,
    sweep_value: float,
    mode: str,
    first_term: Callable,
    workers: int = 1,
    series: Optional[str] = None,
    extra_flags=(),
) -> ResultRow:
    """Simulate one ``(sweep point, mode)`` pair; ``cfg`` already carries the bits to use."""
    flags = list(extra_flags)
    if mode == "perfect":
        est = simulate(cfg, quantized=False, workers=workers).perfect()
        if est.warning:
            flags.append("discards")
        return ResultRow(
            sweep_value, mode, series or mode, est.mean, est.std_error,
            discards=est.discards, flags=";".join(flags),
        )
    pairs = simulate(cfg, quantized=True, workers=workers)
    rp, rq, loss = pairs.perfect(), pairs.quantized(), pairs.loss_per_user()
    if loss.warning:
        flags.append("discards")
    M, N = cfg.M, cfg.N
    high = bounds.high_snr_bound(M, N, cfg.P1, cfg.P2, cfg.B1, cfg.B2)
    u1, u2, cflags = _ceilings(M, N, cfg.B1, cfg.B2)
    flags += cflags
    return ResultRow(
        sweep_value, mode, series or mode,
        rp.mean, rp.std_error, rq.mean, rq.std_error, loss.mean, loss.std_error,
        bound_high_snr=high,
        bound_full_est=first_term(M, N, cfg.B1) + high,
        R_U1=u1, R_U2=u2, B1_used=cfg.B1, B2_used=cfg.B2,
        discards=pairs.discards, flags=";".join(flags),
    )


def scenario_rows(s: Scenario, on_row: Optional[Callable] = None):
    """Generate rows in sweep order; ``on_row`` sees each finished row."""
    cache = FirstTermCache(s.cfg.trials, s.cfg.seed, s.cfg.codebook)
    for value in s.sweep_values:
        for mode in s.modes:
            cfg = s.point(value)
            extra = []
            if mode == "scaled":
                plan = bounds.scale_bits(cfg.M, cfg.N, cfg.P1, cfg.P2, s.b, s.theta)
                log.info(
                    "sweep %s=%g: B1_exact=%.6f B2_exact=%.6f -> B1=%d B2=%d (theta=%g, b=%g)",
                    s.sweep_axis, value, plan.B1_exact, plan.B2_exact, plan.B1, plan.B2, s.theta, s.b,
                )
                cfg = cfg.with_(B1=plan.B1, B2=plan.B2)
                if plan.clamped:
                    extra.append("bits_clamped")
            row = run_point(cfg, value, mode, cache, s.workers, extra_flags=extra)
            if on_row is not None:
                on_row(row)
            yield row


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v!r} in result row")
        return repr(v)
    return str(v)


def format_csv(rows, comments=(), columns=CSV_COLUMNS) -> str:
    """Rows as UTF-8 CSV text with ``#`` comment lines ahead of the header."""
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        d = asdict(r) if not isinstance(r, dict) else r
        w.writerow([_cell(d.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, comments=(), columns=CSV_COLUMNS) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(rows, comments, columns))
    return path


def scenario_comments(s: Scenario):
    c = s.cfg
    out = [
        f"scenario {s.name}",
        f"M={c.M} N={c.N} sweep_axis={s.sweep_axis} modes={','.join(s.modes)}",
        f"trials={c.trials} seed={c.seed} codebook={c.codebook} b={s.b!r} theta={s.theta!r}",
    ]
    if s.sweep_axis != "joint":
        fixed = [f"{k}={v!r}" for k, v in (("P1_dB", s.P1_dB), ("P2_dB", s.P2_dB)) if k != s.sweep_axis]
        out.append("fixed " + " ".join(fixed))
    if "fixed" in s.modes:
        out.append(f"fixed bits B1={_bits_label(c.B1)} B2={_bits_label(c.B2)}")
    out.extend(s.comments)
    return out


def run_scenario(s: Scenario, write: bool = True):
    """Run every sweep point and mode; writes ``<output_dir>/<name>.csv`` when ``write``.

    On failure the finished rows are still written, a ``<name>.csv.partial``
    marker with the error text is left next to them, and ``ScenarioAborted``
    is raised.
    """
    rows = []
    out = s.output_dir / f"{s.name}.csv"
    marker = out.with_name(out.name + ".partial")
    try:
        for row in scenario_rows(s):
            rows.append(row)
    except Exception as exc:
        if write:
            write_csv(out, rows, scenario_comments(s) + ["INCOMPLETE: run aborted"])
            marker.write_text(f"{type(exc).__name__}: {exc}\n", encoding="utf-8")
        raise ScenarioAborted(f"scenario {s.name} aborted after {len(rows)} rows", rows, exc) from exc
    if write:
        write_csv(out, rows, scenario_comments(s))
        if marker.exists():
            marker.unlink()
    return rows
