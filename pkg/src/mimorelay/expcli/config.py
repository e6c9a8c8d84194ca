"""Line-oriented ``key = value`` scenario configs.

Example::

    # joint power sweep with scaled feedback bits
    M = 4
    N = 2
    sweep_axis = joint
    sweep_values = 0:5:30
    modes = perfect, scaled, fixed
    B1 = 10
    B2 = 5
    output_dir = out/joint

Blank lines and ``#`` comments are ignored. ``sweep_values`` is either a
``start:step:stop`` range (stop included) or a comma list. ``B1``/``B2`` accept
``inf`` for ideal feedback on that hop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..precoder import SystemConfig
from ..quantizer import CODEBOOK_MODES

__all__ = ["ConfigError", "Scenario", "parse_config", "load_config", "SWEEP_AXES", "MODES"]

SWEEP_AXES = ("P1_dB", "P2_dB", "joint", "B1", "B2")
MODES = ("perfect", "fixed", "scaled")
_MODE_ALIASES = {
    "perfect": "perfect",
    "fixed": "fixed",
    "scaled": "scaled",
    "quantized-fixed-bits": "fixed",
    "quantized-scaled-bits": "scaled",
}
_INT_KEYS = {"M", "N", "trials", "seed", "workers"}
_FLOAT_KEYS = {"b", "theta", "P1_dB", "P2_dB"}
_BITS_KEYS = {"B1", "B2"}
_TEXT_KEYS = {"sweep_axis", "sweep_values", "modes", "output_dir", "codebook", "name"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _BITS_KEYS | _TEXT_KEYS
REQUIRED_KEYS = ("M", "N", "sweep_axis", "sweep_values")

# power used for the placeholder base config when a power is swept
_PLACEHOLDER_DB = 0.0


class ConfigError(ValueError):
    """Invalid scenario config; the message names the offending line when known."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class Scenario:
    """A sweep of one parameter over a base ``SystemConfig``.

    ``cfg`` holds the non-swept values. For the ``joint`` axis the sweep value
    sets ``P1 = P2``; for ``B1``/``B2`` it replaces the fixed bit count used by
    the ``fixed`` mode.
    """

    cfg: SystemConfig
    sweep_axis: str
    sweep_values: tuple
    modes: tuple = ("perfect", "scaled")
    b: float = 2.0
    theta: float = 0.5
    output_dir: Path = Path(".")
    workers: int = 1
    name: str = "results"
    P1_dB: Optional[float] = None
    P2_dB: Optional[float] = None
    comments: tuple = field(default=())

    def __post_init__(self):
        if not self.sweep_values:
            raise ConfigError("sweep is empty")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep_axis {self.sweep_axis!r}")

    def point(self, value, bits=None) -> SystemConfig:
        """System config at one sweep value; ``bits`` overrides ``(B1, B2)``."""
        P1_dB, P2_dB = self.P1_dB, self.P2_dB
        B1, B2 = self.cfg.B1, self.cfg.B2
        if self.sweep_axis == "joint":
            P1_dB = P2_dB = value
        elif self.sweep_axis == "P1_dB":
            P1_dB = value
        elif self.sweep_axis == "P2_dB":
            P2_dB = value
        elif self.sweep_axis == "B1":
            B1 = int(value)
        else:
            B2 = int(value)
        if bits is not None:
            B1, B2 = bits
        return self.cfg.with_(P1=db_to_linear(P1_dB), P2=db_to_linear(P2_dB), B1=B1, B2=B2)


def _parse_range(text: str, lineno: int):
    sep = ":" if ":" in text else ","
    try:
        parts = [float(p) for p in text.split(sep) if p.strip()]
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse sweep_values {text!r}") from None
    if not all(math.isfinite(p) for p in parts):
        raise ConfigError(f"line {lineno}: sweep_values must be finite")
    if sep == ",":
        return tuple(parts)
    if len(parts) != 3:
        raise ConfigError(f"line {lineno}: range must be start:step:stop, got {text!r}")
    start, step, stop = parts
    if step <= 0 or stop < start:
        raise ConfigError(f"line {lineno}: range needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(float(start + i * step) for i in range(count))


def _parse_bits(text: str, key: str, lineno: int):
    if text.lower() in ("inf", "perfect", "none"):
        return None
    try:
        v = int(text)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} must be an integer or 'inf', got {text!r}") from None
    if v < 0:
        raise ConfigError(f"line {lineno}: {key} must be nonnegative")
    return v


def parse_config(text: str) -> Scenario:
    """Parse and validate a scenario config.

    Defaults: ``trials = 20000``, ``theta = 0.5``, ``b = 2``, ``seed = 0``,
    ``modes = perfect, scaled``. Raises ``ConfigError`` naming the line at fault.
    """
    values = {}
    where = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not val:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        if key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be an integer, got {val!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be a number, got {val!r}") from None
            if not math.isfinite(values[key]):
                raise ConfigError(f"line {lineno}: {key} must be finite")
        elif key in _BITS_KEYS:
            values[key] = _parse_bits(val, key, lineno)
        else:
            values[key] = val
        where[key] = lineno

    for key in REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")

    def fail(key, msg):
        raise ConfigError(f"line {where[key]}: {msg}")

    M, N = values["M"], values["N"]
    if N < 2:
        fail("N", f"need N >= 2, got N = {N}")
    if M < N:
        fail("M", f"need M >= N, got M = {M}, N = {N}")
    theta = values.get("theta", 0.5)
    if not 0.0 < theta < 1.0:
        fail("theta", f"theta must lie in the open interval (0, 1), got {theta}")
    b = values.get("b", 2.0)
    if not b > 1.0:
        fail("b", f"b must exceed 1, got {b}")
    trials = values.get("trials", 20000)
    if trials < 1:
        fail("trials", "trials must be >= 1")
    seed = values.get("seed", 0)
    if not 0 <= seed < 2**64:
        fail("seed", "seed must be a nonnegative 64-bit integer")
    workers = values.get("workers", 1)
    if workers < 1:
        fail("workers", "workers must be >= 1")
    codebook = values.get("codebook", "auto")
    if codebook not in CODEBOOK_MODES:
        fail("codebook", f"codebook must be one of {', '.join(CODEBOOK_MODES)}")

    axis = values["sweep_axis"]
    if axis not in SWEEP_AXES:
        fail("sweep_axis", f"sweep_axis must be one of {', '.join(SWEEP_AXES)}, got {axis!r}")
    sweep = _parse_range(values["sweep_values"], where["sweep_values"])
    if not sweep:
        fail("sweep_values", "sweep is empty")
    if axis in ("B1", "B2") and any(v < 0 or v != int(v) for v in sweep):
        fail("sweep_values", f"{axis} sweep values must be nonnegative integers")

    modes = []
    for m in values.get("modes", "perfect, scaled").split(","):
        m = m.strip()
        if m not in _MODE_ALIASES:
            fail("modes", f"unknown mode {m!r}; choose from {', '.join(MODES)}")
        if _MODE_ALIASES[m] not in modes:
            modes.append(_MODE_ALIASES[m])
    if not modes:
        fail("modes", "no modes given")

    # powers that are not swept must be given
    needs = {"P1_dB": axis not in ("P1_dB", "joint"), "P2_dB": axis not in ("P2_dB", "joint")}
    for key, needed in needs.items():
        if needed and key not in values:
            raise ConfigError(f"missing required key {key!r} for sweep_axis = {axis}")
        if not needed and key in values:
            fail(key, f"{key} is set by the sweep and must not be given")
    if "fixed" in modes:
        for key in ("B1", "B2"):
            if key not in values and axis != key:
                raise ConfigError(f"missing required key {key!r} for mode 'fixed'")
    if axis in ("B1", "B2") and "scaled" in modes:
        fail("modes", "scaled bits cannot be combined with a bit sweep")

    P1_dB = values.get("P1_dB", _PLACEHOLDER_DB)
    P2_dB = values.get("P2_dB", _PLACEHOLDER_DB)
    cfg = SystemConfig(
        M, N, db_to_linear(P1_dB), db_to_linear(P2_dB),
        B1=values.get("B1", 0), B2=values.get("B2", 0),
        trials=trials, seed=seed, codebook=codebook,
    )
    return Scenario(
        cfg=cfg,
        sweep_axis=axis,
        sweep_values=sweep,
        modes=tuple(modes),
        b=b,
        theta=theta,
        output_dir=Path(values.get("output_dir", ".")),
        workers=workers,
        name=values.get("name", "results"),
        P1_dB=P1_dB,
        P2_dB=P2_dB,
    )


def load_config(path) -> Scenario:
    return parse_config(Path(path).read_text(encoding="utf-8"))
