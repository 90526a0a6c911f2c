"""Run configuration: numeric thresholds, jet order and seeds.

Config files are flat ``key = value`` text; ``#`` starts a comment.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Config:
    jet_order: int = 12
    eps_zero: float = 1e-10
    ode_tol: float = 1e-12
    q_max: int = 1000
    rational_tol: float = 1e-9
    seed: int = 20240917
    max_depth: int = 20
    theta_min: float = 0.1
    small_divisor: float = 1e-6
    jet_rel_tol: float = 1e-6
    samples: int = 128

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def validate(self):
        if self.jet_order < 2:
            raise ValueError("jet_order must be at least 2")
        for name in ("eps_zero", "ode_tol", "rational_tol", "small_divisor", "jet_rel_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.q_max < 1 or self.max_depth < 0 or self.samples < 8:
            raise ValueError("q_max, max_depth or samples out of range")
        return self

    def as_dict(self):
        return dataclasses.asdict(self)


DEFAULT = Config()


def parse_config(text):
    fields = {f.name: f.type for f in dataclasses.fields(Config)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = int(value) if fields[key] in (int, "int") else float(value)
        except ValueError:
            raise ValueError(f"config line {lineno}: bad value {value!r} for {key}") from None
    return Config(**values).validate()


def load_config(path=None):
    if path is None:
        return DEFAULT
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def thread_cap():
    """Worker count from FOLIATION_LAB_THREADS (default: CPU count)."""
    raw = os.environ.get("FOLIATION_LAB_THREADS", "")
    if raw.strip():
        return max(1, int(raw))
    return max(1, os.cpu_count() or 1)
