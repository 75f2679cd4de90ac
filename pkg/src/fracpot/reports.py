"""Structured verification results and deterministic serialization.

Implements:
  - Check: one measured quantity against one tolerance.
  - PropertyReport: a named bundle of checks plus free-form detail values,
    serializable to JSON with stable key order.
  - write_csv: deterministic CSV output (fixed float formatting) so identical
    inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

__all__ = ["Check", "PropertyReport", "write_csv", "format_float"]


def format_float(x: Any) -> str:
    """Shortest round-trip decimal form, stable across runs."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    v = float(x)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _jsonable(x: Any) -> Any:
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        # JSON has no inf/nan literals; encode as strings.
        if np.isnan(v) or np.isinf(v):
            return format_float(v)
        return v
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in x.items()}
    return x


@dataclass
class Check:
    """One verified property: a measured constant against a tolerance.

    ``tolerance`` carries whatever bound the check used (absolute, relative,
    or a window half-width); its meaning is stated in the property name or
    the extra fields. ``extra`` holds check-specific values (fitted and
    predicted exponents, regimes, counts) merged into the JSON record.
    """

    property: str
    constant: float
    tolerance: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "property": self.property,
            "constant": _jsonable(self.constant),
            "tolerance": _jsonable(self.tolerance),
            "pass": bool(self.passed),
        }
        for k, v in self.extra.items():
            if k not in out:
                out[k] = _jsonable(v)
        return out


@dataclass
class PropertyReport:
    """Named bundle of checks with auxiliary detail values."""

    name: str
    checks: list[Check] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(
        self,
        property: str,
        constant: float,
        tolerance: float,
        passed: bool,
        **extra: Any,
    ) -> Check:
        check = Check(property, constant, tolerance, bool(passed), dict(extra))
        self.checks.append(check)
        return check

    def check_named(self, property: str) -> Check:
        for c in self.checks:
            if c.property == property:
                return c
        raise KeyError(property)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "details": _jsonable(self.details),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    def summary_lines(self) -> list[str]:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(
                f"[{status}] {self.name}: {c.property} = "
                f"{format_float(c.constant)} (tolerance {format_float(c.tolerance)})"
            )
        return lines


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write rows with deterministic float formatting (no csv-module quirks)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(str(h) for h in header) + "\n")
        for row in rows:
            fh.write(",".join(format_float(v) for v in row) + "\n")
