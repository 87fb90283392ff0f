"""Named checks and the JSON run report.

``report.json`` holds everything that is a function of config and seed, so
two identical runs write identical bytes. Wall-clock time goes to a separate
``timing.json``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, _backend


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


@dataclass(frozen=True)
class Check:
    """One pass/fail comparison.

    ``kind`` is ``"within"`` (``|value - expected| <= tolerance``),
    ``"at_most"`` (``value <= tolerance``), ``"at_least"``
    (``value >= tolerance``) or ``"between"`` (``expected[0] <= value <=
    expected[1]``).
    """

    name: str
    value: float
    expected: object
    tolerance: object
    passed: bool
    kind: str
    equation: str = ""

    @classmethod
    def within(cls, name, value, expected, tolerance, equation=""):
        ok = math.isfinite(value) and abs(value - expected) <= tolerance
        return cls(name, float(value), float(expected), float(tolerance), bool(ok), "within", equation)

    @classmethod
    def at_most(cls, name, value, limit, equation=""):
        ok = math.isfinite(value) and value <= limit
        return cls(name, float(value), None, float(limit), bool(ok), "at_most", equation)

    @classmethod
    def at_least(cls, name, value, limit, equation=""):
        ok = math.isfinite(value) and value >= limit
        return cls(name, float(value), None, float(limit), bool(ok), "at_least", equation)

    @classmethod
    def between(cls, name, value, lo, hi, equation=""):
        ok = math.isfinite(value) and lo <= value <= hi
        return cls(name, float(value), [float(lo), float(hi)], None, bool(ok), "between", equation)

    @classmethod
    def flag(cls, name, ok: bool, detail="", equation=""):
        return cls(name, 1.0 if ok else 0.0, detail or None, None, bool(ok), "flag", equation)

    def to_dict(self) -> dict:
        return _clean({
            "value": self.value,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "kind": self.kind,
            "equation": self.equation,
            "pass": self.passed,
        })

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.kind == "within":
            rel = f"|{self.value:.6g} - {self.expected:.6g}| <= {self.tolerance:.3g}"
        elif self.kind == "at_most":
            rel = f"{self.value:.6g} <= {self.tolerance:.3g}"
        elif self.kind == "at_least":
            rel = f"{self.value:.6g} >= {self.tolerance:.3g}"
        elif self.kind == "between":
            rel = f"{self.expected[0]:.6g} <= {self.value:.6g} <= {self.expected[1]:.6g}"
        else:
            rel = str(self.expected or "")
        return f"{status} {self.name}: {rel}"


@dataclass
class RunReport:
    command: str
    config: dict
    seed: int
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    equations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    error: dict | None = None
    timing: dict = field(default_factory=dict)
    """Extra wall-clock figures; written to timing.json, never to report.json."""

    def add(self, *checks: Check):
        self.checks.extend(checks)
        for c in checks:
            if c.equation and c.equation not in self.equations:
                self.equations.append(c.equation)

    def fail_with(self, code: str, message: str):
        self.error = {"code": code, "message": message}

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        names = [c.name for c in self.checks]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate check names in {names}")
        return _clean({
            "command": self.command,
            "version": __version__,
            "backend": _backend.BACKEND,
            "seed": self.seed,
            "config": self.config,
            "equations": self.equations,
            "results": self.results,
            "checks": {c.name: c.to_dict() for c in self.checks},
            "warnings": self.warnings,
            "error": self.error,
            "pass": self.passed,
            "timing_file": "timing.json",
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, directory, seconds: float) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "report.json"
        path.write_text(self.to_json(), encoding="utf-8", newline="\n")
        timing = {"command": self.command, "wall_clock_seconds": round(seconds, 3), **_clean(self.timing)}
        (directory / "timing.json").write_text(json.dumps(timing, indent=2) + "\n", encoding="utf-8", newline="\n")
        return path

    def summary_lines(self) -> list[str]:
        lines = [c.line() for c in self.checks]
        if self.error:
            lines.append(f"ERROR {self.error['code']}: {self.error['message']}")
        lines.append(f"{'PASS' if self.passed else 'FAIL'} {self.command}")
        return lines
