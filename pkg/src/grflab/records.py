"""Value records shared by the solvers and the reporting layer."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not-applicable"

ENTROPY_COLUMNS = ("tau", "N_phi", "W_phi", "Psi", "P", "N_H", "W_H")


@dataclass
class EntropyRecord:
    tau: float
    N_phi: float
    W_phi: float
    Psi: float
    P: float
    N_H: float = field(init=False)
    W_H: float = field(init=False)
    residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        self.N_H = self.N_phi - self.P / 3.0
        self.W_H = self.W_phi - (self.Psi + self.P) / 3.0

    def row(self) -> list[float]:
        return [getattr(self, c) for c in ENTROPY_COLUMNS]


@dataclass
class CheckReport:
    """Outcome of one named equality or inequality check.

    ``margin`` is signed so that a non-negative value means the statement
    holds; ``verdict`` is derived from it unless the hypotheses failed.
    """

    name: str
    lhs: float
    rhs: float
    margin: float
    tolerance: float = 0.0
    verdict: str = ""
    context: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict != NOT_APPLICABLE:
            ok = math.isfinite(self.margin) and self.margin >= -self.tolerance
            self.verdict = PASS if ok else FAIL

    @classmethod
    def not_applicable(cls, name, reason, **context) -> "CheckReport":
        ctx = dict(context)
        ctx["reason"] = reason
        return cls(name, math.nan, math.nan, math.nan, verdict=NOT_APPLICABLE, context=ctx)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        from .registry import paper_statement

        return {
            "name": self.name,
            "paper_statement": paper_statement(self.name),
            "lhs": _clean(self.lhs),
            "rhs": _clean(self.rhs),
            "margin": _clean(self.margin),
            "tolerance": _clean(self.tolerance),
            "verdict": self.verdict,
            "context": {k: _clean(v) for k, v in sorted(self.context.items())},
        }


def _clean(v):
    """JSON-safe rounding; 12 significant digits keeps artifacts stable."""
    if isinstance(v, float):
        if not math.isfinite(v):
            return None
        return float(f"{v:.12g}")
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in sorted(v.items())}
    if hasattr(v, "item"):
        return _clean(v.item())
    return v


def dump_checks(checks, path) -> None:
    data = [c.to_dict() for c in checks]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows))
