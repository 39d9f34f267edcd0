"""Check reports: verdict, bounds, and a counterexample when violated."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

OK = "ok"
VIOLATED = "violated"
ERROR = "error"

_RANK = {OK: 0, VIOLATED: 1, ERROR: 2}

# Stated on every bounded verdict: "ok" is relative to the explored space.
BOUNDED_NOTE = "bounded check: ok means no violation within the stated bounds"


@dataclass
class CheckReport:
    check: str
    verdict: str = OK
    bounds: dict = field(default_factory=dict)
    counterexample: Optional[dict] = None
    stats: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if (self.verdict == VIOLATED) != (self.counterexample is not None):
            raise ValueError("a counterexample is present exactly when violated")

    @property
    def ok(self) -> bool:
        return self.verdict == OK

    @property
    def exit_code(self) -> int:
        return _RANK[self.verdict]

    def to_json(self) -> dict[str, Any]:
        return {"check": self.check, "verdict": self.verdict, "bounds": self.bounds,
                "counterexample": self.counterexample, "stats": self.stats,
                "notes": self.notes}

    def summary(self) -> str:
        s = f"{self.check}: {self.verdict}"
        if self.counterexample:
            s += f" ({self.counterexample.get('predicate', '')})"
        return s


def violated(check: str, bounds: dict, stats: dict | None = None, **cex) -> CheckReport:
    return CheckReport(check, VIOLATED, bounds, cex, stats or {})


def merge(reports: list[CheckReport], check: str | None = None) -> CheckReport:
    """Combine reports; the worst verdict wins and the first counterexample is kept."""
    if not reports:
        return CheckReport(check or "empty")
    worst = max(reports, key=lambda r: _RANK[r.verdict])
    stats: dict = {}
    for r in reports:
        for k, v in r.stats.items():
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                stats[k] = stats.get(k, 0) + v
    notes = []
    for r in reports:
        notes += [n for n in r.notes if n not in notes]
    bounds = {}
    for r in reports:
        bounds.update(r.bounds)
    return CheckReport(check or worst.check, worst.verdict, bounds,
                       worst.counterexample if worst.verdict == VIOLATED else None,
                       stats, notes)


def mem_json(mem) -> dict:
    out = {k: v for k, v in sorted(mem.as_dict().items())}
    out.update({f"lock:{k}": v for k, v in sorted(mem.locks.items())})
    return out


def mds_json(mds) -> dict:
    return {"AsmNoW": sorted(mds.asm_no_w), "AsmNoRW": sorted(mds.asm_no_rw),
            "GuarNoW": sorted(mds.guar_no_w), "GuarNoRW": sorted(mds.guar_no_rw)}
