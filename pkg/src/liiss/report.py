"""Check reports: one line per violation plus a machine-readable summary."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .numerics import fmt17


@dataclass
class Violation:
    index: Any
    time: Optional[float]
    lhs: float
    rhs: float
    margin: float
    detail: str = ""

    def to_line(self) -> str:
        t = "" if self.time is None else fmt17(self.time)
        idx = "/".join(str(i) for i in self.index) if isinstance(self.index, tuple) else str(self.index)
        line = f"{idx},{t},{fmt17(self.lhs)},{fmt17(self.rhs)},{fmt17(self.margin)}"
        return f"{line},{self.detail}" if self.detail else line


@dataclass
class Report:
    """Outcome of a sampled check.

    ``margin`` is always ``rhs - lhs`` for an inequality ``lhs <= rhs``, so a
    negative margin is a violation. ``worst_margin`` is the smallest margin seen
    over every checked sample, violating or not.
    """

    name: str
    violations: list = field(default_factory=list)
    worst_margin: float = math.inf
    n_checked: int = 0
    info: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def observe(self, margin: float):
        self.n_checked += 1
        if margin < self.worst_margin:
            self.worst_margin = margin

    def to_text(self) -> str:
        lines = [f"# {self.name}: {len(self.violations)} violation(s) over {self.n_checked} sample(s)",
                 "index,time,lhs,rhs,margin"]
        lines.extend(v.to_line() for v in self.violations)
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        worst = None if math.isinf(self.worst_margin) else float(self.worst_margin)
        out = {"check": self.name, "violations": len(self.violations), "worst_margin": worst,
               "samples": self.n_checked}
        out.update(self.info)
        return out
