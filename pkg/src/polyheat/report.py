"""Uniform result record for every quantitative check.

A BoundReport says what was tested, against which threshold, how close the
worst sample came, and carries enough provenance (inputs, seeds, grid and
schedule parameters) that the run can be reproduced bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List

__all__ = ["BoundReport"]


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):  # numpy scalar
        return _jsonable(x.item())
    return x


@dataclass
class BoundReport:
    """Outcome of one verification check.

    ``worst_margin`` is oriented so that smaller is better and the check
    passes iff ``worst_margin <= threshold``; the meaning of the margin
    (a ratio excess, a fit residual, ...) is stated in ``statement``.
    """

    name: str
    statement: str
    passed: bool
    worst_margin: float
    threshold: float
    constants: Dict[str, float] = field(default_factory=dict)
    samples: Dict[str, Any] = field(default_factory=dict)
    provenance: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "statement": self.statement,
            "passed": bool(self.passed),
            "worst_margin": float(self.worst_margin),
            "threshold": float(self.threshold),
            "constants": _jsonable(self.constants),
            "samples": _jsonable(self.samples),
            "provenance": _jsonable(self.provenance),
            "notes": list(self.notes),
        }

    def summary_line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag:4s} {self.name}: worst margin {self.worst_margin:.4g} "
                f"vs threshold {self.threshold:.4g}")
