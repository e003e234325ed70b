"""Verification records and their JSON/CSV serialization."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__

SCHEMA_REPORT = "hermgeom.report/1"
SCHEMA_VERIFY = "hermgeom.verify/1"
SCHEMA_SOLVE = "hermgeom.solve/1"

CSV_FIELDS = ("suite", "name", "lhs", "rhs", "residual", "tolerance", "pass")


@dataclass
class CheckRecord:
    """One verified relation: ``pass`` holds iff ``residual <= tolerance``."""

    name: str
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    note: str = ""

    def __post_init__(self):
        self.lhs = _num(self.lhs)
        self.rhs = _num(self.rhs)
        self.residual = float(self.residual)
        self.tolerance = float(self.tolerance)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance)

    def as_dict(self) -> dict:
        out = {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "residual": self.residual,
               "tolerance": self.tolerance, "pass": self.passed}
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class VerificationReport:
    suite: str
    checks: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def add(self, *records: CheckRecord) -> "VerificationReport":
        self.checks.extend(records)
        return self

    def extend(self, other: "VerificationReport") -> "VerificationReport":
        self.checks.extend(other.checks)
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> CheckRecord:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        env = {"version": __version__}
        env.update(self.environment)
        return {"schema": SCHEMA_VERIFY, "suite": self.suite, "pass": self.passed,
                "checks": [c.as_dict() for c in self.checks], "environment": env}

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            lines.append(f"{flag} {c.name}: residual={c.residual:.3e} tol={c.tolerance:.1e}")
        return "\n".join(lines)


def _num(x):
    """JSON-friendly scalar: complex values keep their imaginary part as a pair."""
    if x is None:
        return None
    x = complex(x) if np.iscomplexobj(x) else float(x)
    if isinstance(x, complex):
        return float(x.real) if x.imag == 0 else [float(x.real), float(x.imag)]
    return x


def to_jsonable(obj):
    """Recursively convert numpy objects (complex arrays become [re, im] pairs)."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return to_jsonable(np.stack([obj.real, obj.imag], axis=-1))
        return obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def dumps(body: dict, timestamp: Optional[str] = None) -> str:
    """Deterministic JSON; the optional timestamp sits outside the body."""
    doc = {"body": to_jsonable(body)}
    doc["schema"] = body.get("schema")
    if timestamp is not None:
        doc["timestamp"] = timestamp
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def checks_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for rep in reports:
        for c in rep.checks:
            d = c.as_dict()
            w.writerow([rep.suite, d["name"], _csv(d["lhs"]), _csv(d["rhs"]),
                        repr(d["residual"]), repr(d["tolerance"]), int(d["pass"])])
    return buf.getvalue()


def _csv(x):
    if isinstance(x, list):
        return f"{x[0]!r}{x[1]:+.17g}j"
    return repr(x)
