"""Check records, report bundles and their byte-stable serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

RELATIONS = ("abs", "le", "ge")
CSV_COLUMNS = ("name", "value", "reference", "tolerance", "relation", "pass", "provenance", "detail")

# Every convention choice that changes a reported number, surfaced in each bundle.
CONVENTIONS = {
    "orientation": "eps_{01..n} = +sqrt|det g| in the coordinate order of the chart",
    "curvature_index_order": "R^a_{bcd} with the two-form pair last",
    "p_gamma_reading": "bare p in the electric Weyl field read as p_gamma",
    "wave_map_coefficient": "target h = 4 dgamma^2 + exp(-4 gamma) domega^2, mismatch reported as E - T/2",
    "conformal_gauge_constant": "conformal Hamiltonian reported both with and without the -2 mu_h constant",
    "wave_operator_sign": "box = d_t^2 - laplacian",
}


@dataclass(frozen=True)
class Check:
    """One named comparison.

    ``relation`` decides the verdict: ``abs`` passes when |value - reference| <= tolerance,
    ``le`` when value <= reference + tolerance and ``ge`` when value >= reference - tolerance.
    """

    name: str
    value: float | None
    reference: float | None
    tolerance: float
    provenance: str
    relation: str = "abs"
    detail: str = ""

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"check {self.name!r}: relation must be one of {RELATIONS}")
        if not self.tolerance >= 0:
            raise ValueError(f"check {self.name!r}: tolerance must be non-negative")

    @property
    def passed(self) -> bool:
        v, r = self.value, self.reference
        if v is None or not math.isfinite(v):
            return False
        r = 0.0 if r is None else r
        if self.relation == "abs":
            return abs(v - r) <= self.tolerance
        if self.relation == "le":
            return v <= r + self.tolerance
        return v >= r - self.tolerance

    def as_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Check":
        keys = ("name", "value", "reference", "tolerance", "provenance", "relation", "detail")
        return cls(**{k: d[k] for k in keys if k in d})

    @classmethod
    def failed(cls, name: str, error: BaseException, provenance: str = "error") -> "Check":
        return cls(name, None, None, 0.0, provenance, "abs", f"{type(error).__name__}: {error}")


def versions() -> dict:
    import jax
    import numpy
    import scipy

    from . import __version__

    return {"kkcartan": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
            "jax": jax.__version__, "python": platform.python_version()}


@dataclass
class ReportBundle:
    checks: list[Check] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    result: dict | None = None

    @classmethod
    def new(cls, job: str, fixture: str | None = None, **extra) -> "ReportBundle":
        meta = {"job": job, "fixture": fixture, "conventions": dict(CONVENTIONS), "versions": versions()}
        meta.update(extra)
        return cls([], meta)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def extend(self, checks):
        self.checks.extend(checks)
        return self

    def as_dict(self) -> dict:
        out = {"checks": [c.as_dict() for c in self.checks], "metadata": self.metadata,
               "summary": {"total": len(self.checks), "failed": sum(not c.passed for c in self.checks),
                           "pass": self.passed}}
        if self.result is not None:
            out["result"] = self.result
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.checks:
            w.writerow([c.name, _fmt(c.value), _fmt(c.reference), _fmt(c.tolerance), c.relation,
                        "true" if c.passed else "false", c.provenance, c.detail])
        return buf.getvalue()

    @classmethod
    def from_json(cls, text: str) -> "ReportBundle":
        d = json.loads(text)
        return cls([Check.from_dict(c) for c in d.get("checks", [])], d.get("metadata", {}), d.get("result"))

    def emit(self, fmt: str = "json", path: str | Path | None = None) -> str:
        if fmt not in ("json", "csv"):
            raise ValueError(f"format: expected json or csv, got {fmt!r}")
        text = self.to_json() if fmt == "json" else self.to_csv()
        if path is not None:
            Path(path).write_text(text)
        return text

    def __eq__(self, other):
        return isinstance(other, ReportBundle) and self.as_dict() == other.as_dict()


def _fmt(v) -> str:
    # repr round-trips floats exactly, so identical runs give identical bytes
    return "" if v is None else repr(float(v))
