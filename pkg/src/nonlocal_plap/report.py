"""Audit reports: per-point records, tolerances, pass flag, serialization."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

TOOL_VERSION = "0.1.0"


def fmt_float(x: Any) -> str:
    """Shortest round-trip text for floats; stable across runs."""
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, (int,)):
        return str(x)
    try:
        xf = float(x)
    except (TypeError, ValueError):
        return str(x)
    if math.isnan(xf):
        return "nan"
    if math.isinf(xf):
        return "inf" if xf > 0 else "-inf"
    return repr(xf)


def stable_hash(obj: Any) -> str:
    """Short SHA-256 of a canonical JSON encoding."""
    text = json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return fmt_float(obj) if not math.isfinite(obj) else obj
    if hasattr(obj, "item") and callable(obj.item):
        try:
            return _jsonable(obj.item())
        except (ValueError, TypeError):
            pass
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return repr(obj)


@dataclass
class AuditReport:
    """Structured outcome of one verification run.

    ``records`` is a list of flat dicts sharing the same keys. ``passed``
    is decided by the audit that builds the report; ``violations`` lists
    the indices of records that failed their individual check.
    """

    name: str
    params: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    passed: bool = True
    runtime: float = 0.0
    violations: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    input_hash: str = ""
    config_hash: str = ""
    tool_version: str = TOOL_VERSION

    def __post_init__(self):
        if not self.input_hash:
            self.input_hash = stable_hash({"name": self.name, "params": self.params})

    def add(self, ok: bool = True, **rec) -> None:
        """Append a record; mark it violating when ``ok`` is false."""
        if not ok:
            self.violations.append(len(self.records))
        rec.setdefault("ok", bool(ok))
        self.records.append(rec)

    def finalize(self, passed: bool | None = None) -> "AuditReport":
        if passed is None:
            passed = not self.violations
        self.passed = bool(passed)
        return self

    def columns(self) -> list[str]:
        cols: list[str] = []
        for rec in self.records:
            for k in rec:
                if k not in cols:
                    cols.append(k)
        return cols

    def to_csv(self) -> str:
        """Per-point records as CSV text (header row, LF line endings)."""
        buf = io.StringIO()
        cols = self.columns() or ["ok"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for rec in self.records:
            w.writerow([fmt_float(rec.get(c, "")) if rec.get(c, "") != "" else "" for c in cols])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "name": self.name,
                "params": self.params,
                "tolerances": self.tolerances,
                "passed": self.passed,
                "runtime": self.runtime,
                "violations": self.violations,
                "summary": self.summary,
                "input_hash": self.input_hash,
                "config_hash": self.config_hash,
                "tool_version": self.tool_version,
                "records": self.records,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = " ".join(f"{k}={fmt_float(v)}" for k, v in self.summary.items())
        return f"[{status}] {self.name}: {len(self.records)} records, {len(self.violations)} violations ({self.runtime:.2f}s) {extra}".rstrip()

    def write(self, out_dir: str | Path, stem: str | None = None) -> tuple[Path, Path]:
        """Write ``<stem>.json`` and ``<stem>.csv`` into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.name
        jp = out / f"{stem}.json"
        cp = out / f"{stem}.csv"
        jp.write_text(self.to_json() + "\n", encoding="utf-8")
        with open(cp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())
        return jp, cp
