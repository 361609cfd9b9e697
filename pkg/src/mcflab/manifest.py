"""Run records: checks, CSV outputs, the manifest and its verification.

Every check carries the measured value, a comparator and a threshold, so
its verdict can be recomputed from ``checks.csv`` alone.  Checks with a
``source`` of the form ``file:column:reducer`` are also re-measured from
the named CSV.  Reducers are ``max``, ``min``, ``sum``, ``first``,
``last``, ``maxabs``, ``count_true``, ``count_false``, ``count_nonneg`` and
``row<k>``; blank cells are skipped.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import operator
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

MANIFEST_NAME = "manifest.json"
CHECKS_NAME = "checks.csv"
CHECK_FIELDS = ("name", "measured", "comparator", "threshold", "passed", "source")

COMPARATORS = {
    "<=": operator.le, "<": operator.lt, ">=": operator.ge, ">": operator.gt, "==": operator.eq,
}


def compare(measured: float, comparator: str, threshold: float) -> bool:
    if comparator not in COMPARATORS:
        raise ValueError(f"unknown comparator {comparator!r}")
    if math.isnan(measured):
        return False
    return bool(COMPARATORS[comparator](measured, threshold))


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    comparator: str
    threshold: float
    source: str = ""

    @property
    def passed(self) -> bool:
        return compare(self.measured, self.comparator, self.threshold)

    def to_dict(self) -> dict:
        return {"name": self.name, "measured": self.measured, "comparator": self.comparator,
                "threshold": self.threshold, "passed": self.passed, "source": self.source}


def format_cell(v) -> str:
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, float):
        return repr(float(v))
    if v is None:
        return ""
    if hasattr(v, "item"):
        return format_cell(v.item())
    return str(v)


def write_csv(path, fields: Sequence[str], rows: Iterable[dict]) -> Path:
    """Write rows with ``repr`` floats so values round-trip bit for bit."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([format_cell(r.get(k)) for k in fields])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _as_float(cell: str) -> float:
    if cell in ("True", "False"):
        return 1.0 if cell == "True" else 0.0
    return float(cell)


def reduce_column(rows: list[dict], column: str, reducer: str) -> float:
    if rows and column not in rows[0]:
        raise KeyError(f"no column {column!r}")
    cells = [r[column] for r in rows]
    if reducer.startswith("row"):
        return _as_float(cells[int(reducer[3:])])
    vals = [_as_float(c) for c in cells if c != ""]
    if reducer == "count_true":
        return float(sum(v != 0 for v in vals))
    if reducer == "count_false":
        return float(sum(v == 0 for v in vals))
    if reducer == "count_nonneg":
        return float(sum(v >= 0 for v in vals))
    if not vals:
        return math.nan
    if reducer == "max":
        return max(vals)
    if reducer == "min":
        return min(vals)
    if reducer == "maxabs":
        return max(abs(v) for v in vals)
    if reducer == "sum":
        return math.fsum(vals)
    if reducer == "first":
        return vals[0]
    if reducer == "last":
        return vals[-1]
    raise ValueError(f"unknown reducer {reducer!r}")


def measure(run_dir, source: str) -> float:
    """Evaluate a ``file:column:reducer`` source against the CSVs in ``run_dir``."""
    fname, column, reducer = source.split(":", 2)
    return reduce_column(read_csv(Path(run_dir) / fname), column, reducer)


def sourced(run_dir, name: str, source: str, comparator: str, threshold: float) -> Check:
    """A check whose measured value is read back from a CSV already written."""
    return Check(name, measure(run_dir, source), comparator, float(threshold), source)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    version: str
    started: str
    finished: str
    checks: list[dict]
    files: dict[str, str]
    plots: list[str] = field(default_factory=list)
    run_dir: str = ""

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("run_dir")
        d["passed"] = self.passed
        return d

    def write(self, run_dir) -> Path:
        path = Path(run_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        d = json.loads(path.read_text())
        d.pop("passed", None)
        return cls(**d, run_dir=str(path.parent))


@dataclass(frozen=True)
class VerifyResult:
    """``intact`` covers hashes and recomputation; ``failed_checks`` are honest failures."""

    intact: bool
    problems: tuple[str, ...]
    failed_checks: tuple[str, ...]
    checked_files: int
    checked_checks: int

    @property
    def passed(self) -> bool:
        return self.intact and not self.failed_checks


def _close(a: float, b: float) -> bool:
    return a == b or (math.isnan(a) and math.isnan(b))


def verify(path) -> VerifyResult:
    """Re-hash inventoried files and recompute every verdict.

    Raises ``OSError`` or ``ValueError`` when the manifest itself cannot be
    read; all other defects are reported as problems.
    """
    man = RunManifest.load(path)
    run_dir = Path(man.run_dir)
    problems: list[str] = []
    for name, digest in sorted(man.files.items()):
        f = run_dir / name
        if not f.is_file():
            problems.append(f"missing file: {name}")
        elif sha256_file(f) != digest:
            problems.append(f"hash mismatch: {name}")
    for name in man.plots:
        if not (run_dir / name).is_file():
            problems.append(f"missing plot: {name}")
    recorded = {c["name"]: c for c in man.checks}
    checks_path = run_dir / CHECKS_NAME
    rows = read_csv(checks_path) if checks_path.is_file() else []
    if not checks_path.is_file():
        problems.append(f"missing file: {CHECKS_NAME}")
    seen = set()
    for r in rows:
        name = r["name"]
        seen.add(name)
        try:
            measured, threshold = float(r["measured"]), float(r["threshold"])
            verdict = compare(measured, r["comparator"], threshold)
        except ValueError as exc:
            problems.append(f"check {name!r}: unreadable row ({exc})")
            continue
        if r["source"]:
            try:
                again = measure(run_dir, r["source"])
            except (OSError, KeyError, ValueError, IndexError) as exc:
                problems.append(f"check {name!r}: cannot re-measure from {r['source']} ({exc})")
            else:
                if not _close(again, measured):
                    problems.append(f"check {name!r}: measured {measured!r} but {r['source']} gives {again!r}")
                    verdict = compare(again, r["comparator"], threshold)
        if r["passed"] != format_cell(verdict):
            problems.append(f"check {name!r}: recorded passed={r['passed']} but recomputed {verdict}")
        m = recorded.get(name)
        if m is None:
            problems.append(f"check {name!r}: absent from manifest")
        elif bool(m["passed"]) != verdict:
            problems.append(f"check {name!r}: manifest says passed={m['passed']} but recomputed {verdict}")
    for name in recorded:
        if name not in seen and rows:
            problems.append(f"check {name!r}: absent from {CHECKS_NAME}")
    failed = tuple(r["name"] for r in rows if r["passed"] != "True")
    return VerifyResult(intact=not problems, problems=tuple(problems), failed_checks=failed,
                        checked_files=len(man.files), checked_checks=len(rows))


def write_checks(run_dir, checks: Sequence[Check]) -> Path:
    return write_csv(Path(run_dir) / CHECKS_NAME, CHECK_FIELDS, (c.to_dict() for c in checks))
