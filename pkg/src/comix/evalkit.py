"""Listening-test tooling: session construction and MOS/CMOS aggregation.

MOS ratings live on a 1-5 grid in 0.5 steps; CMOS ratings are -2..+2
judgments of the second audio, sign-adjusted so positive always means
our system beat the reference regardless of presentation order.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

OURS = "ours"


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class RatingRecord:
    listener_id: str
    utterance_id: str
    kind: str  # "MOS" | "CMOS"
    value: float
    first_system: str | None = None
    second_system: str | None = None


@dataclass
class EvalSummary:
    mean: float
    std: float  # sample (n-1); 0 with a flag when n == 1
    n: int
    kind: str
    per_system: dict = field(default_factory=dict)
    rejected: list = field(default_factory=list)
    n1_flag: bool = False

    def formatted(self) -> str:
        return f"{self.mean:.2f} +- {self.std:.2f}"


def _mean_std(values: list[float]) -> tuple[float, float, bool]:
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0, True
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var), False


def _on_mos_grid(value: float) -> bool:
    return 1.0 <= value <= 5.0 and abs(value * 2 - round(value * 2)) < 1e-9


def aggregate_mos(records: list[RatingRecord]) -> EvalSummary:
    """Mean and sample std over all valid MOS records; rejects are reported."""
    values = []
    rejected = []
    for r in records:
        if r.kind != "MOS":
            rejected.append((r, "not a MOS record"))
        elif not _on_mos_grid(r.value):
            rejected.append((r, f"off-grid value {r.value}"))
        else:
            values.append(r.value)
    if not values:
        raise EvalError("no valid MOS records")
    mean, std, n1 = _mean_std(values)
    return EvalSummary(mean=mean, std=std, n=len(values), kind="MOS",
                       rejected=rejected, n1_flag=n1)


def aggregate_cmos(records: list[RatingRecord], ours: str = OURS) -> EvalSummary:
    """Sign-adjusted CMOS: raw value if our system played second, else negated."""
    values = []
    rejected = []
    per_system: dict[str, list[float]] = {}
    for r in records:
        if r.kind != "CMOS":
            rejected.append((r, "not a CMOS record"))
            continue
        if not r.first_system or not r.second_system:
            rejected.append((r, "missing system identifiers"))
            continue
        if not -2.0 <= r.value <= 2.0:
            rejected.append((r, f"value {r.value} outside [-2, 2]"))
            continue
        adjusted = r.value if r.second_system == ours else -r.value
        values.append(adjusted)
        other = r.first_system if r.second_system == ours else r.second_system
        per_system.setdefault(other, []).append(adjusted)
    if not values:
        raise EvalError("no valid CMOS records")
    mean, std, n1 = _mean_std(values)
    breakdown = {
        sys: {"mean": _mean_std(vals)[0], "n": len(vals)}
        for sys, vals in per_system.items()
    }
    return EvalSummary(mean=mean, std=std, n=len(values), kind="CMOS",
                       per_system=breakdown, rejected=rejected, n1_flag=n1)


# ---------------------------------------------------------------------------
# Rating file I/O (CSV: listener,utterance,kind,value,first,second)

CSV_HEADER = ["listener", "utterance", "kind", "value", "first", "second"]


def load_ratings(path: str | Path) -> list[RatingRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_HEADER[:4] if c not in (reader.fieldnames or [])]
        if missing:
            raise EvalError(f"{path}: missing columns {missing}")
        for row in reader:
            records.append(RatingRecord(
                listener_id=row["listener"],
                utterance_id=row["utterance"],
                kind=row["kind"].upper(),
                value=float(row["value"]),
                first_system=row.get("first") or None,
                second_system=row.get("second") or None,
            ))
    return records


def save_ratings(records: list[RatingRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([r.listener_id, r.utterance_id, r.kind, r.value,
                             r.first_system or "", r.second_system or ""])


# ---------------------------------------------------------------------------
# Session construction

def make_session(utterance_ids: list[str], systems: list[str], seed: int,
                 kind: str = "CMOS") -> dict:
    """Seeded random presentation order; for CMOS, random first/second
    assignment per item. The session file records the ground-truth order
    that aggregation later needs for sign adjustment.
    """
    if kind == "CMOS" and len(systems) < 2:
        raise EvalError("CMOS sessions need at least 2 systems")
    rng = random.Random(seed)
    order = list(utterance_ids)
    rng.shuffle(order)
    entries = []
    for uid in order:
        if kind == "CMOS":
            pair = rng.sample(systems, 2)
            entries.append({"utterance": uid, "first": pair[0], "second": pair[1]})
        else:
            entries.append({"utterance": uid, "system": rng.choice(systems)})
    return {"kind": kind, "seed": seed, "systems": systems, "entries": entries}


def save_session(session: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(session, indent=2), encoding="utf-8")


def load_session(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
