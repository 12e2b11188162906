"""Utterance manifest management.

Manifests are JSON-lines files (one utterance per line) with a sidecar
summary JSON carrying totals and per-language duration fractions. All
set operations (pooling, duration-targeted subsets, train/val splits,
per-speaker views) are pure and seed-deterministic.
"""

from __future__ import annotations

import json
import random
import wave
from dataclasses import dataclass, replace
from pathlib import Path

from .textnorm import LATIN_RE

PRNG_NAME = "python-random-mersenne-twister"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    audio_path: str
    text: str
    source_lang: str  # "HI" | "EN"
    speaker_id: str
    duration_s: float
    split: str = "TRAIN"  # "TRAIN" | "VAL"

    def validate(self, allow_latin: bool = False) -> None:
        if self.duration_s <= 0:
            raise CorpusError(f"record {self.id}: duration must be positive")
        if self.source_lang not in ("HI", "EN"):
            raise CorpusError(f"record {self.id}: bad source_lang {self.source_lang!r}")
        if self.split not in ("TRAIN", "VAL"):
            raise CorpusError(f"record {self.id}: bad split {self.split!r}")
        if not allow_latin and LATIN_RE.search(self.text):
            raise CorpusError(f"record {self.id}: text contains Latin letters (not normalized)")


@dataclass(frozen=True)
class CorpusManifest:
    records: tuple[UtteranceRecord, ...]
    sample_rate_hz: int
    created_from: tuple[str, ...] = ()

    def validate(self, allow_latin: bool = False) -> None:
        seen: set[str] = set()
        for rec in self.records:
            rec.validate(allow_latin)
            if rec.id in seen:
                raise CorpusError(f"duplicate utterance id {rec.id!r}")
            seen.add(rec.id)

    @property
    def total_duration_s(self) -> float:
        return sum(r.duration_s for r in self.records)

    @property
    def speakers(self) -> list[str]:
        return sorted({r.speaker_id for r in self.records})

    def summary(self) -> dict:
        total = self.total_duration_s
        by_lang = {"HI": 0.0, "EN": 0.0}
        for r in self.records:
            by_lang[r.source_lang] += r.duration_s
        return {
            "n_records": len(self.records),
            "total_duration_s": total,
            "sample_rate_hz": self.sample_rate_hz,
            "speakers": self.speakers,
            "duration_by_lang_s": by_lang,
            "lang_fractions": {
                k: (v / total if total else 0.0) for k, v in by_lang.items()
            },
            "prng": PRNG_NAME,
            "created_from": list(self.created_from),
        }


def pool(manifests: list[CorpusManifest]) -> CorpusManifest:
    """Union of manifests; ids must be disjoint and sample rates equal."""
    if not manifests:
        raise CorpusError("pool requires at least one manifest")
    rates = {m.sample_rate_hz for m in manifests}
    if len(rates) > 1:
        raise CorpusError(f"sample-rate mismatch across manifests: {sorted(rates)}")
    seen: dict[str, int] = {}
    records: list[UtteranceRecord] = []
    for i, m in enumerate(manifests):
        for r in m.records:
            if r.id in seen:
                raise CorpusError(f"id collision across manifests: {r.id!r}")
            seen[r.id] = i
            records.append(r)
    created = tuple(src for m in manifests for src in (m.created_from or ("<anonymous>",)))
    out = CorpusManifest(tuple(records), manifests[0].sample_rate_hz, created)
    out.validate()
    return out


def subset_by_duration(manifest: CorpusManifest, target_s: float, seed: int) -> CorpusManifest:
    """Seeded-shuffle prefix whose cumulative duration first reaches target_s.

    Monotone in target_s for a fixed seed: a larger target yields a
    superset of records.
    """
    total = manifest.total_duration_s
    if target_s > total:
        raise CorpusError(f"target {target_s:.1f}s exceeds corpus total {total:.1f}s")
    order = list(manifest.records)
    random.Random(seed).shuffle(order)
    chosen: list[UtteranceRecord] = []
    acc = 0.0
    for rec in order:
        if acc >= target_s:
            break
        chosen.append(rec)
        acc += rec.duration_s
    return CorpusManifest(tuple(chosen), manifest.sample_rate_hz, manifest.created_from)


def split(manifest: CorpusManifest, val_fraction: float, seed: int) -> CorpusManifest:
    """Assign TRAIN/VAL per record, stratified by speaker.

    Every speaker with at least two records gets at least one VAL record.
    """
    if not 0 < val_fraction < 0.5:
        raise CorpusError("val_fraction must be in (0, 0.5)")
    by_speaker: dict[str, list[UtteranceRecord]] = {}
    for r in manifest.records:
        by_speaker.setdefault(r.speaker_id, []).append(r)
    assignment: dict[str, str] = {}
    for speaker in sorted(by_speaker):
        recs = sorted(by_speaker[speaker], key=lambda r: r.id)
        rng = random.Random(f"{seed}:{speaker}")
        rng.shuffle(recs)
        n_val = int(round(val_fraction * len(recs)))
        if len(recs) >= 2:
            n_val = max(1, n_val)
        for i, r in enumerate(recs):
            assignment[r.id] = "VAL" if i < n_val else "TRAIN"
    records = tuple(replace(r, split=assignment[r.id]) for r in manifest.records)
    return CorpusManifest(records, manifest.sample_rate_hz, manifest.created_from)


def speaker_view(manifest: CorpusManifest, speaker_id: str) -> CorpusManifest:
    recs = tuple(r for r in manifest.records if r.speaker_id == speaker_id)
    if not recs:
        raise CorpusError(
            f"unknown speaker {speaker_id!r}; known speakers: {manifest.speakers}"
        )
    return CorpusManifest(recs, manifest.sample_rate_hz, manifest.created_from)


def filter_lang(manifest: CorpusManifest, lang: str) -> CorpusManifest:
    recs = tuple(r for r in manifest.records if r.source_lang == lang)
    return CorpusManifest(recs, manifest.sample_rate_hz, manifest.created_from)


# ---------------------------------------------------------------------------
# I/O

_JSONL_KEYS = ("id", "audio", "text", "lang", "speaker", "duration_s", "split")


def save_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for r in manifest.records:
            fh.write(json.dumps({
                "id": r.id,
                "audio": r.audio_path,
                "text": r.text,
                "lang": r.source_lang,
                "speaker": r.speaker_id,
                "duration_s": r.duration_s,
                "split": r.split,
            }, ensure_ascii=False) + "\n")
    summary_path = path.with_suffix(path.suffix + ".summary.json")
    summary_path.write_text(
        json.dumps(manifest.summary(), indent=2, ensure_ascii=False), encoding="utf-8"
    )


def load_manifest(path: str | Path, sample_rate_hz: int | None = None,
                  allow_latin: bool = False) -> CorpusManifest:
    path = Path(path)
    records: list[UtteranceRecord] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        row = json.loads(line)
        missing = [k for k in _JSONL_KEYS if k not in row and k != "split"]
        if missing:
            raise CorpusError(f"{path}:{lineno}: missing keys {missing}")
        records.append(UtteranceRecord(
            id=row["id"],
            audio_path=row["audio"],
            text=row["text"],
            source_lang=row["lang"],
            speaker_id=row["speaker"],
            duration_s=float(row["duration_s"]),
            split=row.get("split", "TRAIN"),
        ))
    if sample_rate_hz is None:
        summary_path = path.with_suffix(path.suffix + ".summary.json")
        if summary_path.exists():
            sample_rate_hz = json.loads(summary_path.read_text())["sample_rate_hz"]
        else:
            sample_rate_hz = 22050
    manifest = CorpusManifest(tuple(records), sample_rate_hz, (str(path),))
    manifest.validate(allow_latin)
    return manifest


def wav_duration_s(path: str | Path) -> float:
    """Duration read from the WAV header, without decoding samples."""
    with wave.open(str(path), "rb") as wf:
        return wf.getnframes() / wf.getframerate()


def verify_durations(manifest: CorpusManifest, tolerance_s: float = 0.010) -> None:
    """Check manifest durations against audio headers (10 ms tolerance)."""
    bad = []
    for r in manifest.records:
        actual = wav_duration_s(r.audio_path)
        if abs(actual - r.duration_s) > tolerance_s:
            bad.append((r.id, r.duration_s, actual))
    if bad:
        lines = ", ".join(f"{i} (manifest {m:.3f}s, file {a:.3f}s)" for i, m, a in bad)
        raise CorpusError(f"duration mismatch > {tolerance_s*1000:.0f} ms: {lines}")
