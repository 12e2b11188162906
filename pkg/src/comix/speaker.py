"""Speaker embeddings: extractor adapters, per-speaker averages, lookup policies.

The real extractor is an external pre-trained speaker-verification model
consumed through an adapter (line-protocol subprocess). A deterministic
seeded stub ships so the full pipeline and test suite run without it.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .audiofe import AudioClip
from .corpus import CorpusManifest

EMBED_DIM = 512


class SpeakerError(ValueError):
    pass


class EmbeddingSource(Enum):
    AUDIO = "audio"
    AVERAGE = "average"
    STUB = "stub"


class SpeakerPolicy(Enum):
    AUDIO_EMBED = "audio_embed"
    AVG_EMBED = "avg_embed"


@dataclass(frozen=True)
class SpeakerEmbedding:
    vector: np.ndarray  # float32[512]
    source: EmbeddingSource
    speaker_id: str | None = None

    def __post_init__(self):
        if self.vector.shape != (EMBED_DIM,):
            raise SpeakerError(f"embedding must be {EMBED_DIM}-d, got {self.vector.shape}")
        if not np.all(np.isfinite(self.vector)):
            raise SpeakerError("embedding contains non-finite values")


class StubExtractor:
    """Deterministic test extractor: seeded hash of the utterance id.

    Produces a unit vector; reproducible across runs and processes.
    """

    version = "stub-1"
    source = EmbeddingSource.STUB

    def __init__(self, seed: int = 0):
        self.seed = seed

    def embed(self, clip: AudioClip | None = None, utterance_id: str = "") -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:{utterance_id}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        v = rng.standard_normal(EMBED_DIM)
        return (v / np.linalg.norm(v)).astype(np.float32)


class ExternalExtractor:
    """Adapter over a subprocess: one audio path in, 512 floats out per line."""

    source = EmbeddingSource.AUDIO

    def __init__(self, command: str, version: str = "external", timeout_s: float = 30.0):
        self.command = command
        self.version = version
        self.timeout_s = timeout_s

    def embed_path(self, audio_path: str) -> np.ndarray:
        proc = subprocess.run(
            shlex.split(self.command),
            input=audio_path + "\n",
            capture_output=True,
            text=True,
            timeout=self.timeout_s,
        )
        if proc.returncode != 0:
            raise SpeakerError(f"extractor failed on {audio_path}: {proc.stderr.strip()}")
        values = proc.stdout.split()
        if len(values) != EMBED_DIM:
            raise SpeakerError(f"extractor returned {len(values)} values, expected {EMBED_DIM}")
        return np.array([float(v) for v in values], dtype=np.float32)


def extract(clip: AudioClip | None, extractor, utterance_id: str = "",
            audio_path: str | None = None) -> SpeakerEmbedding:
    """Run the extractor on one utterance; records the extractor identity."""
    if isinstance(extractor, StubExtractor):
        vec = extractor.embed(clip, utterance_id)
        return SpeakerEmbedding(vec, EmbeddingSource.STUB)
    if audio_path is None:
        raise SpeakerError("external extractor needs an audio path")
    if clip is not None and clip.duration_s < 1.0:
        raise SpeakerError("clip shorter than 1 s; too little signal for embedding")
    return SpeakerEmbedding(extractor.embed_path(audio_path), EmbeddingSource.AUDIO)


@dataclass(frozen=True)
class EmbeddingTable:
    entries: dict[str, SpeakerEmbedding]  # speaker_id -> AVERAGE embedding
    counts: dict[str, int]
    extractor_version: str

    def lookup(self, speaker_id: str) -> SpeakerEmbedding:
        if speaker_id not in self.entries:
            raise SpeakerError(
                f"unseen speaker {speaker_id!r} not supported in avg-embed; "
                f"known: {sorted(self.entries)}"
            )
        return self.entries[speaker_id]


def build_table(manifest: CorpusManifest, extractor) -> EmbeddingTable:
    """Average each speaker's per-utterance embeddings."""
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for rec in manifest.records:
        emb = extract(None, extractor, utterance_id=rec.id, audio_path=rec.audio_path)
        sums[rec.speaker_id] = sums.get(rec.speaker_id, 0.0) + emb.vector.astype(np.float64)
        counts[rec.speaker_id] = counts.get(rec.speaker_id, 0) + 1
    if not counts:
        raise SpeakerError("manifest has no records")
    entries = {
        spk: SpeakerEmbedding((sums[spk] / counts[spk]).astype(np.float32),
                              EmbeddingSource.AVERAGE, speaker_id=spk)
        for spk in sums
    }
    return EmbeddingTable(entries, counts, getattr(extractor, "version", "unknown"))


def lookup(policy: SpeakerPolicy, *, speaker_id: str | None = None,
           record=None, table: EmbeddingTable | None = None,
           extractor=None) -> SpeakerEmbedding:
    """Resolve the embedding per the training-time policy."""
    if policy is SpeakerPolicy.AVG_EMBED:
        if table is None:
            raise SpeakerError("avg-embed lookup needs an embedding table")
        return table.lookup(speaker_id if speaker_id is not None else record.speaker_id)
    if record is None:
        raise SpeakerError("audio-embed lookup needs an utterance record")
    return extract(None, extractor, utterance_id=record.id, audio_path=record.audio_path)


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    data = {
        "extractor_version": table.extractor_version,
        "speakers": {
            spk: {"vector": emb.vector.tolist(), "count": table.counts[spk]}
            for spk, emb in table.entries.items()
        },
    }
    Path(path).write_text(json.dumps(data), encoding="utf-8")


def load_table(path: str | Path) -> EmbeddingTable:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = {}
    counts = {}
    for spk, row in data["speakers"].items():
        entries[spk] = SpeakerEmbedding(
            np.array(row["vector"], dtype=np.float32), EmbeddingSource.AVERAGE, speaker_id=spk
        )
        counts[spk] = int(row["count"])
    return EmbeddingTable(entries, counts, data.get("extractor_version", "unknown"))
