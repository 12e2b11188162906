"""Corpus manifest workflow: pool two monolingual corpora, carve a
fixed-duration subset, and produce a stratified train/validation split.

Everything runs on synthetic one-line manifests; no audio is needed until
duration verification time, so this demo fabricates durations directly.

Run with:  python3 demos/demo_corpus_tools.py
"""

import json
import random
import tempfile
from pathlib import Path

from comix.corpus import (CorpusManifest, UtteranceRecord, pool,
                          save_manifest, split, subset_by_duration)

SR = 22050
rng = random.Random(0)


def fake_corpus(prefix, lang, texts, speakers):
    records = []
    for i, text in enumerate(texts):
        records.append(UtteranceRecord(
            id=f"{prefix}_{i:03d}",
            audio_path=f"/data/{prefix}/{i:03d}.wav",
            text=text,
            source_lang=lang,
            speaker_id=rng.choice(speakers),
            duration_s=round(rng.uniform(2.0, 8.0), 2),
        ))
    return CorpusManifest(tuple(records), SR)


hindi = fake_corpus("hi", "HI", ["नमस्ते दुनिया"] * 40, ["hi_f1", "hi_m1"])
english = fake_corpus("en", "EN", ["हेलो वर्ल्ड"] * 25, ["en_f1"])

# Pooling is how the mixed-language training set is built: both corpora
# share one sample rate and get a language-balance summary.
mixed = pool([hindi, english])
print("pooled summary:")
print(json.dumps(mixed.summary(), indent=2, ensure_ascii=False))
print()

# A seeded subset selects roughly target_duration seconds of audio,
# deterministically, for low-resource experiments (e.g. "3 hours of data").
subset = subset_by_duration(mixed, target_s=120.0, seed=42)
print(f"subset: {len(subset.records)} records, {subset.total_duration_s:.1f} s")

# Splitting is stratified per speaker so every voice appears in VAL.
final = split(subset, val_fraction=0.1, seed=7)
n_val = sum(r.split == "VAL" for r in final.records)
print(f"split: {len(final.records) - n_val} TRAIN / {n_val} VAL")
for speaker in sorted({r.speaker_id for r in final.records}):
    marks = [r.split for r in final.records if r.speaker_id == speaker]
    print(f"  {speaker}: {marks.count('TRAIN')} train, {marks.count('VAL')} val")

# Manifests round-trip through JSON lines with a summary sidecar.
with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "mixed.jsonl"
    save_manifest(final, out)
    print()
    print("first manifest line:")
    print(out.read_text(encoding="utf-8").splitlines()[0])
