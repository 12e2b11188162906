"""Shared test utilities: toy configs and a synthetic overfit corpus.

The synthetic corpus maps each Devanagari character to a fixed short
tone, so audio is a deterministic function of text and a small model can
learn the alignment quickly on CPU.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from comix.audiofe import AudioClip, save_wav
from comix.config import ToolkitConfig, config_from_dict
from comix.corpus import CorpusManifest, UtteranceRecord, save_manifest, split

TOY_CHARS = "कखगघचछजझटडतदनपबमयरलवसह"
FRAMES_PER_CHAR = 6


def toy_config(**overrides) -> ToolkitConfig:
    base = {
        "audio": {"sample_rate": 8000, "fmax": 3800},
        "encoder": {"embed_dim": 64, "conv_filters": 64, "bilstm_units_total": 64},
        "decoder": {
            "lstm_units": 128, "prenet_units": [32, 32], "prenet_dropout": 0.3,
            "postnet_filters": 32, "attn_dim": 64, "location_filters": 16,
            "location_kernel": 15,
        },
        "waveglow": {"n_flows": 2, "group_size": 4, "wn_layers": 2, "wn_channels": 16},
        "train": {"batch_frames": 1200, "eval_every": 100, "checkpoint_every": 100000},
    }
    for section, values in overrides.items():
        base.setdefault(section, {}).update(values)
    return config_from_dict(base)


def tiny_config(**overrides) -> ToolkitConfig:
    """Even smaller dims for shape/property tests that never train."""
    cfg = {
        "encoder": {"embed_dim": 16, "conv_filters": 16, "bilstm_units_total": 16},
        "decoder": {
            "lstm_units": 32, "prenet_units": [8, 8], "postnet_filters": 8,
            "attn_dim": 16, "location_filters": 4, "location_kernel": 7,
        },
    }
    for section, values in overrides.items():
        cfg.setdefault(section, {}).update(values)
    return toy_config(**cfg)


def char_tone_audio(text: str, cfg: ToolkitConfig) -> np.ndarray:
    """One fixed tone per character, FRAMES_PER_CHAR hops long each."""
    hop = cfg.audio.hop_length
    sr = cfg.audio.sample_rate
    segs = []
    for ch in text:
        freq = 200.0 + 150.0 * (ord(ch) % 23)
        t = np.arange(FRAMES_PER_CHAR * hop) / sr
        segs.append(0.5 * np.sin(2 * np.pi * freq * t) * np.hanning(t.size))
    return np.concatenate(segs).astype(np.float32)


def build_toy_corpus(root: Path, cfg: ToolkitConfig, n_utterances: int = 50,
                     seed: int = 0, speakers: tuple[str, ...] = ("spk",),
                     val_fraction: float = 0.1) -> tuple[str, list[str]]:
    """Write wavs + a split manifest; returns (manifest path, texts)."""
    rng = np.random.default_rng(seed)
    wav_dir = root / "wavs"
    wav_dir.mkdir(parents=True, exist_ok=True)
    records = []
    texts = []
    sr = cfg.audio.sample_rate
    for i in range(n_utterances):
        n_chars = int(rng.integers(4, 9))
        text = "".join(rng.choice(list(TOY_CHARS), size=n_chars))
        texts.append(text)
        audio = char_tone_audio(text, cfg)
        path = wav_dir / f"u{i:03d}.wav"
        save_wav(AudioClip(audio, sr), path)
        records.append(UtteranceRecord(
            id=f"u{i:03d}", audio_path=str(path), text=text, source_lang="HI",
            speaker_id=speakers[i % len(speakers)], duration_s=audio.size / sr,
        ))
    manifest = split(CorpusManifest(tuple(records), sr), val_fraction, seed=7)
    path = root / "manifest.jsonl"
    save_manifest(manifest, path)
    return str(path), texts
