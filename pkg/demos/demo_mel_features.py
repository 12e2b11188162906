"""Mel spectrogram front end on a synthetic chirp: framing arithmetic,
the log floor on silence, and the binary feature cache.

Run with:  python3 demos/demo_mel_features.py
"""

import tempfile
from pathlib import Path

import numpy as np

from comix.audiofe import (AudioClip, expected_frame_count, load_matrix,
                           mel_spectrogram, save_matrix, save_wav)
from comix.config import AudioConfig

cfg = AudioConfig()
print(f"sample rate {cfg.sample_rate} Hz, window {cfg.win_length} samples "
      f"({1000 * cfg.win_length / cfg.sample_rate:.0f} ms), "
      f"hop {cfg.hop_length} samples ({1000 * cfg.hop_length / cfg.sample_rate:.0f} ms), "
      f"{cfg.n_mels} mel channels")

# One second of a rising chirp, 100 Hz -> 4 kHz.
t = np.arange(cfg.sample_rate) / cfg.sample_rate
freq = 100.0 * (40.0 ** t)
chirp = (0.5 * np.sin(2 * np.pi * np.cumsum(freq) / cfg.sample_rate)).astype(np.float32)
clip = AudioClip(chirp, cfg.sample_rate)

mel = mel_spectrogram(clip, cfg)
print(f"\nchirp: {chirp.size} samples -> {mel.n_frames} frames "
      f"(formula predicts {expected_frame_count(chirp.size, cfg)})")

# The spectral peak should climb over time as the chirp rises.
peaks = mel.frames.argmax(axis=1)
print("peak mel channel, every 10th frame:", peaks[::10].tolist())
assert peaks[-1] > peaks[0]

# Silence maps to the log floor exactly: ln(eps) in every bin.
silence = AudioClip(np.zeros(cfg.sample_rate // 2, dtype=np.float32), cfg.sample_rate)
floor = mel_spectrogram(silence, cfg).frames
print(f"\nsilence -> constant {floor.min():.4f} (ln(eps) = {np.log(cfg.eps):.4f})")

# Features cache to a compact binary format for training.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "chirp.mel.bin"
    save_matrix(mel.frames, path)
    restored = load_matrix(path)
    assert np.array_equal(restored, mel.frames)
    print(f"\ncached {restored.shape} matrix in {path.stat().st_size} bytes "
          "(8-byte header + float32 rows), bit-exact round trip")

    save_wav(clip, Path(tmp) / "chirp.wav")
    print("wrote chirp.wav for listening")
