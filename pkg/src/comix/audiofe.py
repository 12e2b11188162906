"""Audio I/O and the mel front end.

The mel extractor is the shared contract between the spectrogram model
(training targets) and the vocoder (conditioning): 50 ms frames, 12 ms
hop, 80 mel channels, natural-log compression with a clamp floor. Frames
are centered (reflect padding), so T = 1 + floor(n_samples / hop).
"""

from __future__ import annotations

import math
import struct
import wave
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .config import AudioConfig


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray  # float32 in [-1, 1], mono
    sample_rate_hz: int

    def __post_init__(self):
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise AudioError("clip must be a non-empty 1-d array")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class MelSpectrogram:
    frames: np.ndarray  # [T, n_mels] float32, log-compressed
    audio: AudioConfig

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def load_wav(path: str | Path, target_rate: int | None = None) -> AudioClip:
    """Load a PCM WAV as mono float32 in [-1, 1], resampling if asked."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as e:
        raise AudioError(f"{path}: not a readable PCM WAV ({e})") from e
    if sampwidth == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    elif sampwidth == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float32) / 2147483648.0
    else:
        raise AudioError(f"{path}: unsupported bit depth {8 * sampwidth}")
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    if target_rate is not None and rate != target_rate:
        frac = Fraction(target_rate, rate)
        data = resample_poly(data, frac.numerator, frac.denominator).astype(np.float32)
        data = np.clip(data, -1.0, 1.0)
        rate = target_rate
    return AudioClip(samples=data.astype(np.float32), sample_rate_hz=rate)


def save_wav(clip: AudioClip, path: str | Path) -> None:
    """Write PCM 16-bit mono."""
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate_hz)
        wf.writeframes(pcm.tobytes())


def trim_silence(clip: AudioClip, threshold_dbfs: float = -40.0) -> AudioClip:
    """Drop leading/trailing samples below an absolute dBFS threshold."""
    thresh = 10.0 ** (threshold_dbfs / 20.0)
    above = np.flatnonzero(np.abs(clip.samples) > thresh)
    if above.size == 0:
        return clip
    return AudioClip(clip.samples[above[0]:above[-1] + 1], clip.sample_rate_hz)


# ---------------------------------------------------------------------------
# Mel filter bank (Slaney scale and normalization)

def _hz_to_mel(f):
    f = np.asanyarray(f, dtype=np.float64)
    mel = f / (200.0 / 3.0)
    log_region = f >= 1000.0
    mel = np.where(log_region, 15.0 + np.log(np.maximum(f, 1e-9) / 1000.0) / (np.log(6.4) / 27.0), mel)
    return mel


def _mel_to_hz(m):
    m = np.asanyarray(m, dtype=np.float64)
    f = m * (200.0 / 3.0)
    log_region = m >= 15.0
    f = np.where(log_region, 1000.0 * np.exp((m - 15.0) * (np.log(6.4) / 27.0)), f)
    return f


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int, fmin: float, fmax: float) -> np.ndarray:
    """Triangular mel filters [n_mels, n_fft//2 + 1], area-normalized."""
    fft_freqs = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    mel_pts = np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2)
    hz_pts = _mel_to_hz(mel_pts)
    fb = np.zeros((n_mels, fft_freqs.size))
    for i in range(n_mels):
        lo, center, hi = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        rise = (fft_freqs - lo) / max(center - lo, 1e-12)
        fall = (hi - fft_freqs) / max(hi - center, 1e-12)
        fb[i] = np.maximum(0.0, np.minimum(rise, fall))
        fb[i] *= 2.0 / (hi - lo)
    return fb


def mel_spectrogram(clip: AudioClip, audio_cfg: AudioConfig | None = None) -> MelSpectrogram:
    """Log-mel features: centered magnitude STFT, mel projection, ln with floor."""
    cfg = audio_cfg or AudioConfig()
    if clip.sample_rate_hz != cfg.sample_rate:
        raise AudioError(
            f"clip rate {clip.sample_rate_hz} != configured {cfg.sample_rate}; resample first"
        )
    win = cfg.win_length
    hop = cfg.hop_length
    if clip.samples.size < hop:
        raise AudioError("too short: clip is shorter than one hop")
    x = clip.samples.astype(np.float64)
    pad = win // 2
    x = np.pad(x, pad, mode="reflect")
    n_frames = 1 + (clip.samples.size // hop)
    window = np.hanning(win)
    frames = np.stack([x[i * hop:i * hop + win] * window for i in range(n_frames)])
    spec = np.abs(np.fft.rfft(frames, n=win, axis=1))
    fb = mel_filterbank(cfg.n_mels, win, cfg.sample_rate, cfg.fmin, cfg.fmax)
    mel = spec @ fb.T
    logmel = np.log(np.maximum(mel, cfg.eps))
    return MelSpectrogram(frames=logmel.astype(np.float32), audio=cfg)


def expected_frame_count(n_samples: int, cfg: AudioConfig) -> int:
    return 1 + n_samples // cfg.hop_length


# ---------------------------------------------------------------------------
# Feature cache: 8-byte shape header (two little-endian uint32) + float32
# row-major payload.

def save_matrix(matrix: np.ndarray, path: str | Path) -> None:
    m = np.ascontiguousarray(matrix, dtype="<f4")
    if m.ndim != 2:
        raise AudioError("feature cache holds 2-d matrices only")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", m.shape[0], m.shape[1]))
        fh.write(m.tobytes())


def load_matrix(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    rows, cols = struct.unpack("<II", raw[:8])
    data = np.frombuffer(raw[8:], dtype="<f4")
    if data.size != rows * cols:
        raise AudioError(f"{path}: payload size does not match header shape")
    return data.reshape(rows, cols).copy()
