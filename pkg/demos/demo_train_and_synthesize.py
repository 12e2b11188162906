"""End-to-end miniature: build a synthetic corpus where every character is
a fixed tone, train a small spectrogram predictor for a few hundred steps,
then synthesize a training sentence through an untrained (identity) vocoder.

This is a scaled-down rehearsal of the real pipeline - the same recipes,
checkpoints, and synthesis code paths run on studio data. Expect a couple
of minutes on CPU; the output will sound like overlapping tones, which is
exactly what this corpus teaches.

Run with:  python3 demos/demo_train_and_synthesize.py
"""

import tempfile
from pathlib import Path

import numpy as np
import torch

from comix.audiofe import AudioClip, save_wav
from comix.config import config_from_dict
from comix.corpus import CorpusManifest, UtteranceRecord, save_manifest, split
from comix.recipes import RecipeSpec, run_recipe
from comix.synth import save_vocoder_checkpoint, synthesize
from comix.vocoder import Waveglow

CHARS = "कखगघचछजझटडतदनपबमयरलवसह"
HOPS_PER_CHAR = 6

cfg = config_from_dict({
    "audio": {"sample_rate": 8000, "fmax": 3800},
    "encoder": {"embed_dim": 64, "conv_filters": 64, "bilstm_units_total": 64},
    "decoder": {"lstm_units": 128, "prenet_units": [32, 32],
                "postnet_filters": 32, "attn_dim": 64,
                "location_filters": 16, "location_kernel": 15},
    "waveglow": {"n_flows": 2, "group_size": 4, "wn_layers": 2, "wn_channels": 16},
    "train": {"batch_frames": 1200, "eval_every": 100, "checkpoint_every": 100000},
})


def tone_for(text):
    """Deterministic audio: one short tone per character."""
    segs = []
    for ch in text:
        f = 200.0 + 150.0 * (ord(ch) % 23)
        t = np.arange(HOPS_PER_CHAR * cfg.audio.hop_length) / cfg.audio.sample_rate
        segs.append(0.5 * np.sin(2 * np.pi * f * t) * np.hanning(t.size))
    return np.concatenate(segs).astype(np.float32)


rng = np.random.default_rng(0)
work = Path(tempfile.mkdtemp(prefix="comix_demo_"))
wav_dir = work / "wavs"
wav_dir.mkdir()
records, texts = [], []
for i in range(50):
    text = "".join(rng.choice(list(CHARS), size=int(rng.integers(4, 9))))
    audio = tone_for(text)
    save_wav(AudioClip(audio, cfg.audio.sample_rate), wav_dir / f"u{i:03d}.wav")
    records.append(UtteranceRecord(
        id=f"u{i:03d}", audio_path=str(wav_dir / f"u{i:03d}.wav"), text=text,
        source_lang="HI", speaker_id="toy", duration_s=audio.size / cfg.audio.sample_rate,
    ))
    texts.append(text)
manifest_path = work / "manifest.jsonl"
save_manifest(split(CorpusManifest(tuple(records), cfg.audio.sample_rate), 0.1, seed=7),
              manifest_path)
print(f"corpus: 50 synthetic utterances under {work}")

spec = RecipeSpec(name="demo", stage="MIX_PRETRAIN", manifest=str(manifest_path),
                  max_steps=1500, seed=3, lr=2e-3, out_dir=str(work / "run"))
print(f"training {spec.max_steps} steps ...")
report = run_recipe(spec, cfg)
print(f"loss {report.step_losses[0]:.1f} -> {report.step_losses[-1]:.2f} "
      f"in {report.wall_clock_s:.0f} s")

# An identity-initialized flow vocoder turns latent noise straight into
# audio; it has not been trained, so treat the WAV as a smoke test.
torch.manual_seed(0)
vocoder_path = work / "vocoder.ckpt"
save_vocoder_checkpoint(Waveglow(cfg.waveglow, cfg.audio), cfg, vocoder_path)

result = synthesize(texts[0], report.checkpoint_paths[-1], vocoder_path,
                    utterance_id="demo", out_dir=work / "out")
print(f"\nsynthesized {texts[0]!r}: {result.clip.duration_s:.2f} s, "
      f"truncated={result.truncated}")
print(f"diagnostics (wav, mel, attention plot) in {work / 'out'}")
