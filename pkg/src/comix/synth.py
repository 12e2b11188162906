"""End-to-end synthesis: text -> Devanagari -> mel -> audio, with diagnostics.

Checkpoints carry their full config; the spectrogram model and vocoder
must agree on the audio section byte-for-byte or loading fails. Vocoder
noise is seeded per utterance id so batch runs are reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .audiofe import AudioClip, save_matrix, save_wav
from .checkpoints import check_audio_compat, load_checkpoint
from .config import config_from_dict
from .speaker import SpeakerEmbedding, SpeakerPolicy, StubExtractor, load_table
from .spectrogen import CharVocabulary, SpectrogenError, Tacotron2, arrays_to_state
from .textnorm import TransliterationProvider, normalize
from .vocoder import Waveglow


class SynthError(ValueError):
    pass


@dataclass
class SynthResult:
    clip: AudioClip
    mel: np.ndarray        # [T, n_mels]
    attention: np.ndarray  # [T, L]
    truncated: bool
    devanagari: str


def load_spectrogen_checkpoint(path: str | Path) -> tuple[Tacotron2, dict]:
    params, meta = load_checkpoint(path)
    cfg = config_from_dict(meta["config"])
    vocab = CharVocabulary.from_dict(meta["vocab"])
    model = Tacotron2(vocab, cfg.encoder, cfg.decoder, cfg.audio,
                      multi_speaker=meta.get("multi_speaker", False))
    arrays_to_state(model, params)
    model.eval()
    return model, meta


def load_vocoder_checkpoint(path: str | Path) -> tuple[Waveglow, dict]:
    params, meta = load_checkpoint(path)
    cfg = config_from_dict(meta["config"])
    model = Waveglow(cfg.waveglow, cfg.audio)
    arrays_to_state(model, params)
    model.eval()
    return model, meta


def save_vocoder_checkpoint(model: Waveglow, cfg, path: str | Path,
                            extra_meta: dict | None = None) -> None:
    from .checkpoints import save_checkpoint
    from .spectrogen import state_to_arrays
    meta = {"config": cfg.to_dict(), "kind": "vocoder"}
    meta.update(extra_meta or {})
    save_checkpoint(state_to_arrays(model), meta, path)


def _utterance_seed(utterance_id: str) -> int:
    return int.from_bytes(hashlib.sha256(utterance_id.encode()).digest()[:8], "little")


def _resolve_speaker(meta: dict, speaker_id: str | None, ref_audio: str | None,
                     table_path: str | None, extractor) -> torch.Tensor | None:
    if not meta.get("multi_speaker", False):
        if speaker_id or ref_audio:
            raise SynthError("model is single-speaker; drop the speaker argument")
        return None
    policy = SpeakerPolicy(meta["speaker_policy"])
    if policy is SpeakerPolicy.AVG_EMBED:
        if speaker_id is None:
            raise SynthError("avg-embed model needs --speaker-id")
        if table_path is None:
            raise SynthError("avg-embed model needs an embedding table file")
        table = load_table(table_path)
        return torch.from_numpy(table.lookup(speaker_id).vector)
    if ref_audio is None:
        raise SynthError("audio-embed model needs --ref-audio")
    extractor = extractor or StubExtractor()
    from .speaker import extract
    emb = extract(None, extractor, utterance_id=ref_audio, audio_path=ref_audio)
    return torch.from_numpy(emb.vector)


def synthesize(text: str, taco_ckpt: str | Path, vocoder_ckpt: str | Path,
               speaker_id: str | None = None, ref_audio: str | None = None,
               table_path: str | None = None, extractor=None,
               provider: TransliterationProvider | None = None,
               sigma: float | None = None, max_steps: int | None = None,
               utterance_id: str = "synth", out_dir: str | Path | None = None
               ) -> SynthResult:
    """Full pipeline for one sentence; writes WAV + diagnostics if out_dir set."""
    taco, taco_meta = load_spectrogen_checkpoint(taco_ckpt)
    voc, voc_meta = load_vocoder_checkpoint(vocoder_ckpt)
    check_audio_compat(taco_meta, voc_meta)
    cfg = config_from_dict(taco_meta["config"])

    if taco_meta.get("vocab_kind", "devanagari") == "devanagari":
        normalized = normalize(text, provider)
        net_input = normalized.devanagari
    else:
        net_input = text
    emb = _resolve_speaker(taco_meta, speaker_id, ref_audio, table_path, extractor)

    ids = torch.tensor(taco.vocab.encode(net_input), dtype=torch.long).unsqueeze(0)
    torch.manual_seed(_utterance_seed(utterance_id))  # prenet dropout at inference
    with torch.no_grad():
        out = taco.infer(ids, emb, max_steps=max_steps)
        mel = out.mel_post
        gen = torch.Generator().manual_seed(_utterance_seed(utterance_id))
        audio = voc.infer(mel, sigma_infer=sigma, generator=gen)[0]

    clip = AudioClip(audio.numpy().astype(np.float32).clip(-1, 1), cfg.audio.sample_rate)
    result = SynthResult(
        clip=clip,
        mel=mel[0].numpy(),
        attention=out.attention[0].numpy(),
        truncated=out.truncated,
        devanagari=net_input,
    )
    if out_dir is not None:
        write_diagnostics(result, Path(out_dir), utterance_id)
    return result


def write_diagnostics(result: SynthResult, out_dir: Path, utterance_id: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_wav(result.clip, out_dir / f"{utterance_id}.wav")
    save_matrix(result.mel, out_dir / f"{utterance_id}.mel.bin")
    save_matrix(result.attention, out_dir / f"{utterance_id}.attn.bin")
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, axes = plt.subplots(2, 1, figsize=(8, 6))
        axes[0].imshow(result.mel.T, aspect="auto", origin="lower")
        axes[0].set_title("mel spectrogram")
        axes[1].imshow(result.attention.T, aspect="auto", origin="lower")
        axes[1].set_title("attention alignment")
        fig.tight_layout()
        fig.savefig(out_dir / f"{utterance_id}.png", dpi=100)
        plt.close(fig)
    except ImportError:
        pass


def batch_synthesize(texts_manifest: str | Path, taco_ckpt: str | Path,
                     vocoder_ckpt: str | Path, out_dir: str | Path,
                     **kwargs) -> dict:
    """Synthesize every {id, text} line; per-item failures don't stop the batch.

    Returns a report with per-utterance durations, truncations, and errors;
    also written to out_dir/report.json.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"items": {}, "errors": {}, "truncated": []}
    lines = Path(texts_manifest).read_text(encoding="utf-8").splitlines()
    for line in lines:
        if not line.strip():
            continue
        row = json.loads(line)
        uid, text = row["id"], row["text"]
        try:
            result = synthesize(
                text, taco_ckpt, vocoder_ckpt,
                utterance_id=uid, out_dir=out_dir, **kwargs,
            )
            report["items"][uid] = {
                "duration_s": result.clip.duration_s,
                "truncated": result.truncated,
            }
            if result.truncated:
                report["truncated"].append(uid)
        except (SynthError, SpectrogenError, ValueError) as e:
            report["errors"][uid] = str(e)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    return report
