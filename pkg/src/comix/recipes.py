"""Training orchestration: warmstarts, fine-tuning, and checkpoint surgery.

Two pre-training stages (English Roman-script, then pooled-speaker
Devanagari) feed target-speaker fine-tuning, either full or decoder-only
with the encoder frozen. Moving between script vocabularies drops the
character embedding and re-initializes it (checkpoint surgery); every
checkpoint records its recipe provenance back to scratch.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .audiofe import load_wav, mel_spectrogram
from .checkpoints import load_checkpoint, params_digest, save_checkpoint
from .config import ToolkitConfig
from .corpus import CorpusManifest, load_manifest
from .speaker import SpeakerPolicy, StubExtractor, build_table, lookup
from .spectrogen import (
    CharVocabulary,
    Tacotron2,
    arrays_to_state,
    spectrogen_loss,
    state_to_arrays,
)


class RecipeError(ValueError):
    pass


STAGES = ("ENG_PRETRAIN", "MIX_PRETRAIN", "FINETUNE")


@dataclass
class RecipeSpec:
    name: str
    stage: str  # ENG_PRETRAIN | MIX_PRETRAIN | FINETUNE
    manifest: str
    init_from: str | None = None
    freeze: tuple[str, ...] = ()
    drop_on_load: tuple[str, ...] = ()
    multi_speaker: bool = False
    speaker_policy: str | None = None  # audio_embed | avg_embed
    vocab: str = "devanagari"  # devanagari | roman
    lr: float | None = None
    max_steps: int = 1000
    seed: int = 1234
    out_dir: str = "work"

    def __post_init__(self):
        if self.stage not in STAGES:
            raise RecipeError(f"unknown stage {self.stage!r}")
        if self.stage == "FINETUNE" and not self.init_from:
            raise RecipeError("FINETUNE requires init_from")
        if self.multi_speaker and self.speaker_policy not in ("audio_embed", "avg_embed"):
            raise RecipeError("multi-speaker recipe needs a speaker policy")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["freeze"] = list(self.freeze)
        d["drop_on_load"] = list(self.drop_on_load)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RecipeSpec":
        d = dict(d)
        d["freeze"] = tuple(d.get("freeze", ()))
        d["drop_on_load"] = tuple(d.get("drop_on_load", ()))
        return cls(**d)


@dataclass
class TrainReport:
    step_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    wall_clock_s: float = 0.0
    checkpoint_paths: list[str] = field(default_factory=list)
    frozen_digest_before: str | None = None
    frozen_digest_after: str | None = None
    surgery: dict | None = None


# ---------------------------------------------------------------------------
# Checkpoint surgery

def surgery_load(ckpt_params: dict[str, np.ndarray], model: Tacotron2,
                 drop_on_load: tuple[str, ...] = ()) -> dict:
    """Initialize a model from a checkpoint across vocabulary changes.

    Parameters matching a drop prefix keep their fresh initialization;
    the rest must match shapes exactly and are copied. Returns a report
    with the copied / dropped / fresh name sets.
    """
    target = state_to_arrays(model)
    copied, fresh, dropped = [], [], []
    new_state = {}
    for name, value in target.items():
        if any(name.startswith(p) for p in drop_on_load):
            new_state[name] = value
            fresh.append(name)
            continue
        if name not in ckpt_params:
            new_state[name] = value
            fresh.append(name)
            continue
        src = ckpt_params[name]
        if tuple(src.shape) != tuple(value.shape):
            raise RecipeError(
                f"shape mismatch on {name}: checkpoint {tuple(src.shape)} vs "
                f"model {tuple(value.shape)} (not covered by drop_on_load)"
            )
        new_state[name] = src.astype(value.dtype)
        copied.append(name)
    dropped = [n for n in ckpt_params if n not in target
               or any(n.startswith(p) for p in drop_on_load)]
    arrays_to_state(model, new_state)
    return {"copied": sorted(copied), "fresh": sorted(fresh), "dropped": sorted(dropped)}


# ---------------------------------------------------------------------------
# Data plumbing

def build_model(cfg: ToolkitConfig, vocab_kind: str, multi_speaker: bool) -> Tacotron2:
    vocab = CharVocabulary.devanagari() if vocab_kind == "devanagari" else CharVocabulary.roman()
    return Tacotron2(vocab, cfg.encoder, cfg.decoder, cfg.audio, multi_speaker=multi_speaker)


def _prepare_item(rec, model: Tacotron2, cfg: ToolkitConfig, cache_dir: Path | None):
    ids = torch.tensor(model.vocab.encode(rec.text), dtype=torch.long)
    mel = None
    cache_path = None
    if cache_dir is not None:
        cache_path = cache_dir / f"{rec.id}.mel"
        if cache_path.exists():
            from .audiofe import load_matrix
            mel = torch.from_numpy(load_matrix(cache_path))
    if mel is None:
        clip = load_wav(rec.audio_path, target_rate=cfg.audio.sample_rate)
        mel = torch.from_numpy(mel_spectrogram(clip, cfg.audio).frames)
        if cache_path is not None:
            from .audiofe import save_matrix
            save_matrix(mel.numpy(), cache_path)
    return ids, mel


STOP_SPAN_FRAMES = 3  # trailing frames marked as stop targets; helps the gate fire


def _collate(items, pad_mel_value: float):
    max_l = max(i.shape[0] for i, _, _ in items)
    max_t = max(m.shape[0] for _, m, _ in items)
    n_mels = items[0][1].shape[1]
    char_ids = torch.zeros(len(items), max_l, dtype=torch.long)
    mels = torch.full((len(items), max_t, n_mels), pad_mel_value)
    stops = torch.zeros(len(items), max_t)
    frame_mask = torch.zeros(len(items), max_t, dtype=torch.bool)
    memory_mask = torch.zeros(len(items), max_l, dtype=torch.bool)
    embs = []
    for b, (ids, mel, emb) in enumerate(items):
        char_ids[b, :ids.shape[0]] = ids
        mels[b, :mel.shape[0]] = mel
        stops[b, max(0, mel.shape[0] - STOP_SPAN_FRAMES):mel.shape[0]] = 1.0
        frame_mask[b, :mel.shape[0]] = True
        memory_mask[b, :ids.shape[0]] = True
        embs.append(emb)
    emb_batch = torch.stack(embs) if embs[0] is not None else None
    return char_ids, mels, stops, frame_mask, memory_mask, emb_batch


class _Batcher:
    """Seed-deterministic batches capped by total mel frames."""

    def __init__(self, items: list, batch_frames: int, seed: int):
        self.items = items
        self.batch_frames = batch_frames
        self.seed = seed

    def epoch(self, epoch_idx: int):
        order = list(range(len(self.items)))
        random.Random(f"{self.seed}:{epoch_idx}").shuffle(order)
        batch: list = []
        frames = 0
        for idx in order:
            t = self.items[idx][1].shape[0]
            if batch and frames + t > self.batch_frames:
                yield batch
                batch, frames = [], 0
            batch.append(self.items[idx])
            frames += t
        if batch:
            yield batch


def _resolve_embedding(rec, spec: RecipeSpec, table, extractor) -> torch.Tensor | None:
    if not spec.multi_speaker:
        return None
    policy = SpeakerPolicy(spec.speaker_policy)
    emb = lookup(policy, record=rec, table=table, extractor=extractor)
    return torch.from_numpy(emb.vector)


# ---------------------------------------------------------------------------
# Training

def run_recipe(spec: RecipeSpec, cfg: ToolkitConfig | None = None,
               extractor=None, cache_dir: str | None = None) -> TrainReport:
    """Train one recipe stage end to end and write provenance-carrying checkpoints."""
    cfg = cfg or ToolkitConfig()
    extractor = extractor or StubExtractor()
    t0 = time.monotonic()
    torch.manual_seed(spec.seed)

    model = build_model(cfg, spec.vocab, spec.multi_speaker)
    report = TrainReport()
    ancestry: list[str] = []
    if spec.init_from:
        ckpt_params, ckpt_meta = load_checkpoint(spec.init_from)
        report.surgery = surgery_load(ckpt_params, model, spec.drop_on_load)
        ancestry = ckpt_meta.get("ancestry", []) + [spec.init_from]

    all_names = list(state_to_arrays(model))
    for prefix_set, label in ((spec.freeze, "freeze"), (spec.drop_on_load, "drop_on_load")):
        for p in prefix_set:
            if not any(n.startswith(p) for n in all_names):
                raise RecipeError(f"{label} prefix {p!r} matches no parameter")

    for name, param in model.named_parameters():
        if any(name.startswith(p) for p in spec.freeze):
            param.requires_grad_(False)

    def set_train_mode():
        # frozen normalization layers must not update their running stats,
        # otherwise the frozen-bytes guarantee below would break
        model.train()
        for mod_name, mod in model.named_modules():
            if any(mod_name.startswith(p.rstrip(".")) for p in spec.freeze):
                if isinstance(mod, torch.nn.modules.batchnorm._BatchNorm):
                    mod.eval()

    if spec.freeze:
        report.frozen_digest_before = params_digest(state_to_arrays(model), spec.freeze)

    manifest = load_manifest(spec.manifest, cfg.audio.sample_rate,
                             allow_latin=(spec.vocab == "roman"))
    table = None
    if spec.multi_speaker and spec.speaker_policy == "avg_embed":
        table = build_table(manifest, extractor)

    cache = Path(cache_dir) if cache_dir else None
    if cache:
        cache.mkdir(parents=True, exist_ok=True)
    train_recs = [r for r in manifest.records if r.split == "TRAIN"]
    val_recs = [r for r in manifest.records if r.split == "VAL"]
    if not train_recs:
        raise RecipeError("manifest has no TRAIN records")

    def make_items(recs):
        return [
            (*_prepare_item(r, model, cfg, cache), _resolve_embedding(r, spec, table, extractor))
            for r in recs
        ]

    train_items = make_items(train_recs)
    val_items = make_items(val_recs)
    pad_value = float(np.log(cfg.audio.eps))
    batcher = _Batcher(train_items, cfg.train.batch_frames, spec.seed)

    default_lr = (cfg.train.lr_finetune if spec.stage == "FINETUNE"
                  else cfg.train.lr_pretrain)
    lr = spec.lr if spec.lr is not None else default_lr
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = (torch.optim.Adam(trainable, lr=lr, weight_decay=cfg.train.weight_decay)
                 if trainable else None)

    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def checkpoint_meta() -> dict:
        return {
            "recipe": spec.to_dict(),
            "ancestry": ancestry,
            "config": cfg.to_dict(),
            "vocab": model.vocab.to_dict(),
            "vocab_kind": spec.vocab,
            "multi_speaker": spec.multi_speaker,
            "speaker_policy": spec.speaker_policy,
        }

    def write_checkpoint(tag: str) -> str:
        path = out_dir / f"{spec.name}.{tag}.ckpt"
        save_checkpoint(state_to_arrays(model), checkpoint_meta(), path)
        report.checkpoint_paths.append(str(path))
        return str(path)

    def eval_loss() -> float:
        items = val_items or train_items
        model.eval()
        total, count = 0.0, 0
        with torch.no_grad():
            for batch in _Batcher(items, cfg.train.batch_frames, 0).epoch(0):
                ids, mels, stops, fmask, mmask, embs = _collate(batch, pad_value)
                out = model(ids, mels, embs, mmask)
                total += float(spectrogen_loss(out, mels, stops, fmask)["total"])
                count += 1
        set_train_mode()
        return total / max(count, 1)

    set_train_mode()
    step = 0
    epoch = 0
    best_val = float("inf")
    stale = 0
    stop = False
    while not stop:
        for batch in batcher.epoch(epoch):
            ids, mels, stops, fmask, mmask, embs = _collate(batch, pad_value)
            out = model(ids, mels, embs, mmask)
            losses = spectrogen_loss(out, mels, stops, fmask)
            report.step_losses.append(float(losses["total"].detach()))
            if optimizer is not None:
                optimizer.zero_grad()
                losses["total"].backward()
                torch.nn.utils.clip_grad_norm_(trainable, cfg.train.grad_clip_norm)
                optimizer.step()
            step += 1
            if step % cfg.train.eval_every == 0:
                v = eval_loss()
                report.val_losses.append(v)
                if v < best_val - 1e-6:
                    best_val = v
                    stale = 0
                else:
                    stale += 1
                if stale >= cfg.train.plateau_patience:
                    stop = True
            if step % cfg.train.checkpoint_every == 0:
                write_checkpoint(f"step{step}")
            if step >= spec.max_steps or stop:
                stop = True
                break
        epoch += 1

    write_checkpoint("final")
    if spec.freeze:
        report.frozen_digest_after = params_digest(state_to_arrays(model), spec.freeze)
        if report.frozen_digest_after != report.frozen_digest_before:
            raise RecipeError("frozen parameters changed during training")
    report.wall_clock_s = time.monotonic() - t0
    return report


def train_vocoder_steps(model, clips, mels, n_steps: int, lr: float = 1e-4,
                        sigma_train: float = 1.0) -> list[float]:
    """Plain likelihood-training loop for the vocoder; returns per-step NLL."""
    from .vocoder import nll_loss
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    losses = []
    for i in range(n_steps):
        audio = clips[i % len(clips)]
        mel = mels[i % len(mels)]
        out = model(audio, mel)
        loss = nll_loss(out, sigma_train)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))
    return losses


# ---------------------------------------------------------------------------
# The experiment matrix

ENCODER_PREFIXES = ("encoder.",)
DECODER_ONLY_FREEZE = ("encoder.", "speaker.")
EMBEDDING_DROP = ("encoder.embedding",)


def plan_paper_matrix(manifests: dict[str, str], checkpoints: dict[str, str] | None = None,
                      out_dir: str = "work", seed: int = 1234) -> list[RecipeSpec]:
    """Declare the full experiment grid: 8 model/warmstart cells plus 4
    low-resource adaptation rows. No training is performed.

    ``manifests`` must register: english, hindi_only, hindi_english,
    mix_all, target_3h, target_full. ``checkpoints`` may point at
    existing warmstart checkpoints; defaults assume they land in out_dir.
    """
    required = ("english", "hindi_only", "hindi_english", "mix_all",
                "target_3h", "target_full")
    missing = [k for k in required if k not in manifests]
    if missing:
        raise RecipeError(f"missing manifests: {missing}")
    ckpts = checkpoints or {}
    eng_ckpt = ckpts.get("eng", f"{out_dir}/eng_pretrain.final.ckpt")
    mix_ckpt = ckpts.get("mix", f"{out_dir}/mix_pretrain.final.ckpt")

    def base(name, **kw):
        return RecipeSpec(name=name, seed=seed, out_dir=out_dir, **kw)

    specs = []
    # table cells: {single hindi-only, single hi+en, multi audio, multi avg}
    # x {eng-warmstart full train, mix-warmstart decoder-only train}
    cells = [
        ("single_hindi_only", manifests["hindi_only"], False, None),
        ("single_hi_en", manifests["hindi_english"], False, None),
        ("multi_audio_embed", manifests["hindi_english"], True, "audio_embed"),
        ("multi_avg_embed", manifests["hindi_english"], True, "avg_embed"),
    ]
    for cell_name, manifest, multi, policy in cells:
        specs.append(base(
            f"{cell_name}__eng_warmstart",
            stage="FINETUNE", manifest=manifest, init_from=eng_ckpt,
            drop_on_load=EMBEDDING_DROP + (("speaker.",) if multi else ()),
            multi_speaker=multi, speaker_policy=policy,
        ))
        specs.append(base(
            f"{cell_name}__mix_warmstart",
            stage="FINETUNE", manifest=manifest, init_from=mix_ckpt,
            freeze=("encoder.",) if not multi else DECODER_ONLY_FREEZE,
            drop_on_load=("speaker.",) if multi else (),
            multi_speaker=multi, speaker_policy=policy,
        ))
    # low-resource adaptation rows
    specs.append(base(
        "adapt_eng_warmstart_3h",
        stage="FINETUNE", manifest=manifests["target_3h"], init_from=eng_ckpt,
        drop_on_load=EMBEDDING_DROP,
    ))
    specs.append(base(
        "adapt_mix_warmstart_3h",
        stage="FINETUNE", manifest=manifests["target_3h"], init_from=mix_ckpt,
    ))
    specs.append(base(
        "adapt_mix_warmstart_frozen_3h",
        stage="FINETUNE", manifest=manifests["target_3h"], init_from=mix_ckpt,
        freeze=("encoder.",),
    ))
    specs.append(base(
        "adapt_mix_warmstart_frozen_full",
        stage="FINETUNE", manifest=manifests["target_full"], init_from=mix_ckpt,
        freeze=("encoder.",),
    ))
    return specs


def save_recipe(spec: RecipeSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2), encoding="utf-8")


def load_recipe(path: str | Path) -> RecipeSpec:
    return RecipeSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
