"""Character-to-mel sequence model with location-sensitive attention.

Encoder: character embedding, three 1-d conv blocks, one Bi-LSTM.
Decoder: prenet-bottlenecked autoregressive LSTM stack attending over
encoder states, with parallel mel and stop-token projections and a
residual conv postnet. Optionally conditioned on a 512-d speaker
embedding added to every encoder time step.

Parameter names in ``state_dict`` are a compatibility contract for
checkpoint surgery: ``encoder.embedding.*``, ``encoder.conv{0..2}.*``,
``encoder.bilstm.*``, ``decoder.prenet.*``, ``decoder.attn.*``,
``decoder.lstm{0,1}.*``, ``decoder.mel_proj.*``, ``decoder.gate_proj.*``,
``postnet.conv{0..4}.*``, ``speaker.norm{1,2}.*``, ``speaker.dense.*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor, nn
from torch.nn import functional as F

from .config import AudioConfig, DecoderConfig, EncoderConfig
from .textnorm import RETAINED_PUNCT

SPEAKER_DIM = 512


class SpectrogenError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Vocabulary

PAD_SYMBOL = "<pad>"
EOS_SYMBOL = "<eos>"


class CharVocabulary:
    """Ordered symbol set; PAD is always id 0 and EOS is always present."""

    def __init__(self, characters: list[str]):
        self.symbols = [PAD_SYMBOL, EOS_SYMBOL] + list(characters)
        if len(set(self.symbols)) != len(self.symbols):
            raise SpectrogenError("duplicate symbols in vocabulary")
        self.index = {s: i for i, s in enumerate(self.symbols)}

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return 1

    def encode(self, text: str, append_eos: bool = True) -> list[int]:
        ids = []
        for ch in text:
            if ch not in self.index:
                raise SpectrogenError(f"character {ch!r} (U+{ord(ch):04X}) not in vocabulary")
            ids.append(self.index[ch])
        if append_eos:
            ids.append(self.eos_id)
        return ids

    @classmethod
    def devanagari(cls) -> "CharVocabulary":
        """Covers the text-frontend output alphabet exactly."""
        chars = [" "] + [c for c in RETAINED_PUNCT if c != "।"]
        chars += [chr(cp) for cp in range(0x0900, 0x0980)]
        return cls(chars)

    @classmethod
    def roman(cls) -> "CharVocabulary":
        """Roman-script vocabulary for English pre-training."""
        chars = [" "] + [c for c in ".,?!'-"]
        chars += [chr(c) for c in range(ord("a"), ord("z") + 1)]
        chars += [chr(c) for c in range(ord("A"), ord("Z") + 1)]
        return cls(chars)

    def to_dict(self) -> dict:
        return {"symbols": self.symbols[2:]}

    @classmethod
    def from_dict(cls, data: dict) -> "CharVocabulary":
        return cls(data["symbols"])


# ---------------------------------------------------------------------------
# Building blocks

class ConvBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, activation: str = "relu"):
        super().__init__()
        self.conv = nn.Conv1d(in_ch, out_ch, kernel, padding=(kernel - 1) // 2)
        self.bn = nn.BatchNorm1d(out_ch)
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        y = self.bn(self.conv(x))
        if self.activation == "relu":
            return F.relu(y)
        if self.activation == "tanh":
            return torch.tanh(y)
        return y


class Encoder(nn.Module):
    def __init__(self, vocab_size: int, cfg: EncoderConfig):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, cfg.embed_dim, padding_idx=0)
        channels = [cfg.embed_dim] + [cfg.conv_filters] * cfg.n_conv
        for i in range(cfg.n_conv):
            setattr(self, f"conv{i}", ConvBlock(channels[i], channels[i + 1], cfg.conv_kernel))
        self.n_conv = cfg.n_conv
        self.bilstm = nn.LSTM(
            cfg.conv_filters, cfg.bilstm_units_total // 2,
            batch_first=True, bidirectional=True,
        )
        self.output_dim = cfg.bilstm_units_total

    def forward(self, char_ids: Tensor) -> Tensor:
        """[B, L] int ids -> [B, L, output_dim] encoder states."""
        x = self.embedding(char_ids).transpose(1, 2)
        for i in range(self.n_conv):
            x = getattr(self, f"conv{i}")(x)
        x = x.transpose(1, 2)
        out, _ = self.bilstm(x)
        return out


class SpeakerFusion(nn.Module):
    """Project a 512-d speaker vector and add it to every encoder step."""

    def __init__(self, encoder_dim: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(SPEAKER_DIM)
        self.dense = nn.Linear(SPEAKER_DIM, encoder_dim)
        self.norm2 = nn.LayerNorm(encoder_dim)

    def forward(self, encoder_states: Tensor, embedding: Tensor) -> Tensor:
        if embedding.shape[-1] != SPEAKER_DIM:
            raise SpectrogenError(
                f"speaker embedding must be {SPEAKER_DIM}-d, got {embedding.shape[-1]}"
            )
        projected = self.norm2(self.dense(self.norm1(embedding)))
        return encoder_states + projected.unsqueeze(-2)


class Prenet(nn.Module):
    """Bottleneck with dropout kept active at inference."""

    def __init__(self, in_dim: int, units: tuple[int, ...], dropout: float):
        super().__init__()
        dims = [in_dim] + list(units)
        self.layers = nn.ModuleList(
            nn.Linear(dims[i], dims[i + 1], bias=False) for i in range(len(units))
        )
        self.dropout = dropout

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = F.dropout(F.relu(layer(x)), p=self.dropout, training=True)
        return x


class LocationSensitiveAttention(nn.Module):
    """Additive attention conditioned on cumulative previous weights."""

    def __init__(self, query_dim: int, memory_dim: int, attn_dim: int,
                 location_filters: int, location_kernel: int):
        super().__init__()
        self.query = nn.Linear(query_dim, attn_dim, bias=False)
        self.memory_layer = nn.Linear(memory_dim, attn_dim, bias=False)
        self.location_conv = nn.Conv1d(
            2, location_filters, location_kernel,
            padding=(location_kernel - 1) // 2, bias=False,
        )
        self.location_dense = nn.Linear(location_filters, attn_dim, bias=False)
        self.v = nn.Linear(attn_dim, 1, bias=False)

    def forward(self, query: Tensor, memory: Tensor, processed_memory: Tensor,
                attn_state: Tensor, mask: Tensor | None) -> tuple[Tensor, Tensor]:
        """One step: returns (context [B, M], weights [B, L])."""
        loc = self.location_dense(self.location_conv(attn_state).transpose(1, 2))
        energies = self.v(torch.tanh(
            self.query(query).unsqueeze(1) + processed_memory + loc
        )).squeeze(-1)
        if mask is not None:
            energies = energies.masked_fill(~mask, float("-inf"))
        weights = F.softmax(energies, dim=-1)
        context = torch.bmm(weights.unsqueeze(1), memory).squeeze(1)
        return context, weights


class Decoder(nn.Module):
    def __init__(self, memory_dim: int, n_mels: int, cfg: DecoderConfig):
        super().__init__()
        self.cfg = cfg
        self.n_mels = n_mels
        self.memory_dim = memory_dim
        self.prenet = Prenet(n_mels, cfg.prenet_units, cfg.prenet_dropout)
        self.attn = LocationSensitiveAttention(
            cfg.lstm_units, memory_dim, cfg.attn_dim,
            cfg.location_filters, cfg.location_kernel,
        )
        self.lstm0 = nn.LSTMCell(cfg.prenet_units[-1] + memory_dim, cfg.lstm_units)
        self.lstm1 = nn.LSTMCell(cfg.lstm_units + memory_dim, cfg.lstm_units)
        self.mel_proj = nn.Linear(cfg.lstm_units + memory_dim, n_mels)
        self.gate_proj = nn.Linear(cfg.lstm_units + memory_dim, 1)

    def _initial_state(self, memory: Tensor):
        batch, length, _ = memory.shape
        kw = dict(device=memory.device, dtype=memory.dtype)
        return {
            "h0": torch.zeros(batch, self.cfg.lstm_units, **kw),
            "c0": torch.zeros(batch, self.cfg.lstm_units, **kw),
            "h1": torch.zeros(batch, self.cfg.lstm_units, **kw),
            "c1": torch.zeros(batch, self.cfg.lstm_units, **kw),
            "attn_weights": torch.zeros(batch, length, **kw),
            "attn_cum": torch.zeros(batch, length, **kw),
            "context": torch.zeros(batch, self.memory_dim, **kw),
        }

    def _step(self, frame: Tensor, memory: Tensor, processed_memory: Tensor,
              state: dict, mask: Tensor | None):
        prenet_out = self.prenet(frame)
        x = torch.cat([prenet_out, state["context"]], dim=-1)
        state["h0"], state["c0"] = self.lstm0(x, (state["h0"], state["c0"]))
        attn_state = torch.stack([state["attn_weights"], state["attn_cum"]], dim=1)
        context, weights = self.attn(
            state["h0"], memory, processed_memory, attn_state, mask
        )
        state["attn_weights"] = weights
        state["attn_cum"] = state["attn_cum"] + weights
        state["context"] = context
        x = torch.cat([state["h0"], context], dim=-1)
        state["h1"], state["c1"] = self.lstm1(x, (state["h1"], state["c1"]))
        out = torch.cat([state["h1"], context], dim=-1)
        return self.mel_proj(out), self.gate_proj(out).squeeze(-1), weights


# ---------------------------------------------------------------------------
# Full model

@dataclass
class SpectrogenOutput:
    mel_pre: Tensor    # [B, T, n_mels]
    mel_post: Tensor   # [B, T, n_mels]
    stop_probs: Tensor  # [B, T], in (0, 1)
    attention: Tensor  # [B, T, L], rows sum to 1
    truncated: bool = False


class Tacotron2(nn.Module):
    def __init__(self, vocab: CharVocabulary, encoder_cfg: EncoderConfig,
                 decoder_cfg: DecoderConfig, audio_cfg: AudioConfig,
                 multi_speaker: bool = False):
        super().__init__()
        self.vocab = vocab
        self.encoder_cfg = encoder_cfg
        self.decoder_cfg = decoder_cfg
        self.audio_cfg = audio_cfg
        self.multi_speaker = multi_speaker
        self.encoder = Encoder(len(vocab), encoder_cfg)
        self.speaker = SpeakerFusion(self.encoder.output_dim) if multi_speaker else None
        self.decoder = Decoder(self.encoder.output_dim, audio_cfg.n_mels, decoder_cfg)
        self.postnet = Postnet(audio_cfg.n_mels, decoder_cfg)

    # -- encoding ----------------------------------------------------------

    def encode(self, char_ids: Tensor) -> Tensor:
        if char_ids.dim() == 1:
            char_ids = char_ids.unsqueeze(0)
        if char_ids.numel() == 0 or char_ids.shape[1] == 0:
            raise SpectrogenError("empty character sequence")
        bad = char_ids[(char_ids < 0) | (char_ids >= len(self.vocab))]
        if bad.numel():
            raise SpectrogenError(f"out-of-vocabulary id {int(bad[0])}")
        return self.encoder(char_ids)

    def fuse_speaker(self, encoder_states: Tensor, embedding: Tensor) -> Tensor:
        if self.speaker is None:
            raise SpectrogenError("model is single-speaker; no fusion block")
        if embedding.dim() == 1:
            embedding = embedding.unsqueeze(0)
        return self.speaker(encoder_states, embedding)

    def _memory(self, char_ids: Tensor, speaker_embedding: Tensor | None) -> Tensor:
        states = self.encode(char_ids)
        if self.multi_speaker:
            if speaker_embedding is None:
                raise SpectrogenError("multi-speaker model requires a speaker embedding")
            states = self.fuse_speaker(states, speaker_embedding)
        elif speaker_embedding is not None:
            raise SpectrogenError("model is single-speaker; got a speaker embedding")
        return states

    # -- decoding ----------------------------------------------------------

    def decode_teacher_forced(self, encoder_states: Tensor, target_mel: Tensor,
                              memory_mask: Tensor | None = None) -> SpectrogenOutput:
        """Feed ground-truth frames; output length equals target length."""
        if target_mel.dim() == 2:
            target_mel = target_mel.unsqueeze(0)
        batch, t_len, _ = target_mel.shape
        dec = self.decoder
        state = dec._initial_state(encoder_states)
        processed = dec.attn.memory_layer(encoder_states)
        go_frame = torch.zeros(batch, dec.n_mels,
                               device=target_mel.device, dtype=target_mel.dtype)
        inputs = torch.cat([go_frame.unsqueeze(1), target_mel[:, :-1]], dim=1)
        mels, gates, attns = [], [], []
        for t in range(t_len):
            mel, gate, weights = dec._step(
                inputs[:, t], encoder_states, processed, state, memory_mask
            )
            mels.append(mel)
            gates.append(gate)
            attns.append(weights)
        mel_pre = torch.stack(mels, dim=1)
        mel_post = mel_pre + self.postnet(mel_pre)
        return SpectrogenOutput(
            mel_pre=mel_pre,
            mel_post=mel_post,
            stop_probs=torch.sigmoid(torch.stack(gates, dim=1)),
            attention=torch.stack(attns, dim=1),
        )

    @torch.no_grad()
    def decode_inference(self, encoder_states: Tensor, max_steps: int | None = None,
                         gate_threshold: float | None = None) -> SpectrogenOutput:
        """Free-running decoding; stops on the gate or at max_steps (flagged)."""
        max_steps = max_steps if max_steps is not None else self.decoder_cfg.max_steps
        gate_threshold = (gate_threshold if gate_threshold is not None
                          else self.decoder_cfg.gate_threshold)
        if max_steps < 1:
            raise SpectrogenError("max_steps must be >= 1")
        dec = self.decoder
        batch = encoder_states.shape[0]
        state = dec._initial_state(encoder_states)
        processed = dec.attn.memory_layer(encoder_states)
        frame = torch.zeros(batch, dec.n_mels,
                            device=encoder_states.device, dtype=encoder_states.dtype)
        mels, gates, attns = [], [], []
        truncated = True
        for _ in range(max_steps):
            mel, gate, weights = dec._step(frame, encoder_states, processed, state, None)
            mels.append(mel)
            gates.append(gate)
            attns.append(weights)
            frame = mel
            if torch.sigmoid(gate).max().item() > gate_threshold:
                truncated = False
                break
        mel_pre = torch.stack(mels, dim=1)
        mel_post = mel_pre + self.postnet(mel_pre)
        return SpectrogenOutput(
            mel_pre=mel_pre,
            mel_post=mel_post,
            stop_probs=torch.sigmoid(torch.stack(gates, dim=1)),
            attention=torch.stack(attns, dim=1),
            truncated=truncated,
        )

    def forward(self, char_ids: Tensor, target_mel: Tensor,
                speaker_embedding: Tensor | None = None,
                memory_mask: Tensor | None = None) -> SpectrogenOutput:
        memory = self._memory(char_ids, speaker_embedding)
        return self.decode_teacher_forced(memory, target_mel, memory_mask)

    def infer(self, char_ids: Tensor, speaker_embedding: Tensor | None = None,
              max_steps: int | None = None,
              gate_threshold: float | None = None) -> SpectrogenOutput:
        memory = self._memory(char_ids, speaker_embedding)
        return self.decode_inference(memory, max_steps, gate_threshold)


class Postnet(nn.Module):
    """Five conv blocks refining the mel output; tanh except the last."""

    def __init__(self, n_mels: int, cfg: DecoderConfig):
        super().__init__()
        self.n_layers = cfg.postnet_layers
        for i in range(cfg.postnet_layers):
            in_ch = n_mels if i == 0 else cfg.postnet_filters
            out_ch = n_mels if i == cfg.postnet_layers - 1 else cfg.postnet_filters
            act = "linear" if i == cfg.postnet_layers - 1 else "tanh"
            setattr(self, f"conv{i}", ConvBlock(in_ch, out_ch, cfg.postnet_kernel, act))

    def forward(self, mel: Tensor) -> Tensor:
        x = mel.transpose(1, 2)
        for i in range(self.n_layers):
            x = getattr(self, f"conv{i}")(x)
        return x.transpose(1, 2)


# ---------------------------------------------------------------------------
# Loss

def spectrogen_loss(output: SpectrogenOutput, target_mel: Tensor,
                    target_stops: Tensor, frame_mask: Tensor | None = None) -> dict:
    """Masked MSE on both mel outputs plus stop-token BCE.

    ``frame_mask`` is [B, T] with True on real (non-padding) frames;
    padded frames are excluded from every mean.
    """
    if target_mel.dim() == 2:
        target_mel = target_mel.unsqueeze(0)
    if target_stops.dim() == 1:
        target_stops = target_stops.unsqueeze(0)
    if output.mel_pre.shape != target_mel.shape:
        raise SpectrogenError(
            f"shape mismatch: output {tuple(output.mel_pre.shape)} vs "
            f"target {tuple(target_mel.shape)}"
        )
    if frame_mask is None:
        frame_mask = torch.ones_like(target_stops, dtype=torch.bool)
    m = frame_mask.unsqueeze(-1)
    n_frames = frame_mask.sum().clamp(min=1)
    n_values = n_frames * target_mel.shape[-1]
    mel_pre_mse = (((output.mel_pre - target_mel) ** 2) * m).sum() / n_values
    mel_post_mse = (((output.mel_post - target_mel) ** 2) * m).sum() / n_values
    probs = output.stop_probs.clamp(1e-7, 1 - 1e-7)
    bce = -(target_stops * probs.log() + (1 - target_stops) * (1 - probs).log())
    stop_bce = (bce * frame_mask).sum() / n_frames
    total = mel_pre_mse + mel_post_mse + stop_bce
    return {
        "mel_pre_mse": mel_pre_mse,
        "mel_post_mse": mel_post_mse,
        "stop_bce": stop_bce,
        "total": total,
    }


# ---------------------------------------------------------------------------
# Checkpoint helpers

def state_to_arrays(model: nn.Module) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()}


def arrays_to_state(model: nn.Module, arrays: dict[str, np.ndarray]) -> None:
    state = {k: torch.as_tensor(v) for k, v in arrays.items()}
    model.load_state_dict(state)
