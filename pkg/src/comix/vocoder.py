"""Flow-based vocoder: invertible transforms between audio and Gaussian noise.

Training direction maps grouped audio samples to latents under mel
conditioning and maximizes likelihood; synthesis runs the exact inverse
on noise. Couplings are zero-initialized and the 1x1 mixing convolutions
start at identity, so a freshly built stack is the identity map with
zero log-determinant.

State-dict names (``flow{i}.inv1x1.weight``, ``flow{i}.wn.*``,
``upsample.*``) are the checkpoint contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor, nn
from torch.nn import functional as F

from .config import AudioConfig, WaveglowConfig


class VocoderError(ValueError):
    pass


@dataclass
class FlowOutput:
    z: Tensor              # [B, n_samples] latents (early outputs concatenated)
    logdet_sum: Tensor     # scalar per batch item, summed over flows
    log_s_terms: list[Tensor]


class Invertible1x1Conv(nn.Module):
    def __init__(self, channels: int, init: str = "identity"):
        super().__init__()
        if init == "identity":
            w = torch.eye(channels)
        elif init == "orthogonal":
            w = torch.linalg.qr(torch.randn(channels, channels))[0]
        else:
            raise VocoderError(f"unknown 1x1 init {init!r}")
        self.weight = nn.Parameter(w)

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """x: [B, C, G] -> (Wx, logdet per item)."""
        n_groups = x.shape[-1]
        z = torch.einsum("ij,bjg->big", self.weight, x)
        logdet = n_groups * torch.slogdet(self.weight)[1]
        return z, logdet

    def inverse(self, z: Tensor) -> Tensor:
        w_inv = torch.linalg.inv(self.weight)
        return torch.einsum("ij,bjg->big", w_inv, z)


class WN(nn.Module):
    """Gated dilated-conv stack producing coupling (log_s, b); end layer zero."""

    def __init__(self, in_channels: int, cond_channels: int, out_channels: int,
                 n_layers: int, hidden: int, kernel: int):
        super().__init__()
        self.n_layers = n_layers
        self.hidden = hidden
        self.start = nn.Conv1d(in_channels, hidden, 1)
        self.in_layers = nn.ModuleList()
        self.cond_layers = nn.ModuleList()
        self.res_skip_layers = nn.ModuleList()
        for i in range(n_layers):
            dilation = 2 ** i
            pad = (kernel - 1) * dilation // 2
            self.in_layers.append(
                nn.Conv1d(hidden, 2 * hidden, kernel, dilation=dilation, padding=pad)
            )
            self.cond_layers.append(nn.Conv1d(cond_channels, 2 * hidden, 1))
            skip_ch = 2 * hidden if i < n_layers - 1 else hidden
            self.res_skip_layers.append(nn.Conv1d(hidden, skip_ch, 1))
        self.end = nn.Conv1d(hidden, out_channels, 1)
        nn.init.zeros_(self.end.weight)
        nn.init.zeros_(self.end.bias)

    def forward(self, x: Tensor, cond: Tensor) -> Tensor:
        h = self.start(x)
        skip_acc = torch.zeros_like(h)
        for i in range(self.n_layers):
            acts = self.in_layers[i](h) + self.cond_layers[i](cond)
            t_act, s_act = acts.chunk(2, dim=1)
            gated = torch.tanh(t_act) * torch.sigmoid(s_act)
            res_skip = self.res_skip_layers[i](gated)
            if i < self.n_layers - 1:
                res, skip = res_skip.chunk(2, dim=1)
                h = h + res
                skip_acc = skip_acc + skip
            else:
                skip_acc = skip_acc + res_skip
        return self.end(skip_acc)


class FlowStep(nn.Module):
    def __init__(self, channels: int, cond_channels: int, wg: WaveglowConfig,
                 init_1x1: str = "identity"):
        super().__init__()
        self.channels = channels
        half = channels // 2
        self.inv1x1 = Invertible1x1Conv(channels, init_1x1)
        self.wn = WN(half, cond_channels, 2 * (channels - half),
                     wg.wn_layers, wg.wn_channels, wg.wn_kernel)

    def forward(self, x: Tensor, cond: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        x, logdet = self.inv1x1(x)
        half = self.channels // 2
        x0, x1 = x[:, :half], x[:, half:]
        log_s, b = self.wn(x0, cond).chunk(2, dim=1)
        x1 = x1 * torch.exp(log_s) + b
        return torch.cat([x0, x1], dim=1), logdet + log_s.sum(dim=(1, 2)), log_s

    def inverse(self, z: Tensor, cond: Tensor) -> Tensor:
        half = self.channels // 2
        z0, z1 = z[:, :half], z[:, half:]
        log_s, b = self.wn(z0, cond).chunk(2, dim=1)
        z1 = (z1 - b) * torch.exp(-log_s)
        return self.inv1x1.inverse(torch.cat([z0, z1], dim=1))


class Waveglow(nn.Module):
    def __init__(self, wg_cfg: WaveglowConfig, audio_cfg: AudioConfig,
                 init_1x1: str = "identity"):
        super().__init__()
        self.cfg = wg_cfg
        self.audio_cfg = audio_cfg
        hop = audio_cfg.hop_length
        self.upsample = nn.ConvTranspose1d(
            audio_cfg.n_mels, audio_cfg.n_mels,
            kernel_size=audio_cfg.win_length, stride=hop,
        )
        cond_channels = audio_cfg.n_mels * wg_cfg.group_size
        channels = wg_cfg.group_size
        self._flow_channels = []
        for i in range(wg_cfg.n_flows):
            if i > 0 and i % wg_cfg.early_output_every == 0:
                channels -= wg_cfg.early_output_channels
            if channels < 2:
                raise VocoderError("early outputs exhaust the channel budget")
            self._flow_channels.append(channels)
            setattr(self, f"flow{i}", FlowStep(channels, cond_channels, wg_cfg, init_1x1))

    # -- conditioning --------------------------------------------------------

    def upsample_mel(self, mel: Tensor) -> Tensor:
        """[B, T, n_mels] -> [B, n_mels, T*hop] conditioning at sample rate."""
        hop = self.audio_cfg.hop_length
        up = self.upsample(mel.transpose(1, 2))
        target = mel.shape[1] * hop
        if up.shape[-1] < target:
            raise VocoderError("upsampled conditioning shorter than expected")
        return up[:, :, :target]

    def _grouped_cond(self, up: Tensor, n_groups: int) -> Tensor:
        g = self.cfg.group_size
        need = n_groups * g
        if up.shape[-1] < need:
            up = F.pad(up, (0, need - up.shape[-1]), mode="replicate")
        up = up[:, :, :need]
        b, c, _ = up.shape
        return up.reshape(b, c, n_groups, g).permute(0, 1, 3, 2).reshape(b, c * g, n_groups)

    # -- flow directions -----------------------------------------------------

    def forward(self, audio: Tensor, mel: Tensor) -> FlowOutput:
        """audio [B, n] with n a multiple of group_size; mel [B, T, n_mels]."""
        if audio.dim() == 1:
            audio = audio.unsqueeze(0)
        if mel.dim() == 2:
            mel = mel.unsqueeze(0)
        g = self.cfg.group_size
        n = audio.shape[-1]
        if n % g != 0:
            raise VocoderError(f"segment length {n} not a multiple of group size {g}")
        up = self.upsample_mel(mel)
        if up.shape[-1] < n:
            raise VocoderError(
                f"conditioning covers {up.shape[-1]} samples but segment has {n}"
            )
        n_groups = n // g
        cond = self._grouped_cond(up[:, :, :n], n_groups)
        x = audio.reshape(audio.shape[0], n_groups, g).transpose(1, 2)
        early: list[Tensor] = []
        logdet = torch.zeros(audio.shape[0], device=audio.device, dtype=audio.dtype)
        log_s_terms: list[Tensor] = []
        for i in range(self.cfg.n_flows):
            if i > 0 and i % self.cfg.early_output_every == 0:
                early.append(x[:, :self.cfg.early_output_channels])
                x = x[:, self.cfg.early_output_channels:]
            x, ld, log_s = getattr(self, f"flow{i}")(x, cond)
            logdet = logdet + ld
            log_s_terms.append(log_s)
        early.append(x)
        z = torch.cat([e.reshape(e.shape[0], -1) for e in early], dim=1)
        return FlowOutput(z=z, logdet_sum=logdet, log_s_terms=log_s_terms)

    def inverse(self, z: Tensor, mel: Tensor, sigma_infer: float = 1.0) -> Tensor:
        """Latents back to audio; deterministic given z. Returns [B, n]."""
        del sigma_infer  # scale belongs to z's sampling; kept for call symmetry
        if z.dim() == 1:
            z = z.unsqueeze(0)
        if mel.dim() == 2:
            mel = mel.unsqueeze(0)
        g = self.cfg.group_size
        n = z.shape[-1]
        if n % g != 0:
            raise VocoderError(f"latent count {n} not a multiple of group size {g}")
        n_groups = n // g
        up = self.upsample_mel(mel)
        cond = self._grouped_cond(up, n_groups)
        # split z back into the early outputs and the final chunk
        chunks: list[Tensor] = []
        offset = 0
        for i in range(self.cfg.n_flows):
            if i > 0 and i % self.cfg.early_output_every == 0:
                take = self.cfg.early_output_channels * n_groups
                chunks.append(z[:, offset:offset + take].reshape(
                    z.shape[0], self.cfg.early_output_channels, n_groups))
                offset += take
        final_ch = self._flow_channels[-1]
        chunks.append(z[:, offset:].reshape(z.shape[0], final_ch, n_groups))
        x = chunks.pop()
        for i in reversed(range(self.cfg.n_flows)):
            x = getattr(self, f"flow{i}").inverse(x, cond)
            if i > 0 and i % self.cfg.early_output_every == 0:
                x = torch.cat([chunks.pop(), x], dim=1)
        return x.transpose(1, 2).reshape(x.shape[0], -1)

    def infer(self, mel: Tensor, sigma_infer: float | None = None,
              generator: torch.Generator | None = None) -> Tensor:
        """Synthesize audio of exactly T*hop samples from noise."""
        if mel.dim() == 2:
            mel = mel.unsqueeze(0)
        sigma = sigma_infer if sigma_infer is not None else self.cfg.sigma_infer
        g = self.cfg.group_size
        target = mel.shape[1] * self.audio_cfg.hop_length
        n = ((target + g - 1) // g) * g
        z = sigma * torch.randn(
            mel.shape[0], n, generator=generator,
            dtype=mel.dtype, device=mel.device,
        )
        audio = self.inverse(z, mel)
        return audio[:, :target]


def nll_loss(flow_out: FlowOutput, sigma_train: float = 1.0) -> Tensor:
    """Per-element negative log-likelihood (constant term dropped)."""
    if not torch.isfinite(flow_out.logdet_sum).all():
        raise VocoderError("non-finite log-determinant (numerical blow-up)")
    n = flow_out.z.shape[-1] * flow_out.z.shape[0]
    quad = (flow_out.z ** 2).sum() / (2.0 * sigma_train ** 2)
    return (quad - flow_out.logdet_sum.sum()) / n
