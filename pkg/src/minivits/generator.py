"""Miniature VITS-style generator stack.

Posterior encoder (linear spectrogram -> latent), text encoder (tokens ->
per-token Gaussian prior), speaker-conditioned flow, transposed-conv
waveform decoder, duration predictor, and the ELBO loss pieces. Sequence
tensors are [B x C x T]; the desk-scale defaults keep every submodule small
enough for CPU training.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .errors import ShapeMismatchError
from .flow import SpeakerFlow
from .speakers import EMBED_DIM, ProjectionHead, ReferenceEncoder

LOG_STD_MIN = -7.0
LOG_STD_MAX = 5.0
HOP = 256

_LOG_2PI = float(np.log(2.0 * np.pi))


def clamp_log_std(log_std: torch.Tensor) -> torch.Tensor:
    return torch.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)


class PosteriorEncoder(nn.Module):
    """Linear spectrogram [B x 513 x T] -> framewise Gaussian stats [B x D x T]."""

    def __init__(self, n_freq: int, latent_dim: int, hidden: int = 64):
        super().__init__()
        self.pre = nn.Conv1d(n_freq, hidden, 3, padding=1)
        self.mid = nn.Conv1d(hidden, hidden, 5, padding=2)
        self.out = nn.Conv1d(hidden, 2 * latent_dim, 1)
        self.latent_dim = latent_dim

    def forward(self, linear: torch.Tensor):
        # log compression tames raw magnitudes before the convs
        h = torch.log1p(linear)
        h = torch.relu(self.pre(h))
        h = torch.relu(self.mid(h))
        stats = self.out(h)
        mean, log_std = stats.split(self.latent_dim, dim=1)
        return mean, clamp_log_std(log_std)


def sample_gaussian(
    mean: torch.Tensor,
    log_std: torch.Tensor,
    generator: torch.Generator | None = None,
    noise_scale: float = 1.0,
) -> torch.Tensor:
    """Reparameterized draw mean + scale * exp(log_std) * eps."""
    eps = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
    return mean + noise_scale * torch.exp(log_std) * eps


class TextEncoder(nn.Module):
    """Token ids [B x T_text] -> hidden states and per-token prior stats."""

    def __init__(self, vocab_size: int, latent_dim: int, hidden: int = 64, n_layers: int = 2):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, hidden)
        self.convs = nn.ModuleList(
            nn.Conv1d(hidden, hidden, 5, padding=2) for _ in range(n_layers)
        )
        self.out = nn.Conv1d(hidden, 2 * latent_dim, 1)
        self.latent_dim = latent_dim

    def forward(self, tokens: torch.Tensor):
        h = self.embed(tokens).transpose(1, 2)
        for conv in self.convs:
            h = torch.relu(conv(h))
        stats = self.out(h)
        mean, log_std = stats.split(self.latent_dim, dim=1)
        return h, mean, clamp_log_std(log_std)


class Decoder(nn.Module):
    """Latent frames [B x D x T] -> waveform [B x 256*T] in [-1, 1].

    Four transposed-conv stages of stride 4 (4^4 = 256 = hop), leaky ReLU
    between stages, tanh head.
    """

    def __init__(self, latent_dim: int, channels: tuple[int, ...] = (96, 48, 24, 12)):
        super().__init__()
        ups = []
        refine = []
        in_ch = latent_dim
        for ch in channels:
            ups.append(nn.ConvTranspose1d(in_ch, ch, kernel_size=8, stride=4, padding=2))
            refine.append(nn.Conv1d(ch, ch, kernel_size=7, padding=3))
            in_ch = ch
        self.ups = nn.ModuleList(ups)
        self.refine = nn.ModuleList(refine)
        self.head = nn.Conv1d(in_ch, 1, kernel_size=7, padding=3)
        self.upsample_factor = 4 ** len(channels)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h = z
        for up, conv in zip(self.ups, self.refine):
            h = F.leaky_relu(up(h), 0.1)
            h = F.leaky_relu(conv(h), 0.1)
        return torch.tanh(self.head(h)).squeeze(1)


class DurationPredictor(nn.Module):
    """Per-token log-durations from text hidden states, g, and g_d.

    The text hidden states are detached so the duration loss trains only
    this module (and the embeddings it conditions on).
    """

    def __init__(self, text_hidden: int, hidden: int = 64):
        super().__init__()
        self.cond_g = nn.Linear(EMBED_DIM, text_hidden)
        self.cond_gd = nn.Linear(EMBED_DIM, text_hidden)
        self.conv1 = nn.Conv1d(text_hidden, hidden, 3, padding=1)
        self.conv2 = nn.Conv1d(hidden, hidden, 3, padding=1)
        self.out = nn.Conv1d(hidden, 1, 1)

    def forward(
        self, text_hidden: torch.Tensor, g: torch.Tensor, g_d: torch.Tensor
    ) -> torch.Tensor:
        h = (
            text_hidden.detach()
            + self.cond_g(g).unsqueeze(-1)
            + self.cond_gd(g_d).unsqueeze(-1)
        )
        h = torch.relu(self.conv1(h))
        h = torch.relu(self.conv2(h))
        return self.out(h).squeeze(1)


class Generator(nn.Module):
    """All trainable generator-side modules under one parameter tree."""

    def __init__(
        self,
        vocab_size: int,
        n_freq: int = 513,
        latent_dim: int = 16,
        flow_layers: int = 4,
        flow_hidden: int = 64,
        text_hidden: int = 64,
        text_layers: int = 2,
        posterior_hidden: int = 64,
        decoder_channels: tuple[int, ...] = (96, 48, 24, 12),
        duration_hidden: int = 64,
    ):
        super().__init__()
        self.latent_dim = latent_dim
        self.posterior = PosteriorEncoder(n_freq, latent_dim, posterior_hidden)
        self.text_encoder = TextEncoder(vocab_size, latent_dim, text_hidden, text_layers)
        self.flow = SpeakerFlow(latent_dim, flow_layers, flow_hidden)
        self.decoder = Decoder(latent_dim, decoder_channels)
        self.duration = DurationPredictor(text_hidden, duration_hidden)
        self.projection = ProjectionHead()
        self.reference_encoder = ReferenceEncoder()


# --- losses --------------------------------------------------------------------


def reconstruction_loss(mel_hat: torch.Tensor, mel_ref: torch.Tensor) -> torch.Tensor:
    """Mean L1 distance between two log-mel spectrograms."""
    if mel_hat.shape != mel_ref.shape:
        raise ShapeMismatchError(f"mel shapes differ: {mel_hat.shape} vs {mel_ref.shape}")
    return torch.mean(torch.abs(mel_hat - mel_ref))


def kl_loss(
    z_v: torch.Tensor,
    q_mean: torch.Tensor,
    q_log_std: torch.Tensor,
    z_f: torch.Tensor,
    p_mean: torch.Tensor,
    p_log_std: torch.Tensor,
    logdet: torch.Tensor,
) -> torch.Tensor:
    """Single-sample KL(q(z_v|y) || p(z_f|x)) evaluated in flow space.

    log q(z_v) - log p(z_f) - logdet at the drawn sample, averaged over the
    latent elements. All tensors are [B x D x T]; logdet is [B].
    """
    if z_f.shape != p_mean.shape:
        raise ShapeMismatchError(
            f"latent/prior shapes differ: {z_f.shape} vs {p_mean.shape}"
        )
    log_q = -0.5 * _LOG_2PI - q_log_std - 0.5 * ((z_v - q_mean) * torch.exp(-q_log_std)) ** 2
    log_p = -0.5 * _LOG_2PI - p_log_std - 0.5 * ((z_f - p_mean) * torch.exp(-p_log_std)) ** 2
    n_elem = z_v[0].numel()
    total = log_q.sum(dim=(1, 2)) - log_p.sum(dim=(1, 2)) - logdet
    return (total / n_elem).mean()


def gaussian_kl_closed_form(
    q_mean: torch.Tensor,
    q_log_std: torch.Tensor,
    p_mean: torch.Tensor,
    p_log_std: torch.Tensor,
) -> torch.Tensor:
    """Exact diagonal-Gaussian KL per element mean (identity-flow reference)."""
    var_q = torch.exp(2.0 * q_log_std)
    term = (
        p_log_std
        - q_log_std
        + (var_q + (q_mean - p_mean) ** 2) / (2.0 * torch.exp(2.0 * p_log_std))
        - 0.5
    )
    return term.mean()


def duration_loss(log_pred: torch.Tensor, target_frames: torch.Tensor) -> torch.Tensor:
    """MSE in the log-duration domain against integer alignment durations."""
    return F.mse_loss(log_pred, torch.log(target_frames.to(log_pred.dtype)))


def elbo_losses(
    mel_ref: torch.Tensor,
    mel_hat: torch.Tensor,
    z_v: torch.Tensor,
    q_mean: torch.Tensor,
    q_log_std: torch.Tensor,
    z_f: torch.Tensor,
    p_mean_aligned: torch.Tensor,
    p_log_std_aligned: torch.Tensor,
    logdet: torch.Tensor,
    recon_weight: float = 45.0,
) -> dict[str, torch.Tensor]:
    """Reconstruction and KL terms of the variational objective."""
    return {
        "recon": recon_weight * reconstruction_loss(mel_hat, mel_ref),
        "kl": kl_loss(z_v, q_mean, q_log_std, z_f, p_mean_aligned, p_log_std_aligned, logdet),
    }
