"""Speaker-conditioned invertible flow over latent frame sequences.

A stack of affine coupling steps, each followed by a channel flip. The
coupling network's final conv is zero-initialized so the whole flow starts
as the identity (with an even number of steps the flips cancel). Scales are
tanh-bounded for a stable inverse, and every step reports its exact
log-determinant.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import OddChannelsError
from .speakers import EMBED_DIM

MAX_LOG_SCALE = 2.0


class AffineCoupling(nn.Module):
    """Transforms the second channel half conditioned on the first and on g."""

    def __init__(self, channels: int, hidden: int, kernel_size: int = 5):
        super().__init__()
        if channels % 2:
            raise OddChannelsError(f"coupling needs even channels, got {channels}")
        self.half = channels // 2
        pad = kernel_size // 2
        self.pre = nn.Conv1d(self.half, hidden, 1)
        self.cond = nn.Linear(EMBED_DIM, hidden)
        self.mid = nn.Conv1d(hidden, hidden, kernel_size, padding=pad)
        self.post = nn.Conv1d(hidden, channels, kernel_size, padding=pad)
        self.post.weight.data.zero_()
        self.post.bias.data.zero_()

    def _stats(self, x0: torch.Tensor, g: torch.Tensor):
        h = self.pre(x0) + self.cond(g).unsqueeze(-1)
        h = torch.relu(self.mid(torch.relu(h)))
        stats = self.post(h)
        shift, raw_scale = stats[:, : self.half], stats[:, self.half :]
        log_scale = MAX_LOG_SCALE * torch.tanh(raw_scale)
        return shift, log_scale

    def forward(self, x: torch.Tensor, g: torch.Tensor):
        x0, x1 = x[:, : self.half], x[:, self.half :]
        shift, log_scale = self._stats(x0, g)
        y1 = shift + x1 * torch.exp(log_scale)
        logdet = log_scale.sum(dim=(1, 2))
        return torch.cat([x0, y1], dim=1), logdet

    def inverse(self, y: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        y0, y1 = y[:, : self.half], y[:, self.half :]
        shift, log_scale = self._stats(y0, g)
        x1 = (y1 - shift) * torch.exp(-log_scale)
        return torch.cat([y0, x1], dim=1)


class SpeakerFlow(nn.Module):
    """Composition of (coupling, channel flip) steps with tracked log-det.

    Inputs are [B x D x T] latents plus a [B x 256] speaker embedding
    broadcast globally over time.
    """

    def __init__(self, channels: int, n_layers: int = 4, hidden: int = 64):
        super().__init__()
        if channels % 2:
            raise OddChannelsError(f"flow needs even channels, got {channels}")
        self.channels = channels
        self.couplings = nn.ModuleList(
            AffineCoupling(channels, hidden) for _ in range(n_layers)
        )

    def forward(self, z: torch.Tensor, g: torch.Tensor):
        """z_v -> z_f; returns (z_f, logdet per batch item)."""
        logdet = z.new_zeros(z.shape[0])
        for coupling in self.couplings:
            z, ld = coupling(z, g)
            z = torch.flip(z, dims=[1])
            logdet = logdet + ld
        return z, logdet

    def inverse(self, z_f: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        """Exact layer-by-layer inverse of forward."""
        for coupling in reversed(self.couplings):
            z_f = torch.flip(z_f, dims=[1])
            z_f = coupling.inverse(z_f, g)
        return z_f
