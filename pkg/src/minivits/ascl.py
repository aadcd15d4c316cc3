"""Speaker-consistency adversary and its least-squares objectives.

The discriminator scores (waveform, speaker-embedding) pairs: six strided,
grouped 1-D convolutions (kernel 4, stride 2) with leaky ReLU, a projected
copy of the embedding added to each layer's input, and a kernel-3 post conv
producing a per-timestep score map. Real pairs are pushed toward 1 and
generated pairs toward 0; query-speaker terms carry weight alpha.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .errors import TooShortError
from .speakers import EMBED_DIM

ALPHA = 0.3
LEAKY_SLOPE = 0.1

_CHANNELS = (16, 64, 128, 256, 256, 256)
_GROUPS = (1, 4, 4, 8, 8, 8)
_KERNEL = 4
_STRIDE = 2
_PAD = 1
# With kernel 4 / stride 2 / pad 1 each layer maps L -> floor(L / 2), so six
# layers give floor(L / 64); the post conv (kernel 3, pad 1) keeps length.
MIN_INPUT_SAMPLES = 2 ** 6


def score_map_length(n_samples: int) -> int:
    """Score-map length for an input of n_samples (floor chain of the stack)."""
    length = n_samples
    for _ in _CHANNELS:
        length = (length + 2 * _PAD - _KERNEL) // _STRIDE + 1
    return length


class SpeakerConsistencyDiscriminator(nn.Module):
    """Scores whether a waveform matches a speaker embedding, per timestep."""

    def __init__(self):
        super().__init__()
        convs = []
        conds = []
        in_ch = 1
        for out_ch, groups in zip(_CHANNELS, _GROUPS):
            convs.append(
                nn.Conv1d(in_ch, out_ch, _KERNEL, stride=_STRIDE, padding=_PAD, groups=groups)
            )
            conds.append(nn.Linear(EMBED_DIM, in_ch))
            in_ch = out_ch
        self.convs = nn.ModuleList(convs)
        self.conds = nn.ModuleList(conds)
        self.post = nn.Conv1d(in_ch, 1, 3, padding=1)

    def forward(self, wave: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        """[B x N] waveform + [B x 256] embedding -> [B x floor(N/64)] scores."""
        if wave.shape[-1] < MIN_INPUT_SAMPLES:
            raise TooShortError(
                f"discriminator needs >= {MIN_INPUT_SAMPLES} samples, got {wave.shape[-1]}"
            )
        h = wave.unsqueeze(1)
        for conv, cond in zip(self.convs, self.conds):
            h = h + cond(g).unsqueeze(-1)
            h = F.leaky_relu(conv(h), LEAKY_SLOPE)
        return self.post(h).squeeze(1)


def stop_gradient(z: torch.Tensor) -> torch.Tensor:
    """Value-identical tensor carrying no gradient to its producers."""
    return z.detach()


def discriminator_loss(
    s_real_q: torch.Tensor,
    s_real_s: torch.Tensor,
    s_fake_q: torch.Tensor,
    s_fake_s: torch.Tensor,
    alpha: float = ALPHA,
) -> torch.Tensor:
    """Least-squares loss pushing real pairs to 1 and generated pairs to 0.

    Each term is the mean over its score map; query terms weigh alpha.
    Callers must detach the generated waveforms for the discriminator step.
    """
    return (
        alpha * torch.mean((s_real_q - 1.0) ** 2)
        + torch.mean((s_real_s - 1.0) ** 2)
        + alpha * torch.mean(s_fake_q**2)
        + torch.mean(s_fake_s**2)
    )


def generator_loss(
    s_fake_q: torch.Tensor,
    s_fake_s: torch.Tensor,
    alpha: float = ALPHA,
) -> torch.Tensor:
    """Least-squares loss pushing generated pairs toward the real target 1."""
    return alpha * torch.mean((s_fake_q - 1.0) ** 2) + torch.mean((s_fake_s - 1.0) ** 2)
