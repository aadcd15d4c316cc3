"""Speaker embeddings: frozen utterance encoder, projection head, reference encoder.

The frozen encoder is a lightweight stand-in with the contract the rest of
the system depends on: deterministic, 512-dim output, mean-pooled over time,
weights load-only. Its weights ship as a versioned blob under ``assets/``
with a recorded checksum; :class:`FrozenSpeakerEncoder` refuses corrupted
blobs. Any callable mapping a log-mel [80 x T] to a 512-vector can be
dropped in instead (see :func:`minivits.evaluation.secs`).
"""

from __future__ import annotations

import hashlib
from importlib import resources
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import TooShortError

RAW_DIM = 512
EMBED_DIM = 256
MIN_FRAMES = 4

FROZEN_BLOB = "frozen_encoder_v1.npz"
FROZEN_SEED = 711
# sha256 of the shipped blob; verified on every load.
FROZEN_BLOB_SHA256 = "99681e10d965ecd2cbacbb06ddf14e8d4fb0adb60a166f171e0fd21c241806d1"

_CONV1 = (128, 80, 3)
_CONV2 = (128, 128, 3)


def _generate_frozen_weights(seed: int = FROZEN_SEED) -> dict[str, np.ndarray]:
    """Deterministic stand-in weights; He-scaled gaussians from one PCG64 stream."""
    rng = np.random.default_rng(seed)

    def conv(shape):
        fan_in = shape[1] * shape[2]
        return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(np.float32)

    return {
        "conv1.weight": conv(_CONV1),
        "conv1.bias": np.zeros(_CONV1[0], dtype=np.float32),
        "conv2.weight": conv(_CONV2),
        "conv2.bias": np.zeros(_CONV2[0], dtype=np.float32),
        "proj.weight": rng.normal(0.0, np.sqrt(1.0 / 128), size=(RAW_DIM, 128)).astype(
            np.float32
        ),
        "proj.bias": np.zeros(RAW_DIM, dtype=np.float32),
    }


def write_frozen_blob(path: str | Path, seed: int = FROZEN_SEED) -> str:
    """Serialize the stand-in weights; returns the blob's sha256 hex digest."""
    path = Path(path)
    weights = _generate_frozen_weights(seed)
    with path.open("wb") as fh:
        np.savez(fh, **weights)
    return hashlib.sha256(path.read_bytes()).hexdigest()


class FrozenSpeakerEncoder(nn.Module):
    """Stand-in utterance encoder: two convs over log-mel, time mean pool, linear.

    Parameters are load-only; every tensor has requires_grad False and the
    module stays in eval mode.
    """

    def __init__(self, weights: dict[str, np.ndarray]):
        super().__init__()
        self.conv1 = nn.Conv1d(80, 128, kernel_size=3, padding=1)
        self.conv2 = nn.Conv1d(128, 128, kernel_size=3, padding=1)
        self.proj = nn.Linear(128, RAW_DIM)
        state = {k: torch.from_numpy(v.copy()) for k, v in weights.items()}
        self.load_state_dict(state)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    @classmethod
    def load_default(cls) -> "FrozenSpeakerEncoder":
        """Load the shipped blob, verifying its recorded checksum."""
        blob = resources.files("minivits").joinpath("assets", FROZEN_BLOB)
        data = blob.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        if digest != FROZEN_BLOB_SHA256:
            raise RuntimeError(
                f"frozen encoder blob checksum mismatch: {digest} != {FROZEN_BLOB_SHA256}"
            )
        import io

        arrays = np.load(io.BytesIO(data))
        return cls({k: arrays[k] for k in arrays.files})

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        """[B x 80 x T] log-mel -> [B x 512] raw embedding; T >= 4 required."""
        if mel.shape[-1] < MIN_FRAMES:
            raise TooShortError(f"need >= {MIN_FRAMES} mel frames, got {mel.shape[-1]}")
        with torch.no_grad():
            h = torch.relu(self.conv1(mel))
            h = torch.relu(self.conv2(h))
            pooled = h.mean(dim=-1)
            return self.proj(pooled)

    def embed_raw(self, mel: np.ndarray) -> np.ndarray:
        """Numpy convenience wrapper for a single [80 x T] mel."""
        out = self.forward(torch.from_numpy(np.asarray(mel, dtype=np.float32))[None])
        return out[0].numpy()

    def checksum(self) -> str:
        """sha256 over all parameter bytes in state-dict order."""
        h = hashlib.sha256()
        for key, tensor in sorted(self.state_dict().items()):
            h.update(key.encode())
            h.update(tensor.numpy().tobytes())
        return h.hexdigest()


class ProjectionHead(nn.Module):
    """Trainable 512 -> 256 head: linear, ReLU, linear."""

    def __init__(self):
        super().__init__()
        self.fc1 = nn.Linear(RAW_DIM, EMBED_DIM)
        self.fc2 = nn.Linear(EMBED_DIM, EMBED_DIM)

    def forward(self, raw: torch.Tensor) -> torch.Tensor:
        return self.fc2(torch.relu(self.fc1(raw)))


class ReferenceEncoder(nn.Module):
    """Utterance-level reference embedding for duration conditioning.

    Style-token-flavored at desk scale: three strided 2-D convs over the
    mel, a GRU summarizing time, a linear to 256.
    """

    def __init__(self, hidden: int = 128):
        super().__init__()
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(1, 16, kernel_size=3, stride=2, padding=1),
                nn.Conv2d(16, 32, kernel_size=3, stride=2, padding=1),
                nn.Conv2d(32, 64, kernel_size=3, stride=2, padding=1),
            ]
        )
        # mel axis: 80 -> 40 -> 20 -> 10
        self.gru = nn.GRU(64 * 10, hidden, batch_first=True)
        self.out = nn.Linear(hidden, EMBED_DIM)

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        """[B x 80 x T] log-mel -> [B x 256]; T >= 4 required."""
        if mel.shape[-1] < MIN_FRAMES:
            raise TooShortError(f"need >= {MIN_FRAMES} mel frames, got {mel.shape[-1]}")
        h = mel.unsqueeze(1)
        for conv in self.convs:
            h = torch.relu(conv(h))
        b, c, f, t = h.shape
        h = h.permute(0, 3, 1, 2).reshape(b, t, c * f)
        _, last = self.gru(h)
        return self.out(last[0])
