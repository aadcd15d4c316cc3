"""Inference handle bundling the generator, frozen encoder, and run metadata."""

from __future__ import annotations

import numpy as np
import torch

from .config import TrainConfig
from .corpus import EpisodeTuple
from .errors import UntrainedModelError
from .features import extract_features
from .generator import Generator, sample_gaussian
from .speakers import FrozenSpeakerEncoder
from .text import Alphabet

HOP = 256


def build_generator(config: TrainConfig, vocab_size: int) -> Generator:
    return Generator(
        vocab_size=vocab_size,
        latent_dim=config.latent_dim,
        flow_layers=config.flow_layers,
        flow_hidden=config.flow_hidden,
        text_hidden=config.text_hidden,
        text_layers=config.text_layers,
        posterior_hidden=config.posterior_hidden,
        decoder_channels=config.decoder_channels,
        duration_hidden=config.duration_hidden,
    )


class TtsModel:
    """Generator + frozen speaker encoder, read-only after load.

    Inference calls are safe to run concurrently as long as each caller
    passes its own torch.Generator for noise.
    """

    def __init__(
        self,
        generator: Generator,
        frozen: FrozenSpeakerEncoder,
        alphabet: Alphabet,
        config: TrainConfig,
        step: int = 0,
        training_speakers: frozenset[str] = frozenset(),
        paired_manifest_path: str | None = None,
    ):
        self.generator = generator
        self.frozen = frozen
        self.alphabet = alphabet
        self.config = config
        self.step = step
        self.training_speakers = frozenset(training_speakers)
        self.paired_manifest_path = paired_manifest_path

    def speaker_embedding(self, wave: np.ndarray) -> torch.Tensor:
        """Projected 256-dim speaker embedding g of one waveform, [1 x 256]."""
        mel = torch.from_numpy(extract_features(wave).mel)[None]
        return self.generator.projection(self.frozen(mel))

    def reference_embedding(self, wave: np.ndarray) -> torch.Tensor:
        """Utterance-level duration-reference embedding g_d, [1 x 256]."""
        mel = torch.from_numpy(extract_features(wave).mel)[None]
        return self.generator.reference_encoder(mel)

    def synthesize(
        self,
        text: str | list[int],
        ref_wave: np.ndarray,
        noise_scale: float | None = None,
        generator: torch.Generator | None = None,
        return_durations: bool = False,
    ):
        """Text + reference audio -> waveform through the prior/inverse-flow path.

        Output length is exactly 256 * sum(predicted durations); pass
        return_durations=True to also get the per-token frame counts.
        """
        if self.step == 0:
            raise UntrainedModelError("model has no training steps; synthesize refused")
        if noise_scale is None:
            noise_scale = self.config.noise_scale
        tokens = self.alphabet.tokenize(text) if isinstance(text, str) else list(text)
        gen = self.generator
        was_training = gen.training
        gen.eval()
        try:
            with torch.no_grad():
                g = self.speaker_embedding(ref_wave)
                g_d = self.reference_embedding(ref_wave)
                ids = torch.tensor(tokens, dtype=torch.long)[None]
                hidden, p_mean, p_log_std = gen.text_encoder(ids)
                log_dur = gen.duration(hidden, g, g_d)
                durations = torch.ceil(torch.exp(log_dur)).long().clamp(min=1)[0]
                p_mean = torch.repeat_interleave(p_mean[0], durations, dim=1)[None]
                p_log_std = torch.repeat_interleave(p_log_std[0], durations, dim=1)[None]
                z_f = sample_gaussian(p_mean, p_log_std, generator, noise_scale)
                z_v = gen.flow.inverse(z_f, g)
                wave = gen.decoder(z_v)[0]
        finally:
            gen.train(was_training)
        if return_durations:
            return wave.numpy(), durations.numpy()
        return wave.numpy()

    def generate_query(
        self, z_v_s: torch.Tensor, g_s: torch.Tensor, g_q: torch.Tensor
    ) -> torch.Tensor:
        """Decode support latents under the query speaker (flow swap path).

        z_v_s is [B x D x T]; returns [B x 256*T] waveforms.
        """
        gen = self.generator
        z_f, _ = gen.flow(z_v_s, g_s)
        return gen.decoder(gen.flow.inverse(z_f, g_q))

    def generate_query_from_episode(
        self,
        episode: EpisodeTuple,
        generator: torch.Generator | None = None,
    ) -> np.ndarray:
        """Eq.-style speaker swap for one episode: support content, query voice."""
        gen = self.generator
        was_training = gen.training
        gen.eval()
        try:
            with torch.no_grad():
                feats = extract_features(episode.y_t_s)
                linear = torch.from_numpy(feats.linear)[None]
                q_mean, q_log_std = gen.posterior(linear)
                z_v = sample_gaussian(q_mean, q_log_std, generator)
                g_s = self.speaker_embedding(episode.y_t_s)
                g_q = self.speaker_embedding(episode.y_u_q)
                wave = self.generate_query(z_v, g_s, g_q)[0]
        finally:
            gen.train(was_training)
        return wave.numpy()
