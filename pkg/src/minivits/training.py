"""Episodic training loop: alternating discriminator and generator updates.

Per step, for a batch of episodes: embed support/query speakers, run the
posterior/flow/alignment path on the full support utterance, decode short
waveform slices for the reconstruction and adversarial terms, update the
discriminator on detached fakes, then update the generator on
reconstruction + KL + duration + adversarial losses. All randomness flows
through two owned generators (numpy for data, torch for model noise) whose
states ride along in checkpoints, so identically seeded runs and resumed
runs reproduce exactly.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import ascl
from .align import gaussian_loglik_matrix, mas_align, path_durations
from .config import TrainConfig
from .corpus import (
    CorpusManifest,
    EpisodeSampler,
    EpisodeTuple,
    assert_disjoint_speakers,
    load_manifest,
)
from .errors import NonFiniteLossError
from .features import extract_features, mel_spectrogram_torch
from .generator import duration_loss, kl_loss, reconstruction_loss, sample_gaussian
from .model import HOP, TtsModel, build_generator
from .speakers import FrozenSpeakerEncoder
from .text import Alphabet

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1

METRICS_HEADER = "step,d_loss,g_ascl,recon,kl,duration,wall_ms"


@dataclass(frozen=True)
class StepRecord:
    step: int
    d_loss: float
    g_ascl: float
    recon: float
    kl: float
    duration: float
    wall_ms: float

    def csv_row(self) -> str:
        return ",".join(
            [
                str(self.step),
                repr(self.d_loss),
                repr(self.g_ascl),
                repr(self.recon),
                repr(self.kl),
                repr(self.duration),
                repr(self.wall_ms),
            ]
        )


@dataclass
class _EpisodeForward:
    """Per-episode tensors produced by the full-utterance pass."""

    g_s: torch.Tensor
    g_q: torch.Tensor
    kl: torch.Tensor
    dur: torch.Tensor
    z_v_slice: torch.Tensor
    z_f_slice: torch.Tensor
    real_s_slice: torch.Tensor
    real_q_slice: torch.Tensor


class Trainer:
    """Owns all mutable training state; single-threaded by contract."""

    _ARCH_FIELDS = (
        "latent_dim",
        "flow_layers",
        "flow_hidden",
        "text_hidden",
        "text_layers",
        "posterior_hidden",
        "decoder_channels",
        "duration_hidden",
    )

    def __init__(
        self,
        config: TrainConfig,
        paired: CorpusManifest,
        untranscribed: CorpusManifest,
        alphabet: Alphabet | None = None,
        resume_from: str | Path | None = None,
    ):
        assert_disjoint_speakers(paired, untranscribed)
        self.config = config
        self.paired = paired
        self.untranscribed = untranscribed

        if resume_from is not None:
            payload = load_checkpoint_payload(resume_from)
            stored = TrainConfig.from_dict(payload["config"])
            for name in self._ARCH_FIELDS:
                if getattr(stored, name) != getattr(config, name):
                    from .errors import SchemaError

                    raise SchemaError(
                        f"resume config changes model field {name!r}: "
                        f"{getattr(stored, name)} -> {getattr(config, name)}"
                    )
            self.alphabet = Alphabet(payload["alphabet"])
        else:
            payload = None
            if alphabet is not None:
                self.alphabet = alphabet
            elif paired.path is not None:
                self.alphabet = Alphabet.load(paired.path.parent / "alphabet.txt")
            else:
                raise ValueError("no alphabet given and paired manifest has no path")

        torch.manual_seed(self.config.seed)
        self.frozen = FrozenSpeakerEncoder.load_default()
        self.generator = build_generator(self.config, self.alphabet.size)
        self.discriminator = ascl.SpeakerConsistencyDiscriminator()

        betas = (0.8, 0.99)
        self.opt_g = torch.optim.Adam(
            [p for p in self.generator.parameters() if p.requires_grad],
            lr=self.config.lr_g,
            betas=betas,
        )
        self.opt_d = torch.optim.Adam(
            self.discriminator.parameters(), lr=self.config.lr_d, betas=betas
        )
        self.sched_g = torch.optim.lr_scheduler.ExponentialLR(
            self.opt_g, gamma=self.config.lr_decay
        )
        self.sched_d = torch.optim.lr_scheduler.ExponentialLR(
            self.opt_d, gamma=self.config.lr_decay
        )

        self.data_rng = np.random.default_rng(self.config.seed)
        self.noise_rng = torch.Generator().manual_seed(self.config.seed + 1)
        self.step = 0

        if payload is not None:
            self.generator.load_state_dict(payload["generator"])
            self.discriminator.load_state_dict(payload["discriminator"])
            self.opt_g.load_state_dict(payload["opt_g"])
            self.opt_d.load_state_dict(payload["opt_d"])
            self.sched_g.load_state_dict(payload["sched_g"])
            self.sched_d.load_state_dict(payload["sched_d"])
            self.data_rng.bit_generator.state = payload["np_rng"]
            self.noise_rng.set_state(payload["torch_rng"])
            self.step = payload["step"]

        self.sampler = EpisodeSampler(
            paired=paired,
            untranscribed=untranscribed,
            alphabet=self.alphabet,
            rng=self.data_rng,
        )
        self.frozen_checksum = self.frozen.checksum()

    # --- single-episode forward ------------------------------------------------

    def _batch_slice_width(self, episodes: list[EpisodeTuple]) -> int:
        """Common decode-slice width so per-episode tensors stack cleanly."""
        width = self.config.slice_frames
        for ep in episodes:
            width = min(width, len(ep.y_t_s) // HOP + 1, len(ep.y_u_q) // HOP)
        if width < 1:
            from .errors import TooShortError

            raise TooShortError("an episode waveform is shorter than one frame slice")
        return width

    def _episode_forward(self, episode: EpisodeTuple, width: int) -> _EpisodeForward:
        gen = self.generator

        feats = extract_features(episode.y_t_s)
        linear = torch.from_numpy(feats.linear)[None]
        mel_s = torch.from_numpy(feats.mel)[None]
        mel_q = torch.from_numpy(extract_features(episode.y_u_q).mel)[None]

        g_s = gen.projection(self.frozen(mel_s))
        g_q = gen.projection(self.frozen(mel_q))
        g_d = gen.reference_encoder(mel_s)

        q_mean, q_log_std = gen.posterior(linear)
        z_v = sample_gaussian(q_mean, q_log_std, self.noise_rng)
        z_f, logdet = gen.flow(z_v, g_s)

        tokens = torch.tensor(episode.x_t, dtype=torch.long)[None]
        hidden, p_mean, p_log_std = gen.text_encoder(tokens)

        loglik = gaussian_loglik_matrix(
            z_f.detach()[0].numpy(),
            p_mean.detach()[0].numpy(),
            p_log_std.detach()[0].numpy(),
        )
        path = mas_align(loglik)
        durations = path_durations(path, len(episode.x_t))
        idx = torch.from_numpy(path)
        kl = kl_loss(
            z_v,
            q_mean,
            q_log_std,
            z_f,
            p_mean[:, :, idx],
            p_log_std[:, :, idx],
            logdet,
        )

        log_dur = gen.duration(hidden, g_s, g_d)
        dur = duration_loss(log_dur[0], torch.from_numpy(durations))

        t_frames = z_v.shape[-1]
        offset = int(self.data_rng.integers(0, t_frames - width + 1))
        q_offset = int(self.data_rng.integers(0, len(episode.y_u_q) - width * HOP + 1))
        real_s = episode.y_t_s[offset * HOP : offset * HOP + width * HOP]
        if real_s.size < width * HOP:  # last hop of the final frame may overrun
            real_s = np.pad(real_s, (0, width * HOP - real_s.size))
        real_q = episode.y_u_q[q_offset : q_offset + width * HOP]

        return _EpisodeForward(
            g_s=g_s,
            g_q=g_q,
            kl=kl,
            dur=dur,
            z_v_slice=z_v[:, :, offset : offset + width],
            z_f_slice=z_f[:, :, offset : offset + width],
            real_s_slice=torch.from_numpy(real_s.copy())[None],
            real_q_slice=torch.from_numpy(real_q.copy())[None],
        )

    # --- one optimization step ---------------------------------------------------

    def train_step(self, episodes: list[EpisodeTuple]) -> StepRecord:
        cfg = self.config
        gen = self.generator
        t0 = time.perf_counter() if cfg.wall_clock else 0.0

        width = self._batch_slice_width(episodes)
        forwards = [self._episode_forward(ep, width) for ep in episodes]
        g_s = torch.cat([f.g_s for f in forwards])
        g_q = torch.cat([f.g_q for f in forwards])
        z_v_slice = torch.cat([f.z_v_slice for f in forwards])
        z_f_slice = torch.cat([f.z_f_slice for f in forwards])
        real_s = torch.cat([f.real_s_slice for f in forwards])
        real_q = torch.cat([f.real_q_slice for f in forwards])

        kl = torch.stack([f.kl for f in forwards]).mean()
        dur = torch.stack([f.dur for f in forwards]).mean()

        # reconstruction path: autoencode the support slice with full gradients
        y_hat_s = gen.decoder(z_v_slice)
        mel_hat = mel_spectrogram_torch(y_hat_s)
        with torch.no_grad():
            mel_ref = mel_spectrogram_torch(real_s)
        recon = cfg.recon_weight * reconstruction_loss(mel_hat, mel_ref)

        use_ascl = cfg.ascl_weight > 0
        if use_ascl:
            # adversarial fakes: gradients gated off the posterior/text path
            fake_q = gen.decoder(gen.flow.inverse(ascl.stop_gradient(z_f_slice), g_q))
            fake_s = gen.decoder(ascl.stop_gradient(z_v_slice))

            waves_d = torch.cat([real_q, real_s, fake_q.detach(), fake_s.detach()])
            embeds_d = torch.cat([g_q, g_s, g_q, g_s]).detach()
            scores = self.discriminator(waves_d, embeds_d)
            n = len(episodes)
            d_loss = ascl.discriminator_loss(
                scores[:n], scores[n : 2 * n], scores[2 * n : 3 * n], scores[3 * n :],
                alpha=cfg.alpha,
            )
            self.opt_d.zero_grad()
            d_loss.backward()
            self.opt_d.step()

            scores_g = self.discriminator(
                torch.cat([fake_q, fake_s]), torch.cat([g_q, g_s])
            )
            g_ascl = ascl.generator_loss(scores_g[:n], scores_g[n:], alpha=cfg.alpha)
        else:
            d_loss = torch.zeros(())
            g_ascl = torch.zeros(())

        total = (
            recon
            + cfg.kl_weight * kl
            + cfg.duration_weight * dur
            + cfg.ascl_weight * g_ascl
        )
        components = {
            "d_loss": float(d_loss),
            "g_ascl": float(g_ascl),
            "recon": float(recon),
            "kl": float(kl),
            "duration": float(dur),
        }
        if not all(np.isfinite(v) for v in components.values()):
            raise NonFiniteLossError(self.step + 1, components)

        self.opt_g.zero_grad()
        total.backward()
        self.opt_g.step()

        self.step += 1
        if self.step % cfg.lr_decay_every == 0:
            self.sched_g.step()
            self.sched_d.step()

        wall_ms = (time.perf_counter() - t0) * 1e3 if cfg.wall_clock else 0.0
        return StepRecord(step=self.step, wall_ms=wall_ms, **components)

    def next_batch(self) -> list[EpisodeTuple]:
        return [self.sampler.sample() for _ in range(self.config.batch_size)]

    # --- checkpointing -----------------------------------------------------------

    def save_checkpoint(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"ckpt_{self.step:06d}.pt"
        payload = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "step": self.step,
            "config": self.config.to_dict(),
            "generator": self.generator.state_dict(),
            "discriminator": self.discriminator.state_dict(),
            "opt_g": self.opt_g.state_dict(),
            "opt_d": self.opt_d.state_dict(),
            "sched_g": self.sched_g.state_dict(),
            "sched_d": self.sched_d.state_dict(),
            "np_rng": self.data_rng.bit_generator.state,
            "torch_rng": self.noise_rng.get_state(),
            "frozen_checksum": self.frozen_checksum,
            "training_speakers": sorted(
                self.paired.speakers() | self.untranscribed.speakers()
            ),
            "alphabet": self.alphabet.symbols,
            "paired_manifest": str(self.paired.path) if self.paired.path else None,
            "untranscribed_manifest": (
                str(self.untranscribed.path) if self.untranscribed.path else None
            ),
        }
        torch.save(payload, path)
        return path


def load_checkpoint_payload(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        from .errors import MissingFileError

        raise MissingFileError(f"checkpoint not found: {path}")
    payload = torch.load(path, weights_only=False)
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format: {payload.get('format_version')}")
    return payload


def load_model(path: str | Path) -> TtsModel:
    """Load a checkpoint into an inference-ready TtsModel."""
    payload = load_checkpoint_payload(path)
    config = TrainConfig.from_dict(payload["config"])
    alphabet = Alphabet(payload["alphabet"])
    generator = build_generator(config, alphabet.size)
    generator.load_state_dict(payload["generator"])
    generator.eval()
    return TtsModel(
        generator=generator,
        frozen=FrozenSpeakerEncoder.load_default(),
        alphabet=alphabet,
        config=config,
        step=payload["step"],
        training_speakers=frozenset(payload["training_speakers"]),
    )


def run_training(
    config: TrainConfig,
    paired_path: str | Path,
    untranscribed_path: str | Path,
    out_dir: str | Path,
    alphabet_path: str | Path | None = None,
    resume_from: str | Path | None = None,
    render_figure: bool = True,
) -> Path:
    """Train for config.steps, writing checkpoints, metrics CSV, and a figure.

    Returns the final checkpoint path. Resuming from a checkpoint continues
    the exact step stream of the uninterrupted run.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paired = load_manifest(paired_path, "paired")
    untranscribed = load_manifest(untranscribed_path, "untranscribed")
    alphabet = Alphabet.load(alphabet_path) if alphabet_path else None
    trainer = Trainer(config, paired, untranscribed, alphabet=alphabet, resume_from=resume_from)

    final_path = trainer.save_checkpoint(out_dir)
    metrics_path = out_dir / "metrics.csv"
    records: list[StepRecord] = []
    with metrics_path.open("w", encoding="utf-8") as metrics:
        metrics.write(METRICS_HEADER + "\n")
        metrics.flush()
        while trainer.step < trainer.config.steps:
            record = trainer.train_step(trainer.next_batch())
            records.append(record)
            metrics.write(record.csv_row() + "\n")
            metrics.flush()
            if trainer.config.log_every and record.step % trainer.config.log_every == 0:
                logger.info(
                    "step %d | d %.4f | ascl %.4f | recon %.4f | kl %.4f | dur %.4f",
                    record.step,
                    record.d_loss,
                    record.g_ascl,
                    record.recon,
                    record.kl,
                    record.duration,
                )
            at_checkpoint = (
                trainer.config.checkpoint_every
                and trainer.step % trainer.config.checkpoint_every == 0
            )
            if at_checkpoint or trainer.step == trainer.config.steps:
                final_path = trainer.save_checkpoint(out_dir)

    if render_figure and records:
        from .plotting import render_training_curves

        render_training_curves(metrics_path, out_dir / "metrics.png")
    return final_path
