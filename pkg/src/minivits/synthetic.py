"""Deterministic synthetic corpus: harmonic template speakers, token-driven content.

Each speaker is a fixed template (base pitch, three formant-like resonance
gains, spectral tilt, fixed harmonic phases). An utterance renders a token
sequence as a chain of short segments: most tokens are harmonic tones whose
pitch offset and duration depend on the token, a few are noise bursts
shaped by the speaker's envelope. Speaker identity therefore lives in the
spectral envelope and pitch region; content lives in the segment pattern.
Everything is a pure function of the spec seed, so regeneration is
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import SAMPLE_RATE, write_wav
from .text import Alphabet

ALPHABET_SYMBOLS = list("abcdefghijklmnop")
_NOISY_TOKENS = {14, 15, 16}  # 'n', 'o', 'p' render as shaped noise bursts
_FADE_S = 0.005
_PEAK = 0.65


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    n_paired_speakers: int
    n_untranscribed_speakers: int
    utterances_per_speaker: int
    seed: int = 0
    duration_s: float = 1.5
    tag: str = ""

    def __post_init__(self):
        if min(
            self.n_paired_speakers,
            self.n_untranscribed_speakers,
            self.utterances_per_speaker,
        ) < 1:
            raise ValueError("speaker and utterance counts must be positive")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")


@dataclass(frozen=True)
class SpeakerTemplate:
    f0: float
    formant_hz: np.ndarray
    formant_gain: np.ndarray
    formant_bw: np.ndarray
    tilt: float
    phases: np.ndarray  # fixed phase per harmonic index


def _draw_template(rng: np.random.Generator) -> SpeakerTemplate:
    return SpeakerTemplate(
        f0=float(rng.uniform(110.0, 260.0)),
        formant_hz=np.array(
            [
                rng.uniform(350.0, 900.0),
                rng.uniform(1100.0, 2500.0),
                rng.uniform(2800.0, 5000.0),
            ]
        ),
        formant_gain=rng.uniform(0.35, 1.0, size=3),
        formant_bw=rng.uniform(120.0, 320.0, size=3),
        tilt=float(rng.uniform(0.4, 1.1)),
        phases=rng.uniform(0.0, 2.0 * np.pi, size=64),
    )


def _envelope(template: SpeakerTemplate, freqs: np.ndarray) -> np.ndarray:
    env = np.full_like(freqs, 0.08, dtype=np.float64)
    for hz, gain, bw in zip(
        template.formant_hz, template.formant_gain, template.formant_bw
    ):
        env += gain * np.exp(-0.5 * ((freqs - hz) / bw) ** 2)
    return env


def _token_pitch(token: int) -> float:
    # quarter-tone ladder spanning roughly +/- 2 semitones around the base
    return 2.0 ** ((token - 8.5) / 48.0)


def _token_duration(token: int) -> float:
    return 0.09 + 0.006 * ((token * 7) % 8)


def _fade(segment: np.ndarray) -> np.ndarray:
    n_fade = min(int(_FADE_S * SAMPLE_RATE), segment.size // 2)
    if n_fade:
        ramp = 0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, n_fade))
        segment[:n_fade] *= ramp
        segment[-n_fade:] *= ramp[::-1]
    return segment


def _render_segment(
    template: SpeakerTemplate, token: int, noise_rng: np.random.Generator
) -> np.ndarray:
    n = int(_token_duration(token) * SAMPLE_RATE)
    if token in _NOISY_TOKENS:
        noise = noise_rng.normal(0.0, 1.0, size=n)
        spectrum = np.fft.rfft(noise)
        freqs = np.fft.rfftfreq(n, 1.0 / SAMPLE_RATE)
        shaped = np.fft.irfft(spectrum * _envelope(template, freqs), n=n)
        seg = 0.35 * shaped / (np.std(shaped) + 1e-9)
        return _fade(seg)

    f0 = template.f0 * _token_pitch(token)
    n_harm = min(template.phases.size, int(11_000.0 / f0))
    h = np.arange(1, n_harm + 1)
    amps = _envelope(template, h * f0) / h**template.tilt
    t = np.arange(n) / SAMPLE_RATE
    seg = np.sin(
        2.0 * np.pi * f0 * np.outer(h, t) + template.phases[:n_harm, None]
    ).T @ amps
    seg = seg / (np.std(seg) + 1e-9)
    return _fade(seg)


def render_utterance(
    template: SpeakerTemplate, tokens: list[int], noise_rng: np.random.Generator
) -> np.ndarray:
    """Token sequence -> waveform, peak-normalized with a tiny noise floor."""
    segments = [_render_segment(template, tok, noise_rng) for tok in tokens]
    wave = np.concatenate(segments)
    wave = wave + noise_rng.normal(0.0, 3e-3, size=wave.size)
    return (_PEAK * wave / np.max(np.abs(wave))).astype(np.float32)


def _draw_tokens(rng: np.random.Generator, duration_s: float) -> list[int]:
    target = max(4, round(duration_s / 0.111))
    count = int(rng.integers(max(4, target - 2), target + 3))
    return [int(t) for t in rng.integers(1, len(ALPHABET_SYMBOLS) + 1, size=count)]


def generate_corpus(spec: SyntheticCorpusSpec, out_dir: str | Path) -> dict[str, Path]:
    """Write WAVs, paired/untranscribed manifests, and the alphabet file.

    Returns {"paired": ..., "untranscribed": ..., "alphabet": ...} paths.
    Speaker ids P<tag>### and U<tag>### are disjoint by construction.
    """
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wavs"
    wav_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    alphabet = Alphabet(ALPHABET_SYMBOLS)

    def make_speakers(prefix: str, count: int):
        return {
            f"{prefix}{spec.tag}{i:03d}": _draw_template(rng) for i in range(count)
        }

    paired_speakers = make_speakers("P", spec.n_paired_speakers)
    query_speakers = make_speakers("U", spec.n_untranscribed_speakers)

    def write_set(speakers: dict[str, SpeakerTemplate], with_text: bool, manifest_name: str):
        lines = []
        for speaker_id, template in speakers.items():
            for u in range(spec.utterances_per_speaker):
                tokens = _draw_tokens(rng, spec.duration_s)
                wave = render_utterance(template, tokens, rng)
                wav_name = f"{speaker_id}_{u:03d}.wav"
                write_wav(wav_dir / wav_name, wave)
                entry = {
                    "audio": f"wavs/{wav_name}",
                    "speaker": speaker_id,
                    "sr": SAMPLE_RATE,
                }
                if with_text:
                    entry["text"] = "".join(
                        ALPHABET_SYMBOLS[t - 1] for t in tokens
                    )
                lines.append(json.dumps(entry, sort_keys=True))
        manifest_path = out_dir / manifest_name
        manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return manifest_path

    paired_path = write_set(paired_speakers, True, "paired.jsonl")
    untranscribed_path = write_set(query_speakers, False, "untranscribed.jsonl")
    alphabet_path = out_dir / "alphabet.txt"
    alphabet.save(alphabet_path)
    return {
        "paired": paired_path,
        "untranscribed": untranscribed_path,
        "alphabet": alphabet_path,
    }
