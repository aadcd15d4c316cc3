"""Corpus manifests and episodic sampling.

A manifest is a JSON-lines file: one object per line with keys `audio`
(path), `speaker` (string), `sr` (int) and, for paired corpora only, `text`.
Training episodes pair one paired-corpus utterance (the support: text +
audio) with one untranscribed utterance (the query: audio only) drawn from a
disjoint speaker pool.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import SAMPLE_RATE, read_wav, resample
from .errors import (
    EmptyCorpusError,
    EmptyManifestError,
    MissingFileError,
    SchemaError,
)
from .text import Alphabet


@dataclass(frozen=True)
class ManifestEntry:
    audio_path: Path
    speaker_id: str
    sample_rate: int
    text: str | None = None


@dataclass(frozen=True)
class CorpusManifest:
    """Validated listing of utterances of one kind (paired or untranscribed)."""

    kind: str  # "paired" | "untranscribed"
    entries: list[ManifestEntry]
    path: Path | None = None

    def speakers(self) -> set[str]:
        return {e.speaker_id for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)


def load_manifest(path: str | Path, kind: str) -> CorpusManifest:
    """Load and validate a JSON-lines manifest of the given kind.

    Checks the line schema, the kind's text contract, and that every
    referenced audio file exists. Entry order is file order.
    """
    if kind not in ("paired", "untranscribed"):
        raise ValueError(f"unknown manifest kind: {kind!r}")
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"manifest not found: {path}")

    entries: list[ManifestEntry] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise SchemaError(f"{path}:{lineno}: expected a JSON object")
        for key in ("audio", "speaker", "sr"):
            if key not in obj:
                raise SchemaError(f"{path}:{lineno}: missing key {key!r}")
        if not obj["speaker"]:
            raise SchemaError(f"{path}:{lineno}: empty speaker id")
        if kind == "paired":
            if not obj.get("text"):
                raise SchemaError(f"{path}:{lineno}: paired entry needs non-empty text")
        elif "text" in obj:
            raise SchemaError(f"{path}:{lineno}: untranscribed entry carries text")
        audio_path = Path(obj["audio"])
        if not audio_path.is_absolute():
            audio_path = path.parent / audio_path
        if not audio_path.exists():
            raise MissingFileError(f"{path}:{lineno}: audio missing: {audio_path}")
        entries.append(
            ManifestEntry(
                audio_path=audio_path,
                speaker_id=str(obj["speaker"]),
                sample_rate=int(obj["sr"]),
                text=obj.get("text"),
            )
        )
    if not entries:
        raise EmptyManifestError(f"manifest has no entries: {path}")
    return CorpusManifest(kind=kind, entries=entries, path=path)


def assert_disjoint_speakers(paired: CorpusManifest, untranscribed: CorpusManifest) -> None:
    """Raise SpeakerOverlapError unless the speaker-id sets are disjoint."""
    from .errors import SpeakerOverlapError

    overlap = paired.speakers() & untranscribed.speakers()
    if overlap:
        raise SpeakerOverlapError(overlap)


@dataclass(frozen=True)
class EpisodeTuple:
    """One training draw: support text/audio plus a query-speaker waveform."""

    x_t: list[int]
    y_t_s: np.ndarray
    y_u_q: np.ndarray
    support_speaker: str
    query_speaker: str
    support_text: str = ""
    support_path: Path | None = None
    query_path: Path | None = None


class AudioCache:
    """Lazy waveform loader; resamples everything to 24 kHz on first read."""

    def __init__(self):
        self._waves: dict[Path, np.ndarray] = {}

    def load(self, entry: ManifestEntry) -> np.ndarray:
        wave = self._waves.get(entry.audio_path)
        if wave is None:
            wave, sr = read_wav(entry.audio_path)
            if sr != entry.sample_rate:
                raise SchemaError(
                    f"{entry.audio_path}: file rate {sr} != manifest rate {entry.sample_rate}"
                )
            if sr != SAMPLE_RATE:
                wave = resample(wave, sr, SAMPLE_RATE)
            self._waves[entry.audio_path] = wave
        return wave


@dataclass
class EpisodeSampler:
    """Uniform i.i.d. episode draws from a validated corpus pair.

    Single-owner: callers must not share one sampler across threads. The
    stream is fully determined by the generator state.
    """

    paired: CorpusManifest
    untranscribed: CorpusManifest
    alphabet: Alphabet
    rng: np.random.Generator
    cache: AudioCache = field(default_factory=AudioCache)

    def __post_init__(self):
        assert_disjoint_speakers(self.paired, self.untranscribed)
        if not self.paired.entries or not self.untranscribed.entries:
            raise EmptyCorpusError("both corpora must be non-empty for sampling")

    def sample(self) -> EpisodeTuple:
        sup = self.paired.entries[int(self.rng.integers(len(self.paired.entries)))]
        qry = self.untranscribed.entries[
            int(self.rng.integers(len(self.untranscribed.entries)))
        ]
        assert sup.speaker_id != qry.speaker_id, "disjointness violated"
        return EpisodeTuple(
            x_t=self.alphabet.tokenize(sup.text),
            y_t_s=self.cache.load(sup),
            y_u_q=self.cache.load(qry),
            support_speaker=sup.speaker_id,
            query_speaker=qry.speaker_id,
            support_text=sup.text,
            support_path=sup.audio_path,
            query_path=qry.audio_path,
        )


def sample_episode(
    rng: np.random.Generator,
    paired: CorpusManifest,
    untranscribed: CorpusManifest,
    alphabet: Alphabet,
    cache: AudioCache | None = None,
) -> EpisodeTuple:
    """One uniform episode draw; deterministic given the generator state."""
    sampler = EpisodeSampler(
        paired=paired,
        untranscribed=untranscribed,
        alphabet=alphabet,
        rng=rng,
        cache=cache or AudioCache(),
    )
    return sampler.sample()
