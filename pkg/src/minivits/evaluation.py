"""Objective evaluation: speaker-embedding cosine similarity and zero-shot reports."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .corpus import AudioCache, load_manifest
from .errors import SeenSpeakerWarning, UntrainedModelError
from .features import extract_features
from .model import TtsModel
from .speakers import FrozenSpeakerEncoder

REPORT_HEADER = "utterance_id,reference_speaker,secs_to_reference,secs_to_support"

_DEFAULT_ENCODER: FrozenSpeakerEncoder | None = None


def default_encoder() -> FrozenSpeakerEncoder:
    global _DEFAULT_ENCODER
    if _DEFAULT_ENCODER is None:
        _DEFAULT_ENCODER = FrozenSpeakerEncoder.load_default()
    return _DEFAULT_ENCODER


def secs(wave_a: np.ndarray, wave_b: np.ndarray, encoder=None) -> float:
    """Cosine similarity of the two waveforms' raw speaker embeddings.

    The encoder is pluggable: any callable log-mel [80 x T] -> 512-vector.
    Result lies in [-1, 1].
    """
    embed = encoder if encoder is not None else default_encoder().embed_raw
    if isinstance(embed, FrozenSpeakerEncoder):
        embed = embed.embed_raw
    e_a = np.asarray(embed(extract_features(wave_a).mel), dtype=np.float64)
    e_b = np.asarray(embed(extract_features(wave_b).mel), dtype=np.float64)
    return float(np.dot(e_a, e_b) / (np.linalg.norm(e_a) * np.linalg.norm(e_b)))


@dataclass(frozen=True)
class SecsRow:
    utterance_id: str
    reference_speaker: str
    secs_to_reference: float
    secs_to_support: float


@dataclass(frozen=True)
class SecsReport:
    rows: list[SecsRow]
    summary: dict

    def write(self, out_dir: str | Path, render_figure: bool = True) -> Path:
        """Write report.csv + summary.json (+ figure) under out_dir."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "secs_report.csv"
        with csv_path.open("w", encoding="utf-8") as fh:
            fh.write(REPORT_HEADER + "\n")
            for row in self.rows:
                fh.write(
                    f"{row.utterance_id},{row.reference_speaker},"
                    f"{row.secs_to_reference!r},{row.secs_to_support!r}\n"
                )
        (out_dir / "secs_summary.json").write_text(
            json.dumps(self.summary, indent=2) + "\n", encoding="utf-8"
        )
        if render_figure and self.rows:
            from .plotting import render_secs_figure

            render_secs_figure(self, out_dir / "secs_report.png")
        return csv_path


def _summary_stats(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "std": None}
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std())}


def evaluate_zero_shot(
    model: TtsModel,
    eval_manifest_path: str | Path,
    texts: list[str],
    seed: int = 0,
    support_manifest_path: str | Path | None = None,
    encoder=None,
) -> SecsReport:
    """Synthesize every (text, reference) pair and score speaker similarity.

    secs_to_reference compares each synthesized sample against its reference
    utterance; secs_to_support compares the same sample against a rotating
    control utterance from the training (paired) corpus. References whose
    speakers appeared in training are flagged in the summary and warned
    about, not rejected.
    """
    if model.step == 0:
        raise UntrainedModelError("refusing to evaluate an untrained checkpoint")
    eval_manifest = load_manifest(eval_manifest_path, "untranscribed")
    if support_manifest_path is None:
        support_manifest_path = model.paired_manifest_path
    if support_manifest_path is None:
        raise ValueError("no support manifest available for control similarities")
    support_manifest = load_manifest(support_manifest_path, "paired")

    seen = sorted(eval_manifest.speakers() & model.training_speakers)
    if seen:
        warnings.warn(
            f"evaluation references reuse training speakers: {seen}", SeenSpeakerWarning
        )

    cache = AudioCache()
    noise = torch.Generator().manual_seed(seed)
    rows: list[SecsRow] = []
    for t_idx, text in enumerate(texts):
        for ref in eval_manifest.entries:
            ref_wave = cache.load(ref)
            generated = model.synthesize(text, ref_wave, generator=noise)
            control = support_manifest.entries[len(rows) % len(support_manifest.entries)]
            rows.append(
                SecsRow(
                    utterance_id=f"{ref.audio_path.stem}-t{t_idx:02d}",
                    reference_speaker=ref.speaker_id,
                    secs_to_reference=secs(generated, ref_wave, encoder),
                    secs_to_support=secs(generated, cache.load(control), encoder),
                )
            )

    summary = {
        "rows": len(rows),
        "secs_to_reference": _summary_stats([r.secs_to_reference for r in rows]),
        "secs_to_support": _summary_stats([r.secs_to_support for r in rows]),
        "seen_speakers": seen,
    }
    return SecsReport(rows=rows, summary=summary)
