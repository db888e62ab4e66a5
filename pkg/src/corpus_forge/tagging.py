"""Categorical tagging: tempo/energy buckets, key, instruments, passthrough."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .audio_io import AudioBuffer
from .dsp import (EnergyEnvelope, KeyLabel, TempoEstimate, chroma, estimate_key,
                  estimate_tempo, mean_chroma, rms_energy)
from .errors import AdapterError, OutOfRange

TEMPO_CLASSES = ("Slow", "Moderate", "Upbeat", "Fast")
ENERGY_CLASSES = ("Low", "Moderate", "High")

# Canonical instrument vocabulary; adapter outputs are normalized onto it
# case-insensitively, unknown names pass through verbatim.
INSTRUMENT_VOCAB = (
    "Synthesizer", "Piano", "Ney", "Acoustic Guitar", "Bass", "Drums",
    "Daaf", "Kamancheh", "Tonbak", "Setar", "Santur", "Tar",
)
_INSTRUMENT_ALIASES = {
    "daf": "Daaf",
    "guitar": "Acoustic Guitar",
    "tombak": "Tonbak",
    "santoor": "Santur",
}


@dataclass(frozen=True)
class TempoThresholds:
    slow_below: float = 90.0
    moderate_below: float = 125.0
    upbeat_below: float = 145.0


@dataclass(frozen=True)
class EnergyThresholds:
    low_below_dbfs: float = -30.0
    high_above_dbfs: float = -12.0


@dataclass
class TagSet:
    tempo_class: str
    energy_class: str
    key: KeyLabel | None = None
    instruments: tuple[str, ...] = ()
    genre: str | None = None
    mood: str | None = None
    artist: str | None = None
    happiness: int | None = None
    popularity: int | None = None
    complete: bool = True  # False when the instrument adapter was unavailable


def normalize_instrument(name: str) -> str:
    """Map onto the canonical vocabulary case-insensitively; else verbatim."""
    low = name.strip().lower()
    for canonical in INSTRUMENT_VOCAB:
        if low == canonical.lower():
            return canonical
    return _INSTRUMENT_ALIASES.get(low, name.strip())


def bucket_tempo(estimate: TempoEstimate,
                 thresholds: TempoThresholds | None = None) -> str:
    """Slow < 90 <= Moderate < 125 <= Upbeat < 145 <= Fast (half-open)."""
    th = thresholds or TempoThresholds()
    bpm = estimate.bpm
    if not 60.0 <= bpm < 180.0:
        raise OutOfRange(f"bpm {bpm} outside the folded range [60, 180)")
    if bpm < th.slow_below:
        return "Slow"
    if bpm < th.moderate_below:
        return "Moderate"
    if bpm < th.upbeat_below:
        return "Upbeat"
    return "Fast"


def mean_rms_dbfs(envelope: EnergyEnvelope) -> float:
    """Mean RMS in dBFS; silence gives -inf."""
    m = float(envelope.rms.mean())
    return 20.0 * math.log10(m) if m > 0 else float("-inf")


def bucket_energy(envelope: EnergyEnvelope,
                  thresholds: EnergyThresholds | None = None) -> str:
    th = thresholds or EnergyThresholds()
    db = mean_rms_dbfs(envelope)
    if db < th.low_below_dbfs:
        return "Low"
    if db > th.high_above_dbfs:
        return "High"
    return "Moderate"


def instrument_task_for_genre(genre: str | None) -> str:
    """Route to the traditional-instrument model when the genre says so."""
    if genre and "traditional" in genre.lower():
        return "instruments_traditional"
    return "instruments_general"


def tag_clip(buffer: AudioBuffer, sidecar: dict | None = None,
             adapter=None, clip_path: str | None = None,
             tempo_thresholds: TempoThresholds | None = None,
             energy_thresholds: EnergyThresholds | None = None) -> TagSet:
    """Build the full TagSet for one canonical-format clip.

    Sidecar labels override computed ones (key, genre); passthrough fields
    are copied verbatim and never invented. Instrument tags come from the
    adapter, routed by genre; an unavailable adapter leaves the instrument
    set empty and flags the TagSet incomplete rather than failing the clip.
    """
    sidecar = sidecar or {}
    tempo_class = bucket_tempo(estimate_tempo(buffer), tempo_thresholds)
    envelope = rms_energy(buffer)
    energy_class = bucket_energy(envelope, energy_thresholds)

    key: KeyLabel | None = None
    if sidecar.get("key"):
        key = KeyLabel.parse(sidecar["key"])
    else:
        vec = mean_chroma(chroma(buffer))
        if vec.any():
            key = estimate_key(vec)

    genre = sidecar.get("genre")
    instruments: tuple[str, ...] = ()
    complete = True
    if adapter is not None:
        from .adapter import call
        task = instrument_task_for_genre(genre)
        try:
            result = call(adapter, task, {
                "audio_path": clip_path or buffer.source_path,
                "sidecar": sidecar,
            })
            instruments = tuple(normalize_instrument(n)
                                for n in result.get("instruments", []))
        except AdapterError:
            complete = False
    else:
        complete = False

    return TagSet(
        tempo_class=tempo_class,
        energy_class=energy_class,
        key=key,
        instruments=instruments,
        genre=genre,
        mood=sidecar.get("mood"),
        artist=sidecar.get("artist"),
        happiness=sidecar.get("happiness"),
        popularity=sidecar.get("popularity"),
        complete=complete,
    )
