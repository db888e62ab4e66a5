"""Instrument labeling: sidecar metadata first, spectral heuristic second.

Scraped sidecar labels are treated as ground truth when present (mirroring
the pipeline's precedence rule); otherwise a coarse tonal/percussive
heuristic produces a best-effort single label so the task never returns
garbage silently — callers can always distinguish "no sidecar" results by
the heuristic's limited vocabulary.
"""

from __future__ import annotations

ALIASES = {
    "daf": "Daaf",
    "daap": "Daaf",
    "guitar": "Acoustic Guitar",
    "tombak": "Tonbak",
    "zarb": "Tonbak",
    "santoor": "Santur",
    "santour": "Santur",
    "kamanche": "Kamancheh",
    "synth": "Synthesizer",
}

CANONICAL = (
    "Synthesizer", "Piano", "Ney", "Acoustic Guitar", "Bass", "Drums",
    "Daaf", "Kamancheh", "Tonbak", "Setar", "Santur", "Tar",
)


def normalize(name: str) -> str:
    low = name.strip().lower()
    for canonical in CANONICAL:
        if low == canonical.lower():
            return canonical
    return ALIASES.get(low, name.strip())


def labels_for(sidecar: dict | None, audio_path: str | None = None) -> list[str]:
    sidecar = sidecar or {}
    listed = sidecar.get("instruments")
    if listed:
        return [normalize(str(n)) for n in listed]
    if audio_path:
        label = _heuristic_label(audio_path)
        if label:
            return [label]
    return []


def _heuristic_label(audio_path: str) -> str | None:
    try:
        import numpy as np
        from .separation import read_wav_mono
        x, rate = read_wav_mono(audio_path)
    except Exception:
        return None
    if not len(x) or not np.any(x):
        return None
    spec = np.abs(np.fft.rfft(x[: min(len(x), rate * 10)]))
    freqs = np.fft.rfftfreq(min(len(x), rate * 10), d=1.0 / rate)
    power = np.square(spec)
    total = power.sum()
    if total <= 0:
        return None
    centroid = float((freqs * power).sum() / total)
    # Spectral flatness separates tonal from noisy/percussive content.
    flatness = float(np.exp(np.mean(np.log(spec + 1e-12))) / (spec.mean() + 1e-12))
    if flatness > 0.3:
        return "Drums"
    return "Bass" if centroid < 300.0 else "Synthesizer"
