"""Energy-novelty track segmentation into 10-30 s clips."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .dsp import novelty, rms_energy
from .errors import TrackTooShort


@dataclass(frozen=True)
class ClipSpan:
    start_seconds: float
    end_seconds: float
    boundary_score: float  # novelty at the chosen cut; 0 for forced cuts

    @property
    def duration(self) -> float:
        return self.end_seconds - self.start_seconds


@dataclass(frozen=True)
class SegmenterConfig:
    min_clip_s: float = 10.0
    max_clip_s: float = 30.0
    frame_s: float = 0.05
    hop_s: float = 0.01
    smooth_s: float = 0.5
    threshold_k: float = 1.0
    drop_trailing_under_s: float = 10.0

    def __post_init__(self):
        if not 0 < self.min_clip_s < self.max_clip_s:
            raise ValueError("need 0 < min_clip_s < max_clip_s")
        if self.threshold_k < 0:
            raise ValueError("threshold_k must be >= 0")


def _candidate_boundaries(nov: np.ndarray, threshold: float) -> np.ndarray:
    """Indices of novelty local maxima strictly above the threshold."""
    if len(nov) < 3:
        return np.array([], dtype=np.int64)
    interior = np.arange(1, len(nov) - 1)
    is_peak = (nov[interior] >= nov[interior - 1]) & (nov[interior] > nov[interior + 1])
    peaks = interior[is_peak]
    return peaks[nov[peaks] > threshold]


def segment(buffer: AudioBuffer, config: SegmenterConfig | None = None) -> list[ClipSpan]:
    """Greedy left-to-right segmentation at energy-novelty boundaries.

    From the current cut position p, candidates are novelty local maxima
    exceeding mu + k*sigma (global statistics) within [p+min, p+max]; the
    highest-scoring one wins. With no candidate the cut is forced at p+max
    (score 0). A trailing remainder under drop_trailing_under_s is dropped;
    otherwise it becomes the final clip.
    """
    cfg = config or SegmenterConfig()
    duration = buffer.duration_seconds
    if duration < cfg.min_clip_s:
        raise TrackTooShort(f"track is {duration:.2f} s, need >= {cfg.min_clip_s} s")

    env = rms_energy(buffer, frame_seconds=cfg.frame_s, hop_seconds=cfg.hop_s)
    nov = novelty(env, smooth_seconds=cfg.smooth_s)
    # Boundary decisions are made on an amplitude-normalized novelty curve
    # quantized to 6 decimals: mathematically the positions are invariant
    # under scaling (mu, sigma, and novelty all scale together), and the
    # coarse quantization keeps that true in floating point too - rounding
    # noise turns near-ties into exact ties, which argmax resolves by
    # position. The 1e-6 floor suppresses numeric jitter on near-constant
    # signals.
    peak = float(env.rms.max(initial=0.0))
    nov_q = np.round(nov / peak, 6) if peak > 0 else nov
    threshold = max(round(nov_q.mean() + cfg.threshold_k * nov_q.std(), 6), 1e-6)
    candidates = _candidate_boundaries(nov_q, threshold)
    cand_times = candidates * env.hop_seconds
    cand_scores = nov[candidates]
    cand_qscores = nov_q[candidates]
    # Envelope frames whose analysis window runs past the end of the track
    # carry partial-window artifacts, and smoothing smears them up to a
    # window earlier; never cut inside that zone.
    keep = cand_times <= duration - (cfg.frame_s + cfg.smooth_s)
    cand_times = cand_times[keep]
    cand_scores = cand_scores[keep]
    cand_qscores = cand_qscores[keep]

    spans: list[ClipSpan] = []
    p = 0.0
    while duration - p >= cfg.min_clip_s:
        window_end = min(p + cfg.max_clip_s, duration)
        in_window = (cand_times >= p + cfg.min_clip_s) & (cand_times < window_end)
        if in_window.any():
            best = np.flatnonzero(in_window)[np.argmax(cand_qscores[in_window])]
            cut, score = float(cand_times[best]), float(cand_scores[best])
        elif duration - p > cfg.max_clip_s:
            cut, score = p + cfg.max_clip_s, 0.0
        else:
            cut, score = duration, 0.0
        spans.append(ClipSpan(start_seconds=p, end_seconds=cut, boundary_score=score))
        p = cut
        if p >= duration:
            break
    if duration - p >= cfg.drop_trailing_under_s and duration - p > 0:
        spans.append(ClipSpan(start_seconds=p, end_seconds=duration, boundary_score=0.0))
    return spans


def extract_clip(buffer: AudioBuffer, span: ClipSpan) -> AudioBuffer:
    """Slice the samples covered by a span (sample-accurate, no crossfade)."""
    a = int(round(span.start_seconds * buffer.sample_rate))
    b = int(round(span.end_seconds * buffer.sample_rate))
    return AudioBuffer(samples=buffer.samples[:, a:b],
                       sample_rate=buffer.sample_rate,
                       source_path=buffer.source_path)
