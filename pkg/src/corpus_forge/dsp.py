"""Deterministic signal-analysis kernels.

STFT, RMS energy envelope, novelty, chroma, tempo, and key estimation.
All functions are pure: identical inputs give bitwise-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .errors import InvalidFrameParams, SilentInput, TooShort

DEFAULT_FRAME = 2048
DEFAULT_HOP = 512

# Chroma frames below this RMS are treated as silence and kept as exact
# zero vectors so similarity code can skip them unambiguously.
VOICED_RMS_THRESHOLD = 1e-4

PITCH_CLASS_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")

# Krumhansl-Kessler probe-tone profiles, index 0 = tonic.
KK_MAJOR = np.array(
    [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88]
)
KK_MINOR = np.array(
    [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17]
)


@dataclass(frozen=True)
class Spectrogram:
    magnitudes: np.ndarray  # (frames, bins), nonnegative
    frame_size: int
    hop: int
    sample_rate: int

    @property
    def bins(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[0]


@dataclass(frozen=True)
class EnergyEnvelope:
    rms: np.ndarray
    hop_seconds: float


@dataclass(frozen=True)
class TempoEstimate:
    bpm: float
    confidence: float


@dataclass(frozen=True)
class KeyLabel:
    tonic: int  # pitch class, 0 = C
    mode: str   # "major" | "minor"

    @property
    def name(self) -> str:
        mode = "Major" if self.mode == "major" else "Minor"
        return f"{PITCH_CLASS_NAMES[self.tonic]} {mode}"

    @classmethod
    def parse(cls, text: str) -> "KeyLabel":
        """Parse names like 'B Minor', 'c# maj', 'Eb minor', 'C#/Db Min'."""
        parts = text.strip().split()
        if len(parts) < 2:
            raise ValueError(f"unparseable key name: {text!r}")
        tonic_txt = parts[0].split("/")[0]
        mode_txt = parts[-1].lower()
        if mode_txt.startswith("maj"):
            mode = "major"
        elif mode_txt.startswith("min"):
            mode = "minor"
        else:
            raise ValueError(f"unparseable mode in key name: {text!r}")
        base = tonic_txt[0].upper()
        if base not in PITCH_CLASS_NAMES:
            raise ValueError(f"unparseable tonic in key name: {text!r}")
        tonic = PITCH_CLASS_NAMES.index(base)
        for accidental in tonic_txt[1:]:
            if accidental in ("#", "♯"):
                tonic = (tonic + 1) % 12
            elif accidental in ("b", "♭"):
                tonic = (tonic - 1) % 12
            else:
                raise ValueError(f"unparseable tonic in key name: {text!r}")
        return cls(tonic=tonic, mode=mode)


def _frame_signal(x: np.ndarray, frame_size: int, hop: int) -> np.ndarray:
    """Pad the tail with zeros and return a (frames, frame_size) view-copy."""
    n = len(x)
    if n <= frame_size:
        n_frames = 1
    else:
        n_frames = 1 + int(np.ceil((n - frame_size) / hop))
    padded = np.zeros((n_frames - 1) * hop + frame_size)
    padded[:n] = x
    idx = np.arange(frame_size)[np.newaxis, :] + hop * np.arange(n_frames)[:, np.newaxis]
    return padded[idx]


def stft(buffer: AudioBuffer, frame_size: int = DEFAULT_FRAME,
         hop: int = DEFAULT_HOP) -> Spectrogram:
    """Hann-windowed magnitude spectrogram; frame t covers [t*hop, t*hop+frame)."""
    if frame_size <= 0 or frame_size & (frame_size - 1):
        raise InvalidFrameParams(f"frame_size must be a power of two, got {frame_size}")
    if not 0 < hop <= frame_size:
        raise InvalidFrameParams(f"hop must satisfy 0 < hop <= frame_size, got {hop}")
    frames = _frame_signal(buffer.mono, frame_size, hop)
    window = np.hanning(frame_size)
    mags = np.abs(np.fft.rfft(frames * window, axis=1))
    return Spectrogram(magnitudes=mags, frame_size=frame_size, hop=hop,
                       sample_rate=buffer.sample_rate)


def rms_energy(buffer: AudioBuffer, frame_seconds: float = 0.05,
               hop_seconds: float = 0.01) -> EnergyEnvelope:
    """Frame-wise RMS of the raw samples; length == ceil(frames / hop)."""
    x = buffer.mono
    rate = buffer.sample_rate
    hop = max(1, int(round(hop_seconds * rate)))
    frame = max(1, int(round(frame_seconds * rate)))
    n = len(x)
    n_env = int(np.ceil(n / hop))
    starts = hop * np.arange(n_env)
    counts = np.minimum(starts + frame, n) - starts
    x2 = np.square(x, dtype=np.float64)
    if frame % hop == 0:
        # Fast path: per-hop block sums instead of a sample-level cumsum.
        blocks = frame // hop
        padded = np.zeros(n_env * hop)
        padded[:n] = x2
        bsum = padded.reshape(n_env, hop).sum(axis=1)
        csum = np.concatenate(([0.0], np.cumsum(bsum)))
        ends_b = np.minimum(np.arange(n_env) + blocks, n_env)
        sums = csum[ends_b] - csum[np.arange(n_env)]
    else:
        csum = np.concatenate(([0.0], np.cumsum(x2)))
        sums = csum[np.minimum(starts + frame, n)] - csum[starts]
    rms = np.sqrt(sums / counts)
    return EnergyEnvelope(rms=rms, hop_seconds=hop / rate)


def novelty(envelope: EnergyEnvelope, smooth_seconds: float = 0.5) -> np.ndarray:
    """Absolute first difference of the moving-average-smoothed envelope.

    Both rises and falls count as boundaries (phrase onsets and offsets),
    hence |delta| rather than positive-only rectification. First frame is 0.
    """
    env = envelope.rms
    if env.size == 0:
        raise InvalidFrameParams("envelope is empty")
    w = max(1, int(round(smooth_seconds / envelope.hop_seconds)))
    # Edge-replicated smoothing: a constant envelope must stay constant,
    # otherwise zero padding manufactures boundaries at track edges.
    from scipy.ndimage import uniform_filter1d
    smoothed = uniform_filter1d(env, size=w, mode="nearest")
    out = np.empty_like(env)
    out[0] = 0.0
    out[1:] = np.abs(np.diff(smoothed))
    return out


def _chroma_bin_map(frame_size: int, sample_rate: int) -> tuple[np.ndarray, np.ndarray]:
    freqs = np.fft.rfftfreq(frame_size, d=1.0 / sample_rate)
    usable = freqs > 20.0
    pcs = np.zeros(len(freqs), dtype=np.int64)
    pcs[usable] = (np.round(12.0 * np.log2(freqs[usable] / 440.0)).astype(np.int64) + 9) % 12
    return usable, pcs


def chroma(buffer: AudioBuffer, frame_size: int = DEFAULT_FRAME,
           hop: int = DEFAULT_HOP) -> np.ndarray:
    """Per-frame 12-bin pitch-class energy profile, shape (frames, 12).

    Spectrogram bin energy accumulates into class (round(12*log2(f/440)) + 9)
    mod 12, so 440 Hz lands on A. Voiced frames (RMS above the silence
    threshold) are L2-normalized; silent frames are exact zero vectors.
    """
    spec = stft(buffer, frame_size=frame_size, hop=hop)
    usable, pcs = _chroma_bin_map(frame_size, buffer.sample_rate)
    energy = np.square(spec.magnitudes[:, usable])
    mat = np.zeros((spec.n_frames, 12))
    for pc in range(12):
        sel = pcs[usable] == pc
        if sel.any():
            mat[:, pc] = energy[:, sel].sum(axis=1)

    frames = _frame_signal(buffer.mono, frame_size, hop)
    frame_rms = np.sqrt(np.mean(np.square(frames), axis=1))
    voiced = frame_rms > VOICED_RMS_THRESHOLD
    norms = np.linalg.norm(mat, axis=1)
    ok = voiced & (norms > 0)
    mat[ok] /= norms[ok, np.newaxis]
    mat[~ok] = 0.0
    return mat


def mean_chroma(matrix: np.ndarray) -> np.ndarray:
    """Mean over voiced (nonzero) frames, L2-renormalized; all-silent -> zeros."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    voiced = np.linalg.norm(matrix, axis=1) > 0
    if not voiced.any():
        return np.zeros(12)
    mean = matrix[voiced].mean(axis=0)
    norm = np.linalg.norm(mean)
    return mean / norm if norm > 0 else np.zeros(12)


def onset_flux(buffer: AudioBuffer, frame_size: int = 1024,
               hop: int = 256) -> tuple[np.ndarray, float]:
    """Half-wave-rectified spectral flux and its frame rate (frames/s)."""
    spec = stft(buffer, frame_size=frame_size, hop=hop)
    mags = spec.magnitudes
    flux = np.zeros(mags.shape[0])
    if mags.shape[0] > 1:
        flux[1:] = np.maximum(mags[1:] - mags[:-1], 0.0).sum(axis=1)
    return flux, buffer.sample_rate / hop


def fold_bpm(bpm: float) -> float:
    """Fold a tempo into [60, 180) by octave doubling/halving."""
    while bpm < 60.0:
        bpm *= 2.0
    while bpm >= 180.0:
        bpm /= 2.0
    return bpm


def estimate_tempo(buffer: AudioBuffer) -> TempoEstimate:
    """Tempo from the autocorrelation of a spectral-flux onset curve.

    The dominant autocorrelation peak over periods of 0.2-2.0 s gives the
    beat period (parabolic interpolation for sub-frame precision); the BPM
    is octave-folded into [60, 180). Confidence is the peak's prominence
    over the median autocorrelation in the search range, clamped to [0, 1].
    """
    if buffer.duration_seconds < 5.0:
        raise TooShort(f"need >= 5 s for tempo, got {buffer.duration_seconds:.2f} s")
    flux, fps = onset_flux(buffer)
    f = flux - flux.mean()
    n = len(f)
    # FFT-based autocorrelation, biased estimator is fine for peak picking.
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(f, size)
    ac = np.fft.irfft(spec * np.conj(spec), size)[:n]
    if ac[0] <= 0:
        return TempoEstimate(bpm=120.0, confidence=0.0)
    ac = ac / ac[0]

    lo = max(1, int(np.floor(0.2 * fps)))
    hi = min(n - 2, int(np.ceil(2.0 * fps)))
    if hi <= lo:
        return TempoEstimate(bpm=120.0, confidence=0.0)
    search = ac[lo : hi + 1]
    # Local maxima in the search range; the beat period is the *smallest*
    # strong lag (longer multiples of the period score almost as high and
    # would otherwise win narrowly).
    interior = np.arange(1, len(search) - 1)
    is_peak = (search[interior] >= search[interior - 1]) & (
        search[interior] > search[interior + 1]
    )
    peaks = interior[is_peak]
    if peaks.size:
        strong = peaks[search[peaks] >= 0.8 * search[peaks].max()]
        k = lo + int(strong[0])
    else:
        k = lo + int(np.argmax(search))
    # Parabolic interpolation around the integer-lag peak.
    y0, y1, y2 = ac[k - 1], ac[k], ac[k + 1]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    lag = k + float(np.clip(shift, -0.5, 0.5))
    bpm = fold_bpm(60.0 * fps / lag)

    peak = float(ac[k])
    med = float(np.median(search))
    denom = 1.0 - med
    confidence = float(np.clip((peak - med) / denom, 0.0, 1.0)) if denom > 0 else 0.0
    return TempoEstimate(bpm=bpm, confidence=confidence)


def _correlate_templates() -> np.ndarray:
    # 24 rows: (tonic 0..11) x (major, minor), template rotated so that
    # row (t, mode)[k] == profile[(k - t) mod 12].
    rows = []
    for tonic in range(12):
        for profile in (KK_MAJOR, KK_MINOR):
            rows.append(np.roll(profile, tonic))
    return np.array(rows)


_TEMPLATES = _correlate_templates()


def estimate_key(vector: np.ndarray) -> KeyLabel:
    """Best Pearson correlation against the 24 rotated Krumhansl templates.

    Ties break toward the lower tonic index, then major before minor.
    """
    v = np.asarray(vector, dtype=np.float64)
    if v.shape != (12,):
        raise ValueError("chroma vector must have 12 entries")
    if not np.any(v):
        raise SilentInput("cannot estimate key of a zero chroma vector")
    vc = v - v.mean()
    vn = np.linalg.norm(vc)
    best = None
    best_r = -np.inf
    for tonic in range(12):
        for mode_idx, mode in enumerate(("major", "minor")):
            t = _TEMPLATES[tonic * 2 + mode_idx]
            tc = t - t.mean()
            denom = vn * np.linalg.norm(tc)
            r = float(vc @ tc / denom) if denom > 0 else 0.0
            if r > best_r:
                best_r = r
                best = KeyLabel(tonic=tonic, mode=mode)
    return best
