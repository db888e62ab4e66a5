"""Shared synthesis helpers for the test suite."""

import numpy as np
import pytest

from corpus_forge.audio_io import AudioBuffer, CANONICAL_RATE


def tone(freq=440.0, seconds=2.0, amplitude=0.5, rate=CANONICAL_RATE):
    t = np.arange(int(rate * seconds)) / rate
    return AudioBuffer(amplitude * np.sin(2 * np.pi * freq * t), rate)


def click_track(bpm, seconds=20.0, rate=CANONICAL_RATE):
    """Short 2 kHz bursts every beat."""
    n = int(rate * seconds)
    sig = np.zeros(n)
    burst = np.sin(2 * np.pi * 2000.0 * np.arange(160) / rate) * np.hanning(160)
    for ti in np.arange(0.0, seconds, 60.0 / bpm):
        i = int(ti * rate)
        m = max(0, min(160, n - i))
        sig[i : i + m] += burst[:m]
    return AudioBuffer(sig, rate)


MAJOR_STEPS = (0, 2, 4, 5, 7, 9, 11, 12)
MINOR_STEPS = (0, 2, 3, 5, 7, 8, 10, 12)


def scale_buffer(tonic, mode, rate=CANONICAL_RATE, note_seconds=0.25):
    """One-octave scale, tonic doubled at start and octave end."""
    steps = MAJOR_STEPS if mode == "major" else MINOR_STEPS
    parts = []
    for step in steps:
        midi = 60 + tonic + step
        freq = 440.0 * 2 ** ((midi - 69) / 12)
        t = np.arange(int(rate * note_seconds)) / rate
        env = np.minimum(1.0, np.minimum(t / 0.01, (note_seconds - t) / 0.01))
        parts.append(0.5 * np.sin(2 * np.pi * freq * t) * env)
    return AudioBuffer(np.concatenate(parts), rate)


def step_track(seconds=25.0, step_at=14.0, low=0.05, factor=10.0,
               freq=330.0, rate=CANONICAL_RATE):
    t = np.arange(int(rate * seconds)) / rate
    x = low * np.sin(2 * np.pi * freq * t)
    x[int(step_at * rate):] *= factor
    return AudioBuffer(x, rate)


def random_step_track(seed, rate=CANONICAL_RATE, min_s=12.0, max_s=300.0):
    """Piecewise constant/ramp amplitude track for segmentation properties."""
    rng = np.random.default_rng(seed)
    dur = float(np.exp(rng.uniform(np.log(min_s), np.log(max_s))))
    n = int(dur * rate)
    n_seg = int(rng.integers(1, 8))
    edges = np.sort(rng.integers(0, n, n_seg - 1)) if n_seg > 1 else np.array([], dtype=int)
    edges = np.concatenate([[0], edges, [n]])
    parts = []
    for a, b in zip(edges[:-1], edges[1:]):
        amp = rng.uniform(0.01, 0.9)
        if rng.random() < 0.3 and b > a + 1:
            parts.append(np.linspace(amp, rng.uniform(0.01, 0.9), b - a))
        else:
            parts.append(np.full(b - a, amp))
    return AudioBuffer(np.concatenate(parts), rate)
