"""Vocal/instrumental separation by spectral median filtering.

A model-free separator usable as a real (if modest) `separate` backend:
per frequency bin, magnitudes that persist over time (the median level)
are attributed to the instrumental bed, while energy rising above that
stationary level — transient, broadband activity such as speech — goes to
the vocal stem. Soft Wiener-style masks keep the two stems summing to
approximately the input.
"""

from __future__ import annotations

import os
import wave

import numpy as np

FRAME = 1024
HOP = 256


def read_wav_mono(path: str) -> tuple[np.ndarray, int]:
    with wave.open(path, "rb") as wf:
        channels = wf.getnchannels()
        width = wf.getsampwidth()
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    if width != 2:
        raise ValueError(f"only 16-bit PCM supported, got {8 * width}-bit")
    x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if channels > 1:
        x = x.reshape(-1, channels).mean(axis=1)
    return x, rate


def write_wav_mono(path: str, x: np.ndarray, rate: int) -> None:
    pcm = np.round(np.clip(x, -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(path, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(pcm.tobytes())


def _stft(x: np.ndarray) -> np.ndarray:
    n = len(x)
    n_frames = max(1, 1 + (n - 1) // HOP)
    padded = np.zeros((n_frames - 1) * HOP + FRAME)
    padded[:n] = x
    idx = np.arange(FRAME)[None, :] + HOP * np.arange(n_frames)[:, None]
    return np.fft.rfft(padded[idx] * np.hanning(FRAME), axis=1)


def _istft(spec: np.ndarray, length: int) -> np.ndarray:
    window = np.hanning(FRAME)
    frames = np.fft.irfft(spec, FRAME, axis=1) * window
    total = (len(frames) - 1) * HOP + FRAME
    out = np.zeros(total)
    norm = np.zeros(total)
    for t, frame in enumerate(frames):
        out[t * HOP: t * HOP + FRAME] += frame
        norm[t * HOP: t * HOP + FRAME] += window ** 2
    out[norm > 1e-12] /= norm[norm > 1e-12]
    return out[:length]


def separate(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (vocal, instrumental) estimates of the same length as x."""
    spec = _stft(x)
    mag = np.abs(spec)
    stationary_level = np.median(mag, axis=0, keepdims=True)
    instrumental_mag = np.minimum(mag, stationary_level)
    vocal_mag = mag - instrumental_mag
    eps = 1e-12
    power = instrumental_mag ** 2 + vocal_mag ** 2 + eps
    inst = _istft(spec * (instrumental_mag ** 2 / power), len(x))
    vocal = _istft(spec * (vocal_mag ** 2 / power), len(x))
    return vocal, inst


def separate_file(audio_path: str, output_dir: str | None = None) -> dict:
    x, rate = read_wav_mono(audio_path)
    vocal, inst = separate(x)
    out_dir = output_dir or os.path.dirname(audio_path) or "."
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.splitext(os.path.basename(audio_path))[0]
    vocal_path = os.path.join(out_dir, base + ".vocal.wav")
    inst_path = os.path.join(out_dir, base + ".instrumental.wav")
    write_wav_mono(vocal_path, vocal, rate)
    write_wav_mono(inst_path, inst, rate)
    return {"vocal": vocal_path, "instrumental": inst_path}
