"""WAV decoding, resampling, and downmixing.

Everything downstream operates on the canonical format: mono float samples
at 32000 Hz (the operating rate of the generation model the corpus feeds).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import CorruptStream, InvalidRate, UnsupportedFormat

CANONICAL_RATE = 32000


@dataclass(frozen=True)
class AudioBuffer:
    """Decoded PCM audio: shape (channels, frames), samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    source_path: str = ""

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[np.newaxis, :]
        if s.ndim != 2:
            raise ValueError("samples must be 1-D or (channels, frames)")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_seconds(self) -> float:
        return self.frames / self.sample_rate

    @property
    def mono(self) -> np.ndarray:
        """1-D view for mono buffers."""
        if self.channels != 1:
            raise ValueError("buffer is not mono")
        return self.samples[0]


def supported_formats() -> tuple[str, ...]:
    return ("wav",)


def _read_chunks(data: bytes):
    """Yield (chunk_id, payload) from a RIFF body; tolerate a truncated tail."""
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        payload = data[pos + 8 : pos + 8 + size]
        yield cid, payload
        pos += 8 + size + (size & 1)


def decode_audio(path) -> AudioBuffer:
    """Decode a RIFF WAV file (PCM 16/24/32-bit or float32) to an AudioBuffer.

    Integer PCM is rescaled by 2^(bits-1); no clipping is applied afterwards.
    """
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptStream(f"not a RIFF/WAVE stream: {path}")

    fmt = None
    payload = None
    for cid, chunk in _read_chunks(data):
        if cid == b"fmt " and fmt is None:
            if len(chunk) < 16:
                raise CorruptStream(f"truncated fmt chunk: {path}")
            fmt = struct.unpack_from("<HHIIHH", chunk, 0)
        elif cid == b"data" and payload is None:
            payload = chunk
    if fmt is None or payload is None:
        raise CorruptStream(f"missing fmt or data chunk: {path}")

    audio_format, channels, rate, _, block_align, bits = fmt
    if channels < 1 or rate <= 0:
        raise CorruptStream(f"bad fmt fields: {path}")

    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2")
        x = raw.astype(np.float64) / 32768.0
    elif audio_format == 1 and bits == 24:
        usable = len(payload) // 3 * 3
        b = np.frombuffer(payload[:usable], dtype=np.uint8).reshape(-1, 3)
        raw = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        raw = (raw << 8) >> 8  # sign-extend
        x = raw.astype(np.float64) / 8388608.0
    elif audio_format == 1 and bits == 32:
        raw = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<i4")
        x = raw.astype(np.float64) / 2147483648.0
    elif audio_format == 3 and bits == 32:
        x = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedFormat(
            f"format code {audio_format} / {bits}-bit not supported: {path}"
        )

    frames = len(x) // channels
    if frames == 0:
        raise CorruptStream(f"empty data payload: {path}")
    x = x[: frames * channels].reshape(frames, channels).T
    return AudioBuffer(samples=x, sample_rate=int(rate), source_path=path)


def write_wav(buffer: AudioBuffer, path) -> str:
    """Write a buffer as 16-bit PCM WAV. Returns the path written."""
    path = str(path)
    x = np.clip(buffer.samples, -1.0, 1.0)
    pcm = np.round(x.T * 32767.0).astype("<i2")  # interleave: (frames, channels)
    payload = pcm.tobytes()
    channels = buffer.channels
    rate = int(buffer.sample_rate)
    block_align = channels * 2
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    fmt = struct.pack("<4sIHHIIHH", b"fmt ", 16, 1, channels, rate,
                      rate * block_align, block_align, 16)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(fmt)
        fh.write(b"data" + struct.pack("<I", len(payload)))
        fh.write(payload)
    return path


def _design_kernel(up: int, down: int) -> np.ndarray:
    # Windowed-sinc lowpass at the upsampled rate; >= 64 taps per phase.
    half_len = 32 * max(up, down)
    cutoff = 1.0 / max(up, down)
    # resample_poly scales array windows by `up` itself, so plain unity-gain
    # lowpass taps are correct here.
    return sps.firwin(2 * half_len + 1, cutoff, window=("kaiser", 8.0))


def resample(buffer: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited polyphase resampling to target_rate."""
    if target_rate is None or int(target_rate) <= 0:
        raise InvalidRate(f"target_rate must be positive, got {target_rate}")
    target_rate = int(target_rate)
    if target_rate == buffer.sample_rate:
        return buffer
    g = math.gcd(target_rate, buffer.sample_rate)
    up, down = target_rate // g, buffer.sample_rate // g
    kernel = _design_kernel(up, down)
    out = sps.resample_poly(buffer.samples, up, down, axis=1, window=kernel)
    return AudioBuffer(samples=out, sample_rate=target_rate,
                       source_path=buffer.source_path)


def downmix_mono(buffer: AudioBuffer) -> AudioBuffer:
    """Average all channels to one. Identity for mono input."""
    if buffer.channels == 1:
        return buffer
    mixed = buffer.samples.mean(axis=0, keepdims=True)
    return AudioBuffer(samples=mixed, sample_rate=buffer.sample_rate,
                       source_path=buffer.source_path)


def to_canonical(buffer: AudioBuffer) -> AudioBuffer:
    """Mono, 32000 Hz: the format every downstream module assumes."""
    return resample(downmix_mono(buffer), CANONICAL_RATE)
