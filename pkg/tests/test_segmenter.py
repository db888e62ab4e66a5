"""Segmentation tests: duration bounds, tiling, invariances."""

import numpy as np
import pytest

from corpus_forge.audio_io import AudioBuffer, CANONICAL_RATE
from corpus_forge.errors import TrackTooShort
from corpus_forge.segmenter import (ClipSpan, SegmenterConfig, extract_clip,
                                    segment)

from conftest import random_step_track, step_track, tone


def test_constant_tone_forced_cuts():
    spans = segment(tone(freq=220.0, seconds=60.0, amplitude=0.4))
    assert len(spans) == 2
    assert spans[0].start_seconds == 0.0
    assert spans[0].end_seconds == 30.0
    assert spans[1].end_seconds == pytest.approx(60.0, abs=1e-6)
    assert spans[0].boundary_score == 0.0
    assert spans[1].boundary_score == 0.0


def test_step_track_boundary_near_step():
    spans = segment(step_track(seconds=25.0, step_at=14.0))
    assert len(spans) == 2
    assert abs(spans[0].end_seconds - 14.0) <= 0.5
    assert spans[0].boundary_score > 0


def test_too_short_track():
    with pytest.raises(TrackTooShort):
        segment(tone(seconds=8.0))


def test_spans_tile_track():
    for seed in (1, 2, 3):
        buf = random_step_track(seed)
        spans = segment(buf)
        assert spans[0].start_seconds == 0.0
        for a, b in zip(spans[:-1], spans[1:]):
            assert a.end_seconds == b.start_seconds
        for s in spans:
            assert 10.0 - 1e-6 <= s.duration <= 30.0 + 1e-6
        # tail either reaches the end or the dropped remainder is < 10 s
        tail = buf.duration_seconds - spans[-1].end_seconds
        assert tail < 10.0


def test_amplitude_scale_invariance():
    for seed in (5, 6, 7, 8):
        buf = random_step_track(seed)
        base = [(s.start_seconds, s.end_seconds) for s in segment(buf)]
        for c in (0.1, 10.0):
            scaled = AudioBuffer(buf.mono * c, buf.sample_rate)
            got = [(s.start_seconds, s.end_seconds) for s in segment(scaled)]
            assert got == base


def test_determinism():
    buf = random_step_track(11)
    assert segment(buf) == segment(buf)


def test_time_shift_equivariance():
    # Strong boundary at 14 s; an 8 s silent lead-in (shorter than the
    # minimum clip) shifts it by 8 s within a couple of hops.
    buf = step_track(seconds=25.0, step_at=14.0)
    pad = np.zeros(8 * CANONICAL_RATE)
    shifted = AudioBuffer(np.concatenate([pad, buf.mono]), CANONICAL_RATE)
    b0 = segment(buf)[0].end_seconds
    b1 = segment(shifted)[0].end_seconds
    assert abs(b1 - (b0 + 8.0)) <= 0.05


def test_trailing_remainder_dropped_vs_kept():
    # 38 s constant tone: [0,30) then an 8 s tail, dropped (< 10 s).
    spans = segment(tone(seconds=38.0, amplitude=0.4))
    assert [(s.start_seconds, round(s.end_seconds, 6)) for s in spans] == [(0.0, 30.0)]
    # 41 s: the 11 s tail survives as the final clip.
    spans = segment(tone(seconds=41.0, amplitude=0.4))
    assert len(spans) == 2
    assert spans[1].duration == pytest.approx(11.0, abs=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        SegmenterConfig(min_clip_s=30.0, max_clip_s=10.0)
    with pytest.raises(ValueError):
        SegmenterConfig(threshold_k=-1.0)


def test_custom_bounds():
    cfg = SegmenterConfig(min_clip_s=5.0, max_clip_s=12.0,
                          drop_trailing_under_s=5.0)
    spans = segment(tone(seconds=40.0, amplitude=0.4), cfg)
    for s in spans:
        assert s.duration <= 12.0 + 1e-6


def test_extract_clip_sample_accurate():
    buf = tone(seconds=30.0)
    clip = extract_clip(buf, ClipSpan(10.0, 20.0, 0.0))
    assert clip.frames == 10 * CANONICAL_RATE
    np.testing.assert_array_equal(
        clip.mono, buf.mono[10 * CANONICAL_RATE: 20 * CANONICAL_RATE])
