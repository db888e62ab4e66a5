"""Signal-analysis kernel tests: STFT, RMS, novelty, chroma, tempo, key."""

import numpy as np
import pytest

from corpus_forge.audio_io import AudioBuffer, CANONICAL_RATE
from corpus_forge.dsp import (EnergyEnvelope, KeyLabel, chroma, estimate_key,
                              estimate_tempo, fold_bpm, mean_chroma, novelty,
                              rms_energy, stft)
from corpus_forge.errors import (InvalidFrameParams, SilentInput, TooShort)

from conftest import click_track, scale_buffer, tone

PC = {"C": 0, "C#": 1, "D": 2, "D#": 3, "E": 4, "F": 5, "F#": 6,
      "G": 7, "G#": 8, "A": 9, "A#": 10, "B": 11}


# --- STFT ---

def test_stft_sine_bin():
    buf = tone(freq=1000.0, seconds=1.0)
    spec = stft(buf)
    expected_bin = round(1000 * spec.frame_size / buf.sample_rate)
    # Skip the zero-padded tail frame.
    for frame in spec.magnitudes[:-1]:
        assert np.argmax(frame) == expected_bin
    assert spec.bins == spec.frame_size // 2 + 1


def test_stft_zeros():
    buf = AudioBuffer(np.zeros(8000), CANONICAL_RATE)
    assert not np.any(stft(buf).magnitudes)


def test_stft_nonnegative_and_finite():
    rng = np.random.default_rng(0)
    spec = stft(AudioBuffer(rng.normal(0, 0.2, 16000), CANONICAL_RATE))
    assert np.all(spec.magnitudes >= 0)
    assert np.all(np.isfinite(spec.magnitudes))


def test_stft_parseval():
    # Non-overlapping frames on white noise: window-compensated spectral
    # energy matches raw sample energy within 1%.
    rng = np.random.default_rng(42)
    n = CANONICAL_RATE * 10
    x = rng.normal(0, 0.1, n)
    frame = 2048
    spec = stft(AudioBuffer(x, CANONICAL_RATE), frame_size=frame, hop=frame)
    m2 = np.square(spec.magnitudes)
    per_frame = (m2[:, 0] + 2 * m2[:, 1:-1].sum(axis=1) + m2[:, -1]) / frame
    window_power = np.mean(np.square(np.hanning(frame)))
    compensated = per_frame.sum() / window_power / frame
    direct = np.mean(np.square(x)) * (per_frame.size)
    assert abs(compensated / direct - 1.0) < 0.01


def test_stft_rejects_bad_params():
    buf = tone(seconds=0.2)
    with pytest.raises(InvalidFrameParams):
        stft(buf, frame_size=1000)
    with pytest.raises(InvalidFrameParams):
        stft(buf, frame_size=1024, hop=0)
    with pytest.raises(InvalidFrameParams):
        stft(buf, frame_size=1024, hop=2048)


# --- RMS envelope ---

def test_rms_constant():
    buf = AudioBuffer(np.full(CANONICAL_RATE, 0.3), CANONICAL_RATE)
    env = rms_energy(buf)
    np.testing.assert_allclose(env.rms, 0.3, atol=1e-6)
    assert len(env.rms) == int(np.ceil(buf.frames / (0.01 * CANONICAL_RATE)))


def test_rms_silence():
    env = rms_energy(AudioBuffer(np.zeros(16000), CANONICAL_RATE))
    assert not np.any(env.rms)


def test_rms_full_scale_sine():
    env = rms_energy(tone(amplitude=1.0, seconds=1.0))
    # Interior frames (full windows) sit at 1/sqrt(2).
    np.testing.assert_allclose(env.rms[:-10], 1 / np.sqrt(2), atol=1e-3)


def test_rms_fast_path_matches_direct():
    rng = np.random.default_rng(3)
    x = rng.normal(0, 0.2, 32000 + 137)
    buf = AudioBuffer(x, CANONICAL_RATE)
    env = rms_energy(buf)  # frame 1600 = 5 x hop 320: fast path
    hop, frame = 320, 1600
    expected = np.array([
        np.sqrt(np.mean(np.square(x[s: s + frame])))
        for s in range(0, len(x), hop)])
    np.testing.assert_allclose(env.rms, expected, atol=1e-12)


# --- novelty ---

def test_novelty_constant_is_zero():
    env = EnergyEnvelope(rms=np.full(1000, 0.4), hop_seconds=0.01)
    assert not np.any(novelty(env))


def test_novelty_step_up_peaks_at_step():
    env = EnergyEnvelope(rms=np.concatenate([np.full(500, 0.1),
                                             np.full(500, 0.8)]),
                         hop_seconds=0.01)
    nov = novelty(env, smooth_seconds=0.5)
    w = 50  # smoothing window in frames
    assert abs(int(np.argmax(nov)) - 500) <= w


def test_novelty_step_down_peaks_at_step():
    # Falls are boundaries too (|delta|, not positive-only rectification).
    env = EnergyEnvelope(rms=np.concatenate([np.full(500, 0.8),
                                             np.full(500, 0.1)]),
                         hop_seconds=0.01)
    nov = novelty(env, smooth_seconds=0.5)
    assert nov.max() > 0
    assert abs(int(np.argmax(nov)) - 500) <= 50


def test_novelty_time_reversal_localizes_same_boundary():
    rms = np.concatenate([np.full(300, 0.1), np.full(700, 0.7)])
    fwd = novelty(EnergyEnvelope(rms=rms, hop_seconds=0.01))
    rev = novelty(EnergyEnvelope(rms=rms[::-1].copy(), hop_seconds=0.01))
    k_fwd = int(np.argmax(fwd))
    k_rev = int(np.argmax(rev))
    # Localization is symmetric to within the smoothing window (50 frames).
    assert abs((len(rms) - k_rev) - k_fwd) <= 50


def test_novelty_first_frame_zero():
    env = EnergyEnvelope(rms=np.linspace(0, 1, 100), hop_seconds=0.01)
    assert novelty(env)[0] == 0.0


# --- chroma ---

def test_chroma_a440():
    mat = chroma(tone(freq=440.0, seconds=2.0))
    voiced = np.linalg.norm(mat, axis=1) > 0
    assert voiced.any()
    assert np.all(np.argmax(mat[voiced], axis=1) == PC["A"])
    np.testing.assert_allclose(np.linalg.norm(mat[voiced], axis=1), 1.0,
                               atol=1e-12)


def test_chroma_silence_exact_zeros():
    mat = chroma(AudioBuffer(np.zeros(32000), CANONICAL_RATE))
    assert not np.any(mat)


def test_chroma_a_major_triad_top3():
    t = np.arange(2 * CANONICAL_RATE) / CANONICAL_RATE
    x = sum(0.3 * np.sin(2 * np.pi * f * t) for f in (440.0, 554.37, 659.25))
    vec = mean_chroma(chroma(AudioBuffer(x, CANONICAL_RATE)))
    top3 = set(np.argsort(vec)[-3:])
    assert top3 == {PC["A"], PC["C#"], PC["E"]}


def test_chroma_polarity_invariant():
    buf = tone(freq=523.25, seconds=1.0)
    flipped = AudioBuffer(-buf.mono, buf.sample_rate)
    np.testing.assert_allclose(chroma(buf), chroma(flipped), atol=1e-10)


def test_mean_chroma_single_frame_identity():
    v = np.zeros(12)
    v[3] = 1.0
    np.testing.assert_array_equal(mean_chroma(v[np.newaxis, :]), v)


def test_mean_chroma_all_silent():
    np.testing.assert_array_equal(mean_chroma(np.zeros((5, 12))), np.zeros(12))


def test_mean_chroma_concat_equal_weight():
    # Bin-centered frequencies (k * 32000/2048) keep spectral leakage from
    # skewing the per-class balance.
    a = tone(freq=437.5, seconds=2.0)    # A, bin 28
    c = tone(freq=515.625, seconds=2.0)  # C, bin 33
    both = AudioBuffer(np.concatenate([a.mono, c.mono]), CANONICAL_RATE)
    vec = mean_chroma(chroma(both))
    wa, wc = vec[PC["A"]], vec[PC["C"]]
    assert abs(wa - wc) / max(wa, wc) < 0.05


def test_chroma_determinism():
    buf = tone(freq=330.0, seconds=1.0)
    np.testing.assert_array_equal(chroma(buf), chroma(buf))


# --- tempo ---

def test_tempo_120():
    est = estimate_tempo(click_track(120))
    assert abs(est.bpm - 120.0) <= 2.0
    assert 0.0 <= est.confidence <= 1.0


def test_tempo_240_folds_to_120():
    est = estimate_tempo(click_track(240))
    assert abs(est.bpm - 120.0) <= 2.0


def test_tempo_amplitude_invariant():
    buf = click_track(150)
    a = estimate_tempo(buf)
    b = estimate_tempo(AudioBuffer(buf.mono * 0.05, buf.sample_rate))
    assert a.bpm == b.bpm


def test_tempo_noise_low_confidence():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        buf = AudioBuffer(rng.normal(0, 0.2, 6 * CANONICAL_RATE),
                          CANONICAL_RATE)
        assert estimate_tempo(buf).confidence < 0.3


def test_tempo_too_short():
    with pytest.raises(TooShort):
        estimate_tempo(tone(seconds=3.0))


def test_fold_bpm_range():
    for bpm in (10.0, 59.9, 60.0, 179.9, 180.0, 500.0):
        assert 60.0 <= fold_bpm(bpm) < 180.0


# --- key ---

def test_key_c_major_scale():
    key = estimate_key(mean_chroma(chroma(scale_buffer(0, "major"))))
    assert (key.tonic, key.mode) == (PC["C"], "major")


def test_key_a_minor_scale():
    key = estimate_key(mean_chroma(chroma(scale_buffer(9, "minor"))))
    assert (key.tonic, key.mode) == (PC["A"], "minor")


def test_key_transposition_equivariance():
    vec = mean_chroma(chroma(scale_buffer(0, "major")))
    base = estimate_key(vec)
    for k in range(12):
        shifted = estimate_key(np.roll(vec, k))
        assert shifted.tonic == (base.tonic + k) % 12
        assert shifted.mode == base.mode


def test_key_zero_vector_raises():
    with pytest.raises(SilentInput):
        estimate_key(np.zeros(12))


def test_key_label_names():
    assert KeyLabel(11, "minor").name == "B Minor"
    assert KeyLabel(0, "major").name == "C Major"


def test_key_label_parse():
    assert KeyLabel.parse("B Minor") == KeyLabel(11, "minor")
    assert KeyLabel.parse("c# maj") == KeyLabel(1, "major")
    assert KeyLabel.parse("Eb minor") == KeyLabel(3, "minor")
    assert KeyLabel.parse("C#/Db Min") == KeyLabel(1, "minor")
    with pytest.raises(ValueError):
        KeyLabel.parse("nonsense")
