"""Tagging tests: buckets, normalization, sidecar precedence, adapter routing."""

import sys
import textwrap

import numpy as np
import pytest

from corpus_forge.audio_io import AudioBuffer, CANONICAL_RATE
from corpus_forge.adapter import spawn_adapter
from corpus_forge.dsp import TempoEstimate
from corpus_forge.errors import OutOfRange
from corpus_forge.tagging import (ENERGY_CLASSES, TEMPO_CLASSES,
                                  bucket_energy, bucket_tempo,
                                  instrument_task_for_genre, mean_rms_dbfs,
                                  normalize_instrument, tag_clip)
from corpus_forge.dsp import rms_energy

from conftest import click_track, tone


def _est(bpm):
    return TempoEstimate(bpm=bpm, confidence=1.0)


def test_tempo_buckets():
    assert bucket_tempo(_est(70.0)) == "Slow"
    assert bucket_tempo(_est(120.0)) == "Moderate"
    assert bucket_tempo(_est(130.0)) == "Upbeat"
    assert bucket_tempo(_est(170.0)) == "Fast"


def test_tempo_bucket_boundaries_half_open():
    assert bucket_tempo(_est(89.999)) == "Slow"
    assert bucket_tempo(_est(90.0)) == "Moderate"
    assert bucket_tempo(_est(125.0)) == "Upbeat"
    assert bucket_tempo(_est(145.0)) == "Fast"


def test_tempo_bucket_partitions_range():
    for bpm in np.linspace(60.0, 179.999, 200):
        assert bucket_tempo(_est(float(bpm))) in TEMPO_CLASSES


def test_tempo_bucket_out_of_range():
    with pytest.raises(OutOfRange):
        bucket_tempo(_est(50.0))
    with pytest.raises(OutOfRange):
        bucket_tempo(_est(180.0))


def test_energy_silence_is_low():
    env = rms_energy(AudioBuffer(np.zeros(32000), CANONICAL_RATE))
    assert mean_rms_dbfs(env) == float("-inf")
    assert bucket_energy(env) == "Low"


def test_energy_full_scale_sine_is_high():
    env = rms_energy(tone(amplitude=1.0, seconds=1.0))
    assert -4.0 < mean_rms_dbfs(env) < -2.0  # ~ -3 dBFS
    assert bucket_energy(env) == "High"


def test_energy_quiet_sine_is_low():
    env = rms_energy(tone(amplitude=0.02, seconds=1.0))
    assert bucket_energy(env) == "Low"


def test_energy_moderate_band():
    env = rms_energy(tone(amplitude=0.1, seconds=1.0))  # ~ -23 dBFS
    assert bucket_energy(env) == "Moderate"
    assert bucket_energy(env) in ENERGY_CLASSES


def test_normalize_instrument():
    assert normalize_instrument("santur") == "Santur"
    assert normalize_instrument("SANTOOR") == "Santur"
    assert normalize_instrument("daf") == "Daaf"
    assert normalize_instrument("guitar") == "Acoustic Guitar"
    assert normalize_instrument("tombak") == "Tonbak"
    assert normalize_instrument("theremin") == "theremin"  # verbatim passthrough


def test_instrument_task_routing():
    assert instrument_task_for_genre("Persian traditional") == "instruments_traditional"
    assert instrument_task_for_genre("Traditional folk") == "instruments_traditional"
    assert instrument_task_for_genre("pop") == "instruments_general"
    assert instrument_task_for_genre(None) == "instruments_general"


TASK_ECHO_ADAPTER = textwrap.dedent("""\
    import json, sys
    print(json.dumps({"protocol": 1, "tasks": [
        "instruments_traditional", "instruments_general"]}), flush=True)
    for line in sys.stdin:
        req = json.loads(line)
        print(json.dumps({"id": req["id"], "ok": True,
                          "result": {"instruments": [req["task"]]}}), flush=True)
""")


def test_tag_clip_routes_by_genre(tmp_path):
    script = tmp_path / "task_echo.py"
    script.write_text(TASK_ECHO_ADAPTER)
    buf = click_track(120, seconds=10.0)
    with spawn_adapter(f"{sys.executable} {script}") as handle:
        tags = tag_clip(buf, sidecar={"genre": "Persian traditional"},
                        adapter=handle, clip_path="x.wav")
        assert tags.instruments == ("instruments_traditional",)
        tags = tag_clip(buf, sidecar={"genre": "pop"},
                        adapter=handle, clip_path="x.wav")
        assert tags.instruments == ("instruments_general",)


def test_tag_clip_sidecar_key_overrides_computed():
    buf = click_track(120, seconds=10.0)
    tags = tag_clip(buf, sidecar={"key": "B Minor"})
    assert tags.key is not None
    assert tags.key.name == "B Minor"


def test_tag_clip_adapter_down_flags_incomplete(tmp_path):
    crash = tmp_path / "crash.py"
    crash.write_text('import json\nprint(json.dumps('
                     '{"protocol": 1, "tasks": ["instruments_general"]}), '
                     'flush=True)\n')  # exits right after handshake
    buf = click_track(120, seconds=10.0)
    with spawn_adapter(f"{sys.executable} {crash}") as handle:
        tags = tag_clip(buf, adapter=handle, clip_path="x.wav")
    assert tags.instruments == ()
    assert tags.complete is False
    assert tags.tempo_class  # tempo/energy still computed


def test_tag_clip_never_invents_passthrough():
    tags = tag_clip(click_track(120, seconds=10.0), sidecar=None)
    assert tags.genre is None
    assert tags.mood is None
    assert tags.artist is None
    assert tags.happiness is None
    assert tags.popularity is None


def test_tag_clip_passthrough_copied_verbatim():
    sidecar = {"genre": "pop", "mood": "happy", "artist": "someone",
               "happiness": 90, "popularity": 12}
    tags = tag_clip(click_track(120, seconds=10.0), sidecar=sidecar)
    assert tags.genre == "pop"
    assert tags.mood == "happy"
    assert tags.artist == "someone"
    assert tags.happiness == 90
    assert tags.popularity == 12
