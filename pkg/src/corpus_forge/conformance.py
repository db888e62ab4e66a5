"""Protocol conformance checks, runnable against any adapter command.

Shared between the primary suite (in-tree mock) and external adapters that
claim the deterministic mock semantics. Each check returns (name, passed,
detail); `run_conformance` executes all of them.
"""

from __future__ import annotations

import filecmp
import os
import tempfile
import threading

import numpy as np

from .adapter import (AdapterTimeout, ChildExited, MOCK_TASKS, RemoteError,
                      call, separate_stems, spawn_adapter)
from .audio_io import AudioBuffer, CANONICAL_RATE, decode_audio, write_wav
from .errors import AdapterError


def _tone_wav(path: str, seconds: float = 2.0) -> str:
    t = np.arange(int(CANONICAL_RATE * seconds)) / CANONICAL_RATE
    write_wav(AudioBuffer(0.4 * np.sin(2 * np.pi * 330.0 * t), CANONICAL_RATE), path)
    return path


def check_handshake(command) -> tuple[bool, str]:
    with spawn_adapter(command) as handle:
        missing = [t for t in MOCK_TASKS if t not in handle.tasks]
        if missing:
            return False, f"handshake lacks tasks: {missing}"
        return True, f"tasks: {list(handle.tasks)}"


def check_unsupported_task(command) -> tuple[bool, str]:
    with spawn_adapter(command) as handle:
        try:
            call(handle, "no_such_task", {}, timeout=10)
        except RemoteError as exc:
            if exc.code == "unsupported_task":
                return True, "error code unsupported_task"
            return False, f"wrong error code: {exc.code}"
        return False, "bogus task did not error"


def check_out_of_order(command, n: int = 10) -> tuple[bool, str]:
    """n concurrent caption requests must each get their own reply."""
    with spawn_adapter(command) as handle:
        results: dict[int, object] = {}

        def worker(i):
            try:
                results[i] = call(handle, "caption",
                                  {"tokens": [["slot", f"tok{i}"]]}, timeout=30)
            except AdapterError as exc:  # pragma: no cover - reported below
                results[i] = exc
        threads = [threading.Thread(target=worker, args=(i,)) for i in range(n)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for i in range(n):
            r = results.get(i)
            if not isinstance(r, dict) or r.get("text") != f"tok{i}":
                return False, f"request {i} got {r!r}"
        return True, f"{n} concurrent requests demultiplexed"


def check_separate_semantics(command) -> tuple[bool, str]:
    with tempfile.TemporaryDirectory() as tmp:
        clip = _tone_wav(os.path.join(tmp, "clip.wav"))
        with spawn_adapter(command) as handle:
            stems = separate_stems(handle, clip, output_dir=tmp)
        if not filecmp.cmp(clip, stems["instrumental"], shallow=False):
            return False, "instrumental stem is not a bitwise copy"
        vocal = decode_audio(stems["vocal"])
        if np.any(vocal.samples):
            return False, "vocal stem is not silence"
        ref = decode_audio(clip)
        if abs(vocal.frames - ref.frames) > 1:
            return False, "vocal stem duration mismatch"
        return True, "stems match mock semantics"


def check_caption_echo(command) -> tuple[bool, str]:
    payload = {"tokens": [["tempo_class", "Moderate"], ["instrument", "Santur"]]}
    with spawn_adapter(command) as handle:
        a = call(handle, "caption", payload, timeout=30)
        b = call(handle, "caption", payload, timeout=30)
    if a != b:
        return False, "caption echo is not deterministic"
    if a.get("text") != "Moderate, Santur":
        return False, f"unexpected echo text: {a!r}"
    return True, "deterministic token echo"


def check_timeout(command) -> tuple[bool, str]:
    """A microscopic deadline must time out; a later call still succeeds
    (the late reply is discarded, exactly-once outcome per id)."""
    with spawn_adapter(command) as handle:
        # A fast adapter can occasionally beat even a microscopic deadline
        # (scheduling race), which is legal; retry until a timeout lands.
        for _ in range(50):
            try:
                call(handle, "caption", {"tokens": [["a", "b"]]}, timeout=1e-6)
            except AdapterTimeout:
                break
        else:
            return False, "no call timed out in 50 attempts"
        follow_up = call(handle, "caption", {"tokens": [["a", "after"]]}, timeout=30)
        if follow_up.get("text") != "after":
            return False, f"handle broken after timeout: {follow_up!r}"
        return True, "timeout raised, handle still usable"


def check_crash_containment(command) -> tuple[bool, str]:
    handle = spawn_adapter(command)
    handle.proc.kill()
    handle.proc.wait()
    try:
        call(handle, "caption", {"tokens": [["a", "b"]]}, timeout=10)
        return False, "call on dead child did not error"
    except (ChildExited, AdapterTimeout):
        return True, "dead child surfaced as an adapter error"
    finally:
        handle.shutdown()


CHECKS = (
    ("handshake", check_handshake),
    ("unsupported_task", check_unsupported_task),
    ("out_of_order", check_out_of_order),
    ("separate_semantics", check_separate_semantics),
    ("caption_echo", check_caption_echo),
    ("timeout", check_timeout),
    ("crash_containment", check_crash_containment),
)


def run_conformance(command) -> list[tuple[str, bool, str]]:
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn(command)
        except Exception as exc:  # a check crashing is a failure, not an abort
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
