"""Client side of the subprocess model protocol.

Wire protocol (normative, version 1): the child speaks line-delimited JSON
on stdio, UTF-8, one object per line, no embedded newlines.

  handshake (first line from child):  {"protocol": 1, "tasks": [...]}
  request  (client -> child):         {"id": str, "task": str, "payload": {...}}
  reply    (child -> client):         {"id": str, "ok": true, "result": {...}}
                                   or {"id": str, "ok": false,
                                       "error": {"code": str, "message": str}}

Replies may arrive out of order; every id gets exactly one terminal outcome
(reply, timeout, or child-exit error). Audio is passed by file path, never
inline. An unknown task must produce error code "unsupported_task".
A framing violation is a hard protocol error, never silent recovery.
"""

from __future__ import annotations

import itertools
import json
import shlex
import subprocess
import threading
import queue

from .audio_io import decode_audio
from .errors import (AdapterTimeout, ChildExited, HandshakeTimeout,
                     ProtocolError, ProtocolVersionMismatch, RemoteError,
                     SpawnFailure, StemMissing)

PROTOCOL_VERSION = 1

DEFAULT_TIMEOUTS = {
    "separate": 120.0,
    "caption": 60.0,
    "instruments_traditional": 60.0,
    "instruments_general": 60.0,
    "classify_labels": 60.0,
}

MOCK_TASKS = ("separate", "instruments_traditional", "instruments_general",
              "caption", "classify_labels")

_id_counter = itertools.count(1)


class AdapterHandle:
    """One child process; writes serialized, replies demultiplexed by id."""

    def __init__(self, proc: subprocess.Popen, tasks: tuple[str, ...],
                 timeouts: dict[str, float]):
        self.proc = proc
        self.tasks = tasks
        self.timeouts = dict(DEFAULT_TIMEOUTS, **(timeouts or {}))
        self.closed = False
        self._write_lock = threading.Lock()
        self._pending_lock = threading.Lock()
        self._pending: dict[str, queue.Queue] = {}
        self._dead = None  # terminal error once the child is gone
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        try:
            for line in self.proc.stdout:
                line = line.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                    if not isinstance(msg, dict) or "id" not in msg:
                        raise ValueError("reply must be an object with an id")
                except ValueError:
                    self._fail_all(ProtocolError(f"unparseable reply line: {line[:200]!r}"))
                    return
                with self._pending_lock:
                    q = self._pending.pop(str(msg["id"]), None)
                if q is not None:
                    q.put(msg)
                # Late replies for timed-out ids are dropped silently: their
                # terminal outcome was already the timeout.
        finally:
            self._fail_all(ChildExited("adapter child closed its stdout"))

    def _fail_all(self, error):
        with self._pending_lock:
            if self._dead is None:
                self._dead = error
            pending, self._pending = self._pending, {}
        for q in pending.values():
            q.put(error)

    def shutdown(self, grace_seconds: float = 5.0):
        if self.closed:
            return
        self.closed = True
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=grace_seconds)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def _read_line_with_timeout(stream, timeout: float) -> str | None:
    box: queue.Queue = queue.Queue()
    t = threading.Thread(target=lambda: box.put(stream.readline()), daemon=True)
    t.start()
    try:
        return box.get(timeout=timeout)
    except queue.Empty:
        return None


def spawn_adapter(command, timeouts: dict[str, float] | None = None,
                  handshake_timeout: float = 10.0) -> AdapterHandle:
    """Start an adapter child and consume its handshake line."""
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    try:
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE,
                                stdout=subprocess.PIPE, text=True,
                                encoding="utf-8", bufsize=1)
    except OSError as exc:
        raise SpawnFailure(f"cannot start adapter {argv!r}: {exc}") from exc

    line = _read_line_with_timeout(proc.stdout, handshake_timeout)
    if line is None or not line.strip():
        proc.kill()
        raise HandshakeTimeout(f"no handshake line from {argv!r}")
    try:
        handshake = json.loads(line)
        protocol = handshake["protocol"]
        tasks = tuple(handshake["tasks"])
    except (ValueError, KeyError, TypeError) as exc:
        proc.kill()
        raise HandshakeTimeout(f"bad handshake line {line.strip()[:200]!r}") from exc
    if protocol != PROTOCOL_VERSION:
        proc.kill()
        raise ProtocolVersionMismatch(f"child speaks protocol {protocol}, "
                                      f"need {PROTOCOL_VERSION}")
    return AdapterHandle(proc=proc, tasks=tasks, timeouts=timeouts or {})


def call(handle: AdapterHandle, task: str, payload: dict,
         timeout: float | None = None):
    """Send one request and await its matching-id reply."""
    if handle.closed:
        raise ChildExited("adapter handle is shut down")
    if timeout is None:
        timeout = handle.timeouts.get(task, 60.0)
    req_id = f"r{next(_id_counter)}"
    q: queue.Queue = queue.Queue()
    with handle._pending_lock:
        if handle._dead is not None:
            raise handle._dead
        handle._pending[req_id] = q
    try:
        with handle._write_lock:
            handle.proc.stdin.write(json.dumps(
                {"id": req_id, "task": task, "payload": payload}) + "\n")
            handle.proc.stdin.flush()
    except (OSError, ValueError) as exc:
        with handle._pending_lock:
            handle._pending.pop(req_id, None)
        raise ChildExited(f"cannot write to adapter child: {exc}") from exc

    try:
        outcome = q.get(timeout=timeout)
    except queue.Empty:
        with handle._pending_lock:
            handle._pending.pop(req_id, None)
        raise AdapterTimeout(f"no reply for id {req_id} (task {task}) "
                             f"within {timeout} s")
    if isinstance(outcome, Exception):
        raise outcome
    if outcome.get("ok"):
        return outcome.get("result")
    err = outcome.get("error") or {}
    raise RemoteError(err.get("code", "unknown"), err.get("message", ""))


def separate_stems(handle: AdapterHandle, clip_path: str,
                   output_dir: str | None = None) -> dict[str, str]:
    """Run source separation; returns {"vocal": path, "instrumental": path}."""
    result = call(handle, "separate", {"audio_path": str(clip_path),
                                       "output_dir": output_dir and str(output_dir)})
    stems = {}
    for stem in ("vocal", "instrumental"):
        path = (result or {}).get(stem)
        if not path:
            raise StemMissing(f"adapter reply lacks the {stem} stem path")
        try:
            buf = decode_audio(path)
        except OSError as exc:
            raise StemMissing(f"{stem} stem missing on disk: {path}") from exc
        reference = decode_audio(clip_path)
        if abs(buf.frames - reference.frames * buf.sample_rate // reference.sample_rate) > 1:
            raise StemMissing(f"{stem} stem duration mismatch: {path}")
        stems[stem] = path
    return stems
