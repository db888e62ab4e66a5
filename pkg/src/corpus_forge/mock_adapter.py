"""Deterministic in-tree mock adapter (protocol v1, stdlib only).

Normative mock semantics, so the whole primary test suite is hermetic:

  separate                 -> instrumental stem is a bitwise copy of the
                              input file, vocal stem is silence of equal
                              length/format
  instruments_traditional  -> echo of the sidecar "instruments" list
  instruments_general      -> echo of the sidecar "instruments" list
  caption                  -> ", ".join of the prompt token texts
  classify_labels          -> [sidecar genre] when present, else []

Debug knobs (for protocol tests): --sleep S delays every reply;
--reverse-batch N buffers N requests and answers them in reverse order.

Run as: python -m corpus_forge.mock_adapter
"""

import argparse
import json
import os
import shutil
import struct
import sys


def _silence_copy(src: str, dst: str) -> None:
    # Duplicate the WAV container with a zeroed data payload. Works on any
    # RIFF file our decoder accepts, without third-party imports.
    with open(src, "rb") as fh:
        data = bytearray(fh.read())
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        if cid == b"data":
            end = min(pos + 8 + size, len(data))
            data[pos + 8:end] = bytes(end - pos - 8)
        pos += 8 + size + (size & 1)
    with open(dst, "wb") as fh:
        fh.write(data)


def _handle(task, payload):
    if task == "separate":
        src = payload["audio_path"]
        out_dir = payload.get("output_dir") or os.path.dirname(src) or "."
        base = os.path.splitext(os.path.basename(src))[0]
        vocal = os.path.join(out_dir, base + ".vocal.wav")
        instrumental = os.path.join(out_dir, base + ".instrumental.wav")
        os.makedirs(out_dir, exist_ok=True)
        shutil.copyfile(src, instrumental)
        _silence_copy(src, vocal)
        return {"vocal": vocal, "instrumental": instrumental}
    if task in ("instruments_traditional", "instruments_general"):
        sidecar = payload.get("sidecar") or {}
        return {"instruments": list(sidecar.get("instruments", []))}
    if task == "caption":
        tokens = payload.get("tokens") or []
        return {"text": ", ".join(str(t[1]) for t in tokens)}
    if task == "classify_labels":
        sidecar = payload.get("sidecar") or {}
        genre = sidecar.get("genre")
        return {"labels": [genre] if genre else []}
    return None


def _reply(req, sleep=0.0):
    import time
    if sleep:
        time.sleep(sleep)
    task = req.get("task")
    payload = req.get("payload") or {}
    try:
        result = _handle(task, payload)
    except (KeyError, OSError, TypeError) as exc:
        return {"id": req.get("id"), "ok": False,
                "error": {"code": "bad_payload", "message": str(exc)}}
    if result is None:
        return {"id": req.get("id"), "ok": False,
                "error": {"code": "unsupported_task",
                          "message": f"no such task: {task}"}}
    return {"id": req.get("id"), "ok": True, "result": result}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="corpus_forge.mock_adapter")
    parser.add_argument("--sleep", type=float, default=0.0)
    parser.add_argument("--reverse-batch", type=int, default=0)
    args = parser.parse_args(argv)

    tasks = ["separate", "instruments_traditional", "instruments_general",
             "caption", "classify_labels"]
    print(json.dumps({"protocol": 1, "tasks": tasks}), flush=True)

    batch = []
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        if args.reverse_batch > 1:
            batch.append(req)
            if len(batch) >= args.reverse_batch:
                for r in reversed(batch):
                    print(json.dumps(_reply(r, args.sleep)), flush=True)
                batch = []
        else:
            print(json.dumps(_reply(req, args.sleep)), flush=True)
    for r in reversed(batch):
        print(json.dumps(_reply(r, args.sleep)), flush=True)


if __name__ == "__main__":
    main()
