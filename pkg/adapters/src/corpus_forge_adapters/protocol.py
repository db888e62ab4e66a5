"""Server side of the line-delimited JSON model protocol (stdlib only).

The client is the pipeline's adapter bridge; its docs are the normative
protocol description. This module implements the child's half:

  - print one handshake line {"protocol": 1, "tasks": [...]} on startup
  - read request lines {"id", "task", "payload"} from stdin
  - write one reply line per request: {"id", "ok": true, "result": ...}
    or {"id", "ok": false, "error": {"code", "message"}}

Error codes used by the reference servers:

  unsupported_task   the task is not in the advertised set
  bad_payload        the payload is missing fields or has wrong types
  inference_failed   the handler raised while processing
"""

from __future__ import annotations

import json
import sys

PROTOCOL_VERSION = 1


class BadPayload(Exception):
    """Raised by handlers when the request payload is malformed."""


def reply_ok(req_id: str, result: dict) -> None:
    sys.stdout.write(json.dumps({"id": req_id, "ok": True,
                                 "result": result}) + "\n")
    sys.stdout.flush()


def reply_error(req_id: str, code: str, message: str) -> None:
    sys.stdout.write(json.dumps({"id": req_id, "ok": False,
                                 "error": {"code": code,
                                           "message": message}}) + "\n")
    sys.stdout.flush()


def serve(handlers: dict) -> None:
    """Run the request loop until stdin closes.

    `handlers` maps task name -> callable(payload) -> result dict. The
    handshake advertises exactly the handler keys, so the advertised tasks
    always match what is actually serveable.
    """
    sys.stdout.write(json.dumps({"protocol": PROTOCOL_VERSION,
                                 "tasks": sorted(handlers)}) + "\n")
    sys.stdout.flush()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            req_id = str(req["id"])
            task = req["task"]
            payload = req.get("payload") or {}
        except (ValueError, KeyError, TypeError):
            # No recoverable id: nothing useful can be replied.
            print(f"unparseable request line: {line[:200]!r}", file=sys.stderr)
            continue
        handler = handlers.get(task)
        if handler is None:
            reply_error(req_id, "unsupported_task", f"unknown task {task!r}")
            continue
        try:
            reply_ok(req_id, handler(payload))
        except BadPayload as exc:
            reply_error(req_id, "bad_payload", str(exc))
        except Exception as exc:  # noqa: BLE001 - contained per request
            reply_error(req_id, "inference_failed",
                        f"{type(exc).__name__}: {exc}")
