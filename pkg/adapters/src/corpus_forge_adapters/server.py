"""Reference adapter server: real (model-free) backends behind the protocol.

Tasks are enabled by configuration; each enabled task is loaded at startup
and only loadable tasks are advertised in the handshake, so the advertised
set always matches what the server can actually run. A task whose backend
cannot be loaded (e.g. numpy missing for separation) is reported on stderr
with code model_load_failed and dropped.

Run as:

    python -m corpus_forge_adapters.server                 # all tasks
    python -m corpus_forge_adapters.server --tasks caption
    python -m corpus_forge_adapters.server --config cfg.json

where cfg.json looks like {"tasks": ["separate", "caption"]}. An empty
task list yields an empty handshake and a clean idle loop.
"""

from __future__ import annotations

import argparse
import json
import sys

from .protocol import BadPayload, serve

ALL_TASKS = ("separate", "instruments_traditional", "instruments_general",
             "caption", "classify_labels")


def _load_separate():
    from .separation import separate_file  # imports numpy

    def handler(payload: dict) -> dict:
        src = payload.get("audio_path")
        if not isinstance(src, str) or not src:
            raise BadPayload("separate needs audio_path")
        return separate_file(src, payload.get("output_dir"))
    return handler


def _load_instruments():
    from .instruments import labels_for

    def handler(payload: dict) -> dict:
        return {"instruments": labels_for(payload.get("sidecar"),
                                          payload.get("audio_path"))}
    return handler


def _load_caption():
    from .captioner import caption_from_tokens

    def handler(payload: dict) -> dict:
        tokens = payload.get("tokens")
        if not isinstance(tokens, list):
            raise BadPayload("caption needs a token list")
        try:
            pairs = [(str(t[0]), str(t[1])) for t in tokens]
        except (IndexError, TypeError) as exc:
            raise BadPayload("tokens must be [slot, text] pairs") from exc
        return {"text": caption_from_tokens(pairs,
                                            payload.get("artist_context"))}
    return handler


def _load_classify():
    def handler(payload: dict) -> dict:
        sidecar = payload.get("sidecar") or {}
        genre = sidecar.get("genre")
        return {"labels": [genre] if genre else []}
    return handler


LOADERS = {
    "separate": _load_separate,
    "instruments_traditional": _load_instruments,
    "instruments_general": _load_instruments,
    "caption": _load_caption,
    "classify_labels": _load_classify,
}


def build_handlers(tasks) -> dict:
    handlers = {}
    for task in tasks:
        loader = LOADERS.get(task)
        if loader is None:
            print(json.dumps({"code": "model_load_failed",
                              "task": task,
                              "message": "unknown task"}), file=sys.stderr)
            continue
        try:
            handlers[task] = loader()
        except Exception as exc:  # noqa: BLE001 - degrade, don't die
            print(json.dumps({"code": "model_load_failed",
                              "task": task,
                              "message": f"{type(exc).__name__}: {exc}"}),
                  file=sys.stderr)
    return handlers


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(prog="corpus_forge_adapters.server")
    parser.add_argument("--tasks", default=None,
                        help="comma-separated task list; empty string for none")
    parser.add_argument("--config", default=None,
                        help="JSON config file with a 'tasks' array")
    args = parser.parse_args(argv)

    tasks: tuple = ALL_TASKS
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            tasks = tuple(json.load(fh).get("tasks", ()))
    if args.tasks is not None:
        tasks = tuple(t for t in args.tasks.split(",") if t.strip())
    serve(build_handlers(tasks))


if __name__ == "__main__":
    main()
