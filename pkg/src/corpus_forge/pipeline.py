"""Stage implementations behind the CLI: ingest, segment, separate, tag,
caption, stats, export, eval.

Stages communicate through files under the output directory:

    tracks/                 canonical-format track audio + sidecar JSON
    clips/                  clip audio
    stems/                  separated stems
    manifest.ingest.jsonl   track inventory
    manifest.segment.jsonl  clip records with spans
    manifest.separated.jsonl  + stem paths
    manifest.tagged.jsonl     + tags and features
    manifest.captioned.jsonl  + captions
    stats.json / stats.txt / figures/
    stage1.jsonl stage2.jsonl stage3.jsonl
    eval_report.json / eval_report.txt / figures/

Rerunning a stage with unchanged inputs/config/seed reproduces its outputs
byte-identically (timestamps excluded from manifest digests), regardless
of worker count: work is distributed over a pool but results are written
in input order.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import adapter as adapter_mod
from .audio_io import decode_audio, to_canonical, write_wav
from .captioning import build_prompt, clip_seed, generate_caption, render_template_caption
from .config import PipelineConfig
from .dsp import chroma, estimate_tempo, mean_chroma, rms_energy
from .errors import AdapterError, CorpusForgeError, TooShort, TrackTooShort
from .evaluation import (conditioning_sweep, corpus_kld, cosine_similarity,
                         read_pairs)
from .manifest import (ClipRecord, CorpusManifest, compute_stats,
                       export_training_manifests, make_clip_id, read_manifest,
                       write_manifest)
from .segmenter import extract_clip, segment
from .tagging import tag_clip

log = logging.getLogger("corpus_forge")

MANIFEST_CHAIN = ["manifest.captioned.jsonl", "manifest.tagged.jsonl",
                  "manifest.separated.jsonl", "manifest.segment.jsonl"]


def _out(cfg: PipelineConfig) -> Path:
    if not cfg.output_dir:
        raise CorpusForgeError("output_dir is not configured")
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def latest_manifest_path(cfg: PipelineConfig, before: str | None = None) -> Path:
    """Most-derived manifest present, optionally earlier in the chain than
    the stage currently being (re)built."""
    chain = MANIFEST_CHAIN
    if before is not None:
        chain = chain[chain.index(before) + 1:]
    out = _out(cfg)
    for name in chain:
        if (out / name).exists():
            return out / name
    raise CorpusForgeError("no clip manifest found; run earlier stages first")


def _pool_map(fn, items, workers: int):
    """Order-preserving parallel map; exceptions propagate."""
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _read_sidecar(path: Path) -> dict | None:
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    return None


def spawn_configured_adapter(cfg: PipelineConfig, task: str):
    command = cfg.adapters.get(task)
    if not command:
        return None
    return adapter_mod.spawn_adapter(command, timeouts=cfg.adapter_timeouts)


# --- stages ---

def run_ingest(cfg: PipelineConfig) -> int:
    """Decode every input WAV to the canonical format; copy sidecars."""
    if not cfg.input_dir:
        raise CorpusForgeError("input_dir is not configured")
    out = _out(cfg)
    tracks_dir = out / "tracks"
    tracks_dir.mkdir(exist_ok=True)
    sources = sorted(Path(cfg.input_dir).glob("*.wav"))
    if not sources:
        raise CorpusForgeError(f"no .wav files in {cfg.input_dir}")

    def ingest_one(src: Path) -> dict:
        track_id = src.stem
        buf = to_canonical(decode_audio(src))
        dest = tracks_dir / f"{track_id}.wav"
        write_wav(buf, dest)
        sidecar = _read_sidecar(src.with_suffix(".json"))
        if sidecar is not None:
            with open(tracks_dir / f"{track_id}.json", "w", encoding="utf-8") as fh:
                json.dump(sidecar, fh, sort_keys=True)
        return {"track_id": track_id, "audio_path": str(dest),
                "duration_seconds": buf.duration_seconds,
                "has_sidecar": sidecar is not None}

    entries = _pool_map(ingest_one, sources, cfg.workers)
    with open(out / "manifest.ingest.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema_version": 1, "stage": "ingest"}) + "\n")
        for e in entries:
            fh.write(json.dumps(e, sort_keys=True) + "\n")
    log.info("ingested %d tracks", len(entries))
    return 0


def _load_tracks(cfg: PipelineConfig) -> list[dict]:
    path = _out(cfg) / "manifest.ingest.jsonl"
    if not path.exists():
        raise CorpusForgeError("run ingest first")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    return [json.loads(l) for l in lines[1:] if l.strip()]


def run_segment(cfg: PipelineConfig) -> int:
    out = _out(cfg)
    clips_dir = out / "clips"
    clips_dir.mkdir(exist_ok=True)
    tracks = _load_tracks(cfg)

    def segment_one(track: dict) -> list[ClipRecord]:
        buf = decode_audio(track["audio_path"])
        try:
            spans = segment(buf, cfg.segmenter)
        except TrackTooShort:
            log.warning("track %s too short to segment", track["track_id"])
            return []
        records = []
        for span in spans:
            clip_id = make_clip_id(track["track_id"], span)
            clip_path = clips_dir / f"{clip_id}.wav"
            write_wav(extract_clip(buf, span), clip_path)
            records.append(ClipRecord(clip_id=clip_id,
                                      track_id=track["track_id"],
                                      span=span, audio_path=str(clip_path)))
        return records

    per_track = _pool_map(segment_one, tracks, cfg.workers)
    records = [r for batch in per_track for r in batch]
    write_manifest(records, out / "manifest.segment.jsonl",
                   global_seed=cfg.global_seed)
    log.info("segmented %d tracks into %d clips", len(tracks), len(records))
    return 0


def run_separate(cfg: PipelineConfig) -> int:
    out = _out(cfg)
    stems_dir = out / "stems"
    stems_dir.mkdir(exist_ok=True)
    manifest = read_manifest(latest_manifest_path(cfg, before="manifest.separated.jsonl"))
    handle = spawn_configured_adapter(cfg, "separate")
    if handle is None:
        raise CorpusForgeError("no adapter configured for task 'separate'")
    flagged = 0
    try:
        def separate_one(record: ClipRecord) -> ClipRecord:
            try:
                record.stem_paths = adapter_mod.separate_stems(
                    handle, record.audio_path, output_dir=str(stems_dir))
            except AdapterError as exc:
                log.warning("separation failed for %s: %s", record.clip_id, exc)
                record.complete = False
            return record

        records = _pool_map(separate_one, manifest.records, cfg.workers)
        flagged = sum(not r.complete for r in records)
    finally:
        handle.shutdown()
    write_manifest(records, out / "manifest.separated.jsonl",
                   global_seed=cfg.global_seed)
    log.info("separated %d clips (%d flagged)", len(records), flagged)
    return 1 if flagged else 0


def analyze_clip(buffer) -> dict:
    """Clip features stored in the manifest: bpm, mean RMS dBFS, mean chroma."""
    from .tagging import mean_rms_dbfs
    vec = mean_chroma(chroma(buffer))
    try:
        bpm = estimate_tempo(buffer).bpm
    except TooShort:
        bpm = None
    db = mean_rms_dbfs(rms_energy(buffer))
    return {"bpm": bpm,
            "mean_rms_dbfs": db if np.isfinite(db) else -60.0,
            "mean_chroma": [float(x) for x in vec]}


def run_tag(cfg: PipelineConfig) -> int:
    out = _out(cfg)
    manifest = read_manifest(latest_manifest_path(cfg, before="manifest.tagged.jsonl"))
    tracks_dir = out / "tracks"
    sidecars = {t["track_id"]: _read_sidecar(tracks_dir / f"{t['track_id']}.json")
                for t in _load_tracks(cfg)}
    task_handles = {}
    for task in ("instruments_traditional", "instruments_general"):
        task_handles[task] = spawn_configured_adapter(cfg, task)
    # A single command may serve both instrument tasks.
    flagged = 0
    try:
        def tag_one(record: ClipRecord) -> ClipRecord:
            buf = decode_audio(record.audio_path)
            sidecar = sidecars.get(record.track_id)
            from .tagging import instrument_task_for_genre
            task = instrument_task_for_genre((sidecar or {}).get("genre"))
            record.tags = tag_clip(buf, sidecar=sidecar,
                                   adapter=task_handles.get(task),
                                   clip_path=record.audio_path,
                                   tempo_thresholds=cfg.tempo_thresholds,
                                   energy_thresholds=cfg.energy_thresholds)
            record.features = analyze_clip(buf)
            return record

        records = _pool_map(tag_one, manifest.records, cfg.workers)
        configured = any(task_handles.values())
        flagged = sum(not r.tags.complete for r in records) if configured else 0
    finally:
        for h in task_handles.values():
            if h is not None:
                h.shutdown()
    write_manifest(records, out / "manifest.tagged.jsonl",
                   global_seed=cfg.global_seed)
    log.info("tagged %d clips (%d flagged)", len(records), flagged)
    return 1 if flagged else 0


def run_caption(cfg: PipelineConfig) -> int:
    out = _out(cfg)
    manifest = read_manifest(latest_manifest_path(cfg, before="manifest.captioned.jsonl"))
    handle = spawn_configured_adapter(cfg, "caption")
    # Clip index within its track, ordered by span start: the augmentation
    # seed must be stable under parallelism and re-runs.
    order: dict[str, list[ClipRecord]] = {}
    for r in manifest.records:
        order.setdefault(r.track_id, []).append(r)
    index_of = {}
    for track_id, rs in order.items():
        for i, r in enumerate(sorted(rs, key=lambda r: r.span.start_seconds)):
            index_of[r.clip_id] = i
    flagged = 0
    try:
        def caption_one(record: ClipRecord) -> ClipRecord:
            if record.tags is None:
                record.complete = False
                return record
            seed = clip_seed(record.track_id, index_of[record.clip_id],
                             cfg.global_seed)
            spec = build_prompt(record.tags,
                                artist_context=record.tags.artist,
                                seed=seed,
                                omit_probability=cfg.captioner.omit_probability,
                                shuffle=cfg.captioner.shuffle)
            if handle is not None:
                record.caption = generate_caption(
                    spec, handle, fallback_enabled=cfg.captioner.fallback,
                    grammar_path=cfg.captioner.grammar_path)
            else:
                record.caption = render_template_caption(
                    spec, grammar_path=cfg.captioner.grammar_path)
            return record

        records = _pool_map(caption_one, manifest.records, cfg.workers)
        if handle is not None:
            flagged = sum(1 for r in records
                          if r.caption is not None and r.caption.fallback)
    finally:
        if handle is not None:
            handle.shutdown()
    write_manifest(records, out / "manifest.captioned.jsonl",
                   global_seed=cfg.global_seed)
    log.info("captioned %d clips (%d fallbacks)", len(records), flagged)
    return 1 if flagged else 0


def run_stats(cfg: PipelineConfig) -> int:
    from .reporting import render_stats_figures
    out = _out(cfg)
    manifest = read_manifest(latest_manifest_path(cfg))
    stats = compute_stats(manifest)
    with open(out / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(stats.to_json(), fh, indent=2, sort_keys=True)
    with open(out / "stats.txt", "w", encoding="utf-8") as fh:
        fh.write(stats.to_text() + "\n")
    figures = render_stats_figures(stats, out / "figures")
    log.info("stats over %d clips; %d figures", stats.total_clips, len(figures))
    return 0


def run_export_stages(cfg: PipelineConfig, solo_vocab=None, allowlist=None) -> int:
    out = _out(cfg)
    manifest = read_manifest(latest_manifest_path(cfg))
    kwargs = {}
    if solo_vocab:
        kwargs["solo_instrument_vocab"] = solo_vocab
    stages = export_training_manifests(manifest, solo_allowlist=allowlist, **kwargs)
    for name, records in stages.items():
        path = out / f"{name}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"stage": name, "count": len(records)}) + "\n")
            for r in records:
                if name == "stage1":
                    row = {"clip_id": r.clip_id, "audio_path": r.audio_path}
                elif name == "stage2":
                    row = {"clip_id": r.clip_id, "audio_path": r.audio_path,
                           "instrument": r.tags.instruments[0] if r.tags and r.tags.instruments else None}
                else:
                    row = {"clip_id": r.clip_id, "audio_path": r.audio_path,
                           "caption": r.caption.text}
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        if not records:
            log.warning("training stage %s is empty", name)
    log.info("exported stages: %s",
             {k: len(v) for k, v in stages.items()})
    return 0


def run_eval(cfg: PipelineConfig, generated_path, reference_path,
             pairs_path=None) -> int:
    from .reporting import render_metrics_figures
    out = _out(cfg)
    result: dict = {}
    report = None
    if pairs_path:
        pairs = read_pairs(pairs_path)
        report = conditioning_sweep(pairs,
                                    exclude_prefix=cfg.eval.exclude_prefix)
        result = report.to_json()
        text = report.to_text()
    else:
        generated = read_manifest(generated_path)
        reference = read_manifest(reference_path)
        kld, breakdown = corpus_kld(generated, reference,
                                    bins=cfg.eval.bins, alpha=cfg.eval.alpha)
        sims = []
        ref_by_id = {r.clip_id: r for r in reference.records}
        for g in generated.records:
            r = ref_by_id.get(g.clip_id)
            if r is None or not g.features or not r.features:
                continue
            sims.append(cosine_similarity(
                np.asarray(g.features["mean_chroma"]),
                np.asarray(r.features["mean_chroma"])).value)
        mean_sim = float(np.mean(sims)) if sims else None
        result = {"kld": kld, "kld_breakdown": breakdown,
                  "chroma_similarity_mean": mean_sim,
                  "n_pairs": len(sims),
                  "direction": "KL(reference || generated)"}
        text = (f"KLD (reference || generated): {kld:.6f}\n"
                f"Mean chroma similarity over {len(sims)} aligned pairs: "
                f"{mean_sim if mean_sim is not None else 'n/a'}\n")
    with open(out / "eval_report.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
    with open(out / "eval_report.txt", "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    if report is not None:
        render_metrics_figures(report, out / "figures")
    log.info("evaluation report written to %s", out / "eval_report.json")
    return 0


def run_adapters_check(cfg: PipelineConfig) -> int:
    if not cfg.adapters:
        raise CorpusForgeError("no adapters configured")
    for task, command in sorted(cfg.adapters.items()):
        handle = adapter_mod.spawn_adapter(command,
                                           timeouts=cfg.adapter_timeouts)
        try:
            print(f"{task}: protocol ok, tasks={list(handle.tasks)}")
        finally:
            handle.shutdown()
    return 0
