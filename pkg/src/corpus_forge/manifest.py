"""Manifest persistence, corpus statistics, and staged training exports.

Manifests are line-delimited JSON: a header object on the first line, then
one clip record per line. Records stay independently readable so a corrupt
line loses one clip, not the file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import __version__ as TOOL_VERSION
from .audio_io import CANONICAL_RATE
from .captioning import Caption
from .dsp import KeyLabel, PITCH_CLASS_NAMES
from .errors import IoError, SchemaVersionUnknown
from .segmenter import ClipSpan
from .tagging import TagSet, normalize_instrument

SCHEMA_VERSION = 1

# Default solo-instrument vocabulary for stage-2 filtering.
DEFAULT_SOLO_VOCAB = ("Tar", "Setar", "Santur", "Kamancheh", "Daaf", "Ney", "Tonbak")


def make_clip_id(track_id: str, span: ClipSpan) -> str:
    """Pure function of (track_id, span); regeneration reproduces ids."""
    key = f"{track_id}|{span.start_seconds:.3f}|{span.end_seconds:.3f}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


@dataclass
class ClipRecord:
    clip_id: str
    track_id: str
    span: ClipSpan
    audio_path: str
    stem_paths: dict | None = None
    tags: TagSet | None = None
    caption: Caption | None = None
    features: dict | None = None  # {bpm, mean_rms_dbfs, mean_chroma: [12]}
    complete: bool = True

    def to_json(self) -> dict:
        d = {
            "clip_id": self.clip_id,
            "track_id": self.track_id,
            "span": {"start": self.span.start_seconds,
                     "end": self.span.end_seconds,
                     "score": self.span.boundary_score},
            "audio_path": self.audio_path,
            "complete": self.complete,
        }
        if self.stem_paths:
            d["stem_paths"] = self.stem_paths
        if self.features:
            d["features"] = self.features
        if self.tags is not None:
            t = self.tags
            d["tags"] = {
                "tempo_class": t.tempo_class,
                "energy_class": t.energy_class,
                "key": t.key.name if t.key else None,
                "instruments": list(t.instruments),
                "genre": t.genre, "mood": t.mood, "artist": t.artist,
                "happiness": t.happiness, "popularity": t.popularity,
                "complete": t.complete,
            }
        if self.caption is not None:
            d["caption"] = {"text": self.caption.text,
                            "source": self.caption.source,
                            "prompt_hash": self.caption.prompt_hash,
                            "fallback": self.caption.fallback}
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ClipRecord":
        span = ClipSpan(start_seconds=d["span"]["start"],
                        end_seconds=d["span"]["end"],
                        boundary_score=d["span"].get("score", 0.0))
        tags = None
        if "tags" in d:
            t = d["tags"]
            tags = TagSet(
                tempo_class=t["tempo_class"], energy_class=t["energy_class"],
                key=KeyLabel.parse(t["key"]) if t.get("key") else None,
                instruments=tuple(t.get("instruments", ())),
                genre=t.get("genre"), mood=t.get("mood"), artist=t.get("artist"),
                happiness=t.get("happiness"), popularity=t.get("popularity"),
                complete=t.get("complete", True),
            )
        caption = None
        if "caption" in d:
            c = d["caption"]
            caption = Caption(text=c["text"], source=c["source"],
                              prompt_hash=c["prompt_hash"],
                              fallback=c.get("fallback", False))
        return cls(clip_id=d["clip_id"], track_id=d["track_id"], span=span,
                   audio_path=d["audio_path"], stem_paths=d.get("stem_paths"),
                   tags=tags, caption=caption, features=d.get("features"),
                   complete=d.get("complete", True))


@dataclass
class CorpusManifest:
    records: list[ClipRecord] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION
    canonical_rate: int = CANONICAL_RATE
    created_at: str = ""
    tool_version: str = TOOL_VERSION
    global_seed: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    def digest(self) -> str:
        """Content digest excluding the creation timestamp."""
        h = hashlib.sha256()
        header = {"schema_version": self.schema_version,
                  "canonical_rate": self.canonical_rate,
                  "tool_version": self.tool_version,
                  "global_seed": self.global_seed}
        h.update(json.dumps(header, sort_keys=True).encode())
        for r in self.records:
            h.update(json.dumps(r.to_json(), sort_keys=True).encode())
        return h.hexdigest()


def write_manifest(records, path, global_seed: int = 0) -> CorpusManifest:
    records = list(records)
    manifest = CorpusManifest(
        records=records, global_seed=global_seed,
        created_at=datetime.now(timezone.utc).isoformat())
    header = {"schema_version": manifest.schema_version,
              "canonical_rate": manifest.canonical_rate,
              "created_at": manifest.created_at,
              "tool_version": manifest.tool_version,
              "global_seed": manifest.global_seed}
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for r in records:
                fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write manifest {path}: {exc}") from exc
    return manifest


def read_manifest(path) -> CorpusManifest:
    """Read a manifest, collecting malformed-line errors instead of failing."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    if not lines:
        raise IoError(f"manifest {path} is empty")
    try:
        header = json.loads(lines[0])
        version = header["schema_version"]
    except (ValueError, KeyError, TypeError) as exc:
        raise IoError(f"manifest {path} has no valid header line") from exc
    if version > SCHEMA_VERSION:
        raise SchemaVersionUnknown(f"schema_version {version} is newer than "
                                   f"supported {SCHEMA_VERSION}")
    manifest = CorpusManifest(
        schema_version=version,
        canonical_rate=header.get("canonical_rate", CANONICAL_RATE),
        created_at=header.get("created_at", ""),
        tool_version=header.get("tool_version", ""),
        global_seed=header.get("global_seed", 0))
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            manifest.records.append(ClipRecord.from_json(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            manifest.errors.append((lineno, f"{type(exc).__name__}: {exc}"))
    return manifest


# --- statistics ---

KEY_ROWS = tuple(f"{pc} {mode}" for mode in ("Minor", "Major")
                 for pc in PITCH_CLASS_NAMES)

DECILES = tuple(f"{lo}-{lo + 9}" for lo in range(0, 100, 10))


@dataclass
class StatsReport:
    total_clips: int
    key: dict
    tempo: dict
    energy: dict
    genre: dict
    instruments: dict  # per-clip occurrence counts
    happiness: dict
    popularity: dict

    def to_json(self) -> dict:
        return {
            "unit": "clips",  # per-clip counts, stated explicitly
            "total_clips": self.total_clips,
            "key_distribution": self.key,
            "tempo_distribution": self.tempo,
            "energy_distribution": self.energy,
            "genre_distribution": self.genre,
            "top_instruments": self.instruments,
            "happiness_distribution": self.happiness,
            "popularity_distribution": self.popularity,
        }

    def to_text(self) -> str:
        out = [f"Corpus statistics ({self.total_clips} clips; all counts are per-clip)"]
        for title, dist in (("Key Distribution", self.key),
                            ("Tempo Distribution", self.tempo),
                            ("Energy Distribution", self.energy),
                            ("Genre Distribution", self.genre),
                            ("Top Instruments", self.instruments),
                            ("Happiness Distribution", self.happiness),
                            ("Popularity Distribution", self.popularity)):
            out.append("")
            out.append(title)
            if not dist:
                out.append("  (none)")
                continue
            width = max(len(k) for k in dist)
            for k, v in dist.items():
                out.append(f"  {k:<{width}}  {v}")
        return "\n".join(out)


def _decile_row(value: int) -> str:
    return DECILES[min(max(int(value), 0), 99) // 10]


def compute_stats(manifest: CorpusManifest) -> StatsReport:
    """Exact per-category counts; deciles as half-open 0-9, 10-19, ... rows."""
    key: dict = {}
    tempo: dict = {}
    energy: dict = {}
    genre: dict = {}
    instruments: dict = {}
    happiness: dict = {}
    popularity: dict = {}
    for r in manifest.records:
        t = r.tags
        if t is None:
            continue
        if t.key is not None:
            key[t.key.name] = key.get(t.key.name, 0) + 1
        tempo[t.tempo_class] = tempo.get(t.tempo_class, 0) + 1
        energy[t.energy_class] = energy.get(t.energy_class, 0) + 1
        if t.genre:
            genre[t.genre] = genre.get(t.genre, 0) + 1
        for inst in t.instruments:
            instruments[inst] = instruments.get(inst, 0) + 1
        if t.happiness is not None:
            row = _decile_row(t.happiness)
            happiness[row] = happiness.get(row, 0) + 1
        if t.popularity is not None:
            row = _decile_row(t.popularity)
            popularity[row] = popularity.get(row, 0) + 1

    def by_count(d):
        return dict(sorted(d.items(), key=lambda kv: (-kv[1], kv[0])))

    def by_decile(d):
        return {row: d[row] for row in DECILES if row in d}

    return StatsReport(total_clips=len(manifest.records),
                       key=by_count(key), tempo=by_count(tempo),
                       energy=by_count(energy), genre=by_count(genre),
                       instruments=by_count(instruments),
                       happiness=by_decile(happiness),
                       popularity=by_decile(popularity))


# --- staged training exports ---

def export_training_manifests(manifest: CorpusManifest,
                              solo_instrument_vocab=DEFAULT_SOLO_VOCAB,
                              solo_allowlist=None) -> dict[str, list[ClipRecord]]:
    """Stage 1: all clips (audio only). Stage 2: exactly-one-instrument
    clips whose instrument is in the solo vocabulary (or whose clip_id is
    allowlisted). Stage 3: clips with non-fallback captions."""
    vocab = {normalize_instrument(v) for v in solo_instrument_vocab}
    allow = set(solo_allowlist or ())
    stage1 = list(manifest.records)
    stage2 = []
    stage3 = []
    for r in manifest.records:
        if r.clip_id in allow:
            stage2.append(r)
        elif r.tags and len(r.tags.instruments) == 1 and \
                normalize_instrument(r.tags.instruments[0]) in vocab:
            stage2.append(r)
        if r.caption is not None and not r.caption.fallback:
            stage3.append(r)
    return {"stage1": stage1, "stage2": stage2, "stage3": stage3}
