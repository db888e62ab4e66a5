"""Corpus evaluation: feature-distribution KLD and chroma cosine similarity,
including the conditioning-prefix sweep."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioBuffer, decode_audio
from .dsp import chroma, estimate_tempo, mean_chroma, rms_energy
from .errors import (EmptyCorpus, FeatureMissing, PrefixLongerThanClip, TooShort)
from .manifest import CorpusManifest
from .tagging import mean_rms_dbfs

SUBSETS = ("multi_instrument", "solo_instrument", "pop")
CONDITIONS = ("text", "text+1s", "text+3s", "text+5s")
CONDITION_PREFIX = {"text": 0.0, "text+1s": 1.0, "text+3s": 3.0, "text+5s": 5.0}

HIST_BINS = 32
SMOOTHING_ALPHA = 1e-6

# Fixed histogram ranges per feature dimension; out-of-range values clamp
# to the edge bins.
FEATURE_RANGES = [(0.0, 1.0)] * 12 + [(60.0, 180.0), (-60.0, 0.0)]
FEATURE_NAMES = [f"chroma_{i}" for i in range(12)] + ["bpm", "mean_rms_dbfs"]


@dataclass(frozen=True)
class EvalPair:
    generated_path: str
    reference_path: str
    subset: str
    condition: str

    def __post_init__(self):
        if self.subset not in SUBSETS:
            raise ValueError(f"unknown subset {self.subset!r}")
        if self.condition not in CONDITION_PREFIX:
            raise ValueError(f"unknown condition {self.condition!r}")

    @property
    def prefix_seconds(self) -> float:
        return CONDITION_PREFIX[self.condition]


@dataclass(frozen=True)
class PairSimilarity:
    value: float
    silent: bool = False


@dataclass
class MetricsReport:
    cells: dict = field(default_factory=dict)   # (condition, subset) -> stats
    subset_kld: dict = field(default_factory=dict)
    empty_cells: list = field(default_factory=list)
    prefix_excluded: bool = True

    def to_json(self) -> dict:
        return {
            "prefix_excluded": self.prefix_excluded,
            "chroma_similarity": {
                f"{cond}|{sub}": stats for (cond, sub), stats in self.cells.items()
            },
            "subset_kld": self.subset_kld,
            "empty_cells": [list(c) for c in self.empty_cells],
        }

    def to_text(self) -> str:
        mode = "excluded" if self.prefix_excluded else "included"
        out = [f"Chroma similarity by condition (prefix region {mode})", ""]
        subsets = [s for s in SUBSETS
                   if any(sub == s for _, sub in self.cells)]
        header = f"{'condition':<12}" + "".join(f"{s:>18}" for s in subsets)
        out.append(header)
        for cond in CONDITIONS:
            row = f"{cond:<12}"
            any_cell = False
            for s in subsets:
                stats = self.cells.get((cond, s))
                if stats is None:
                    row += f"{'-':>18}"
                else:
                    any_cell = True
                    row += f"{stats['mean']:>12.4f} n={stats['n']:<4d}"
            if any_cell:
                out.append(row)
        if self.subset_kld:
            out.append("")
            out.append("KLD (reference || generated) per subset")
            for s, v in self.subset_kld.items():
                out.append(f"  {s:<18} {v:.4f}")
        return "\n".join(out)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> PairSimilarity:
    """Cosine of two nonnegative chroma vectors; exact 1.0 for equal
    vectors, 0.0 (flagged) when either side is the zero vector."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return PairSimilarity(value=0.0, silent=True)
    if np.array_equal(a, b):
        return PairSimilarity(value=1.0)
    value = float(np.clip(a @ b / (na * nb), 0.0, 1.0))
    return PairSimilarity(value=value)


def _as_buffer(clip) -> AudioBuffer:
    return clip if isinstance(clip, AudioBuffer) else decode_audio(str(clip))


def chroma_pair_similarity(generated, reference,
                           exclude_prefix_seconds: float = 0.0) -> PairSimilarity:
    """Cosine similarity of clip-level mean chroma; the first
    exclude_prefix_seconds of the *generated* clip are removed first so a
    copied conditioning prefix cannot inflate the score."""
    gen = _as_buffer(generated)
    ref = _as_buffer(reference)
    if exclude_prefix_seconds > 0:
        if exclude_prefix_seconds >= gen.duration_seconds:
            raise PrefixLongerThanClip(
                f"prefix {exclude_prefix_seconds} s >= clip "
                f"{gen.duration_seconds:.2f} s")
        start = int(round(exclude_prefix_seconds * gen.sample_rate))
        gen = AudioBuffer(gen.samples[:, start:], gen.sample_rate,
                          source_path=gen.source_path)
    return cosine_similarity(mean_chroma(chroma(gen)), mean_chroma(chroma(ref)))


def clip_feature_vector(buffer: AudioBuffer) -> np.ndarray:
    """14-dim feature vector: 12 mean-chroma bins, bpm, mean RMS dBFS.
    NaN marks dimensions that cannot be computed (e.g. bpm on short clips)."""
    vec = np.empty(14)
    vec[:12] = mean_chroma(chroma(buffer))
    try:
        vec[12] = estimate_tempo(buffer).bpm
    except TooShort:
        vec[12] = np.nan
    db = mean_rms_dbfs(rms_energy(buffer))
    vec[13] = db if np.isfinite(db) else -60.0
    return vec


def manifest_feature_matrix(manifest: CorpusManifest) -> np.ndarray:
    if not manifest.records:
        raise EmptyCorpus("manifest has no records")
    rows = []
    for r in manifest.records:
        f = r.features or {}
        if "mean_chroma" not in f or "bpm" not in f or "mean_rms_dbfs" not in f:
            raise FeatureMissing(f"clip {r.clip_id} lacks features")
        rows.append(list(f["mean_chroma"]) + [f["bpm"], f["mean_rms_dbfs"]])
    return np.asarray(rows, dtype=np.float64)


def _smoothed_histogram(values: np.ndarray, lo: float, hi: float,
                        bins: int, alpha: float) -> np.ndarray:
    values = values[np.isfinite(values)]
    if values.size == 0:
        return np.full(bins, 1.0 / bins)
    clamped = np.clip(values, lo, np.nextafter(hi, lo))
    counts, _ = np.histogram(clamped, bins=bins, range=(lo, hi))
    p = counts / counts.sum()
    p = p + alpha
    return p / p.sum()


def features_kld(gen_features: np.ndarray, ref_features: np.ndarray,
                 bins: int = HIST_BINS,
                 alpha: float = SMOOTHING_ALPHA) -> tuple[float, dict[str, float]]:
    """Mean per-dimension KL(reference || generated) over smoothed
    fixed-range histograms. Asymmetric by definition; the direction
    penalizes generated corpora that miss reference modes."""
    breakdown = {}
    for d, (name, (lo, hi)) in enumerate(zip(FEATURE_NAMES, FEATURE_RANGES)):
        p = _smoothed_histogram(ref_features[:, d], lo, hi, bins, alpha)
        q = _smoothed_histogram(gen_features[:, d], lo, hi, bins, alpha)
        breakdown[name] = float(np.sum(p * np.log(p / q)))
    return float(np.mean(list(breakdown.values()))), breakdown


def corpus_kld(generated: CorpusManifest, reference: CorpusManifest,
               bins: int = HIST_BINS,
               alpha: float = SMOOTHING_ALPHA) -> tuple[float, dict[str, float]]:
    return features_kld(manifest_feature_matrix(generated),
                        manifest_feature_matrix(reference),
                        bins=bins, alpha=alpha)


def read_pairs(path) -> list[EvalPair]:
    """Pairing file: line-delimited JSON of EvalPair fields."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            pairs.append(EvalPair(generated_path=d["generated_path"],
                                  reference_path=d["reference_path"],
                                  subset=d["subset"],
                                  condition=d["condition"]))
    return pairs


def conditioning_sweep(pairs, exclude_prefix: bool = True,
                       compute_kld: bool = True) -> MetricsReport:
    """Fill the condition x subset chroma grid plus per-subset KLD."""
    report = MetricsReport(prefix_excluded=exclude_prefix)
    by_cell: dict[tuple[str, str], list[float]] = {}
    by_subset: dict[str, tuple[list, list]] = {}
    for p in pairs:
        prefix = p.prefix_seconds if exclude_prefix else 0.0
        sim = chroma_pair_similarity(p.generated_path, p.reference_path,
                                     exclude_prefix_seconds=prefix)
        by_cell.setdefault((p.condition, p.subset), []).append(sim.value)
        by_subset.setdefault(p.subset, ([], []))
        by_subset[p.subset][0].append(p.generated_path)
        by_subset[p.subset][1].append(p.reference_path)

    for cond in CONDITIONS:
        for sub in SUBSETS:
            values = by_cell.get((cond, sub))
            if not values:
                if any(p.subset == sub for p in pairs):
                    report.empty_cells.append((cond, sub))
                continue
            arr = np.asarray(values)
            report.cells[(cond, sub)] = {
                "mean": float(arr.mean()),
                "std": float(arr.std()),
                "n": int(arr.size),
            }

    if compute_kld:
        for sub, (gen_paths, ref_paths) in sorted(by_subset.items()):
            gen = np.array([clip_feature_vector(decode_audio(p))
                            for p in sorted(set(gen_paths))])
            ref = np.array([clip_feature_vector(decode_audio(p))
                            for p in sorted(set(ref_paths))])
            report.subset_kld[sub], _ = features_kld(gen, ref)
    return report
