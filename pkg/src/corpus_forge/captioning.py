"""Caption construction: seeded prompt augmentation, template rendering,
and the LLM-adapter path with template fallback."""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from importlib import resources

from .errors import AdapterError, AdapterUnavailable, MissingMandatoryTags
from .tagging import TagSet

MANDATORY_SLOTS = ("tempo_class", "energy_class")


@dataclass(frozen=True)
class PromptSpec:
    """Ordered (slot, text) tokens after rotation/omission, plus context."""

    tokens: tuple[tuple[str, str], ...]
    artist_context: str | None
    seed: int
    omit_probability: float

    @property
    def prompt_hash(self) -> str:
        payload = json.dumps({
            "tokens": [list(t) for t in self.tokens],
            "artist_context": self.artist_context,
            "seed": self.seed,
            "omit_probability": self.omit_probability,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Caption:
    text: str
    source: str  # "template" | "adapter"
    prompt_hash: str
    fallback: bool = False


def clip_seed(track_id: str, clip_index: int, global_seed: int) -> int:
    """Stable per-clip seed so corpus regeneration is parallelism-safe."""
    digest = hashlib.sha256(f"{track_id}:{clip_index}:{global_seed}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def build_prompt(tags: TagSet, artist_context: str | None = None,
                 seed: int = 0, omit_probability: float = 0.2,
                 shuffle: bool = False) -> PromptSpec:
    """Seeded prompt augmentation: optional tokens dropped independently
    with omit_probability, survivors circularly rotated (or shuffled when
    configured). Mandatory tempo/energy tokens never drop."""
    if not tags.tempo_class or not tags.energy_class:
        raise MissingMandatoryTags("tempo_class and energy_class are required")
    mandatory = [("tempo_class", tags.tempo_class),
                 ("energy_class", tags.energy_class)]
    optional: list[tuple[str, str]] = []
    if tags.key is not None:
        optional.append(("key", tags.key.name))
    if tags.genre:
        optional.append(("genre", tags.genre))
    if tags.mood:
        optional.append(("mood", tags.mood))
    for inst in tags.instruments:
        optional.append(("instrument", inst))

    rng = random.Random(seed)
    kept = [tok for tok in optional if rng.random() >= omit_probability]
    tokens = mandatory + kept
    if shuffle:
        rng.shuffle(tokens)
    else:
        offset = rng.randrange(len(tokens))
        tokens = tokens[offset:] + tokens[:offset]
    return PromptSpec(tokens=tuple(tokens), artist_context=artist_context,
                      seed=seed, omit_probability=omit_probability)


def _load_grammar(path: str | None = None) -> dict[str, str]:
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = resources.files("corpus_forge").joinpath(
            "data/caption_grammar.txt").read_text(encoding="utf-8")
    grammar: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        slot, _, template = line.partition(":")
        grammar[slot.strip()] = template.strip()
    return grammar


def render_template_caption(spec: PromptSpec, grammar_path: str | None = None,
                            fallback: bool = False) -> Caption:
    """Deterministic caption from the sentence grammar; no model involved.

    Fragments render in grammar order regardless of token rotation, so two
    specs differing only in rotation produce identical text.
    """
    grammar = _load_grammar(grammar_path)
    values = {slot: text.lower() for slot, text in spec.tokens
              if slot != "instrument"}
    # Sorted so the sentence is a pure function of the token *set*:
    # rotation must not reorder the instrument list.
    instruments = sorted(text.lower() for slot, text in spec.tokens
                         if slot == "instrument")
    if instruments:
        if len(instruments) == 1:
            values["instruments"] = instruments[0]
        else:
            values["instruments"] = ", ".join(instruments[:-1]) + " and " + instruments[-1]
    if spec.artist_context:
        values["artist_context"] = spec.artist_context

    fragments = []
    for slot, template in grammar.items():
        try:
            fragments.append(template.format(**values))
        except KeyError:
            continue  # slot omitted from this prompt
    text = ", ".join(fragments) + "."
    text = text[0].upper() + text[1:]
    return Caption(text=text, source="template", prompt_hash=spec.prompt_hash,
                   fallback=fallback)


def generate_caption(spec: PromptSpec, adapter, fallback_enabled: bool = True,
                     grammar_path: str | None = None) -> Caption:
    """Caption via the adapter task "caption", falling back to the template
    path (flagged) on any adapter failure or empty response."""
    payload = {
        "tokens": [list(t) for t in spec.tokens],
        "artist_context": spec.artist_context,
    }
    try:
        from .adapter import call
        result = call(adapter, "caption", payload)
        text = (result or {}).get("text", "")
        if not isinstance(text, str) or not text.strip():
            raise AdapterUnavailable("adapter returned empty caption")
        return Caption(text=text, source="adapter", prompt_hash=spec.prompt_hash)
    except AdapterError:
        if not fallback_enabled:
            raise
        return render_template_caption(spec, grammar_path=grammar_path,
                                       fallback=True)
