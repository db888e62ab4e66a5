"""Rule-based caption writer (stdlib only).

Turns the structured prompt tokens into one fluent English sentence. This
stands in for an LLM backend behind the `caption` task; swapping in a real
model means replacing `caption_from_tokens` and nothing else.
"""

from __future__ import annotations

_TEMPO_PHRASES = {
    "slow": "a slow, unhurried piece",
    "moderate": "a moderately paced piece",
    "upbeat": "an upbeat piece",
    "fast": "a fast, driving piece",
}
_ENERGY_PHRASES = {
    "low": "with a soft, restrained energy",
    "moderate": "with a balanced energy",
    "high": "with a powerful, high energy",
}


def _join(names: list[str]) -> str:
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + " and " + names[-1]


def caption_from_tokens(tokens: list, artist_context: str | None = None) -> str:
    slots: dict[str, str] = {}
    instruments: list[str] = []
    for slot, text in tokens:
        if slot == "instrument":
            instruments.append(str(text).lower())
        else:
            slots[slot] = str(text)

    parts: list[str] = []
    tempo = slots.get("tempo_class", "").lower()
    parts.append(_TEMPO_PHRASES.get(tempo, "a piece"))
    energy = slots.get("energy_class", "").lower()
    if energy in _ENERGY_PHRASES:
        parts.append(_ENERGY_PHRASES[energy])
    if "genre" in slots:
        parts.append(f"in the {slots['genre'].lower()} style")
    if "key" in slots:
        parts.append(f"set in {slots['key'].lower()}")
    if instruments:
        parts.append(f"performed on {_join(sorted(instruments))}")
    if "mood" in slots:
        parts.append(f"evoking a {slots['mood'].lower()} mood")
    if artist_context:
        parts.append(f"in the manner of {artist_context}")

    text = ", ".join(parts) + "."
    return text[0].upper() + text[1:]
