"""Template surface realisation: placeholder filling, verb conjugation,
number formatting.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import RealizationError
from .schema_model import Tense

_IRREGULAR = {
    "be": {
        (Tense.PRESENT, 2): "are",
        (Tense.PRESENT, 3): "is",
        (Tense.PAST, 2): "were",
        (Tense.PAST, 3): "was",
    },
    "have": {
        (Tense.PRESENT, 2): "have",
        (Tense.PRESENT, 3): "has",
        (Tense.PAST, 2): "had",
        (Tense.PAST, 3): "had",
    },
    "do": {
        (Tense.PRESENT, 2): "do",
        (Tense.PRESENT, 3): "does",
        (Tense.PAST, 2): "did",
        (Tense.PAST, 3): "did",
    },
}

_VOWELS = "aeiou"
_ES_ENDINGS = ("s", "x", "z", "ch", "sh", "o")

_PLACEHOLDER_RE = re.compile(r"\{([^{}]*)\}")
# person defaults to 3 (the measurement) when omitted, as in {tense(be)}
_TENSE_RE = re.compile(r"tense\(\s*([a-z]+)\s*(?:,\s*([23])\s*)?\)")


@dataclass(frozen=True)
class VerbSpec:
    lemma: str
    person: int  # 2 = the user, 3 = the measurement
    tense: Tense

    def __post_init__(self):
        if self.person not in (2, 3):
            raise RealizationError(f"verb person must be 2 or 3, got {self.person}")
        if self.lemma != self.lemma.lower():
            raise RealizationError(f"verb lemma must be lowercase: {self.lemma!r}")


def _third_person_present(lemma: str) -> str:
    if lemma.endswith("y") and len(lemma) > 1 and lemma[-2] not in _VOWELS:
        return lemma[:-1] + "ies"
    if lemma.endswith(_ES_ENDINGS):
        return lemma + "es"
    return lemma + "s"


def _regular_past(lemma: str) -> str:
    if lemma.endswith("e"):
        return lemma + "d"
    if lemma.endswith("y") and len(lemma) > 1 and lemma[-2] not in _VOWELS:
        return lemma[:-1] + "ied"
    # consonant-vowel-consonant doubling for short stems (stop -> stopped)
    if (
        len(lemma) >= 3
        and lemma[-1] not in _VOWELS + "wxy"
        and lemma[-2] in _VOWELS
        and lemma[-3] not in _VOWELS
    ):
        return lemma + lemma[-1] + "ed"
    return lemma + "ed"


def conjugate(verb: VerbSpec) -> str:
    """Conjugate by irregular table (be/have/do) or regular inflection rules;
    unknown verbs are treated as regular."""
    if verb.lemma in _IRREGULAR:
        return _IRREGULAR[verb.lemma][(verb.tense, verb.person)]
    if verb.tense is Tense.PAST:
        return _regular_past(verb.lemma)
    if verb.person == 3:
        return _third_person_present(verb.lemma)
    return verb.lemma


def format_quantity(value: float, decimals: int, unit: str = "") -> str:
    """Round-half-even at the declared number of decimals; unit appended with
    a space when present."""
    text = f"{value:.{decimals}f}"
    return f"{text} {unit}" if unit else text


def percent_diff(a: float, b: float) -> float:
    """Relative difference of a from b as a positive percentage of b,
    rounded half-even to 2 decimals."""
    if b == 0:
        raise RealizationError("percent_diff reference value must be non-zero")
    if a == b:
        return 0.0
    diff = (b - a) if a < b else (a - b)
    return round(100.0 * diff / b, 2)


def realize(template: str, binding: dict[str, object], tense: Tense) -> str:
    """Fill every placeholder in the template.

    `{tense(verb,x)}` placeholders resolve through conjugate(); everything
    else looks up the binding (numbers are rendered with str()). Whitespace
    is collapsed and the first character capitalized.
    """
    if template.count("{") != template.count("}"):
        raise RealizationError("malformed placeholder syntax: unbalanced braces")

    def fill(match: re.Match) -> str:
        name = match.group(1).strip()
        tense_match = _TENSE_RE.fullmatch(name)
        if tense_match:
            person = int(tense_match.group(2) or 3)
            return conjugate(VerbSpec(tense_match.group(1), person, tense))
        if name not in binding:
            raise RealizationError(f"missing binding for placeholder {name!r}")
        return str(binding[name])

    text = _PLACEHOLDER_RE.sub(fill, template)
    if "{" in text or "}" in text:
        raise RealizationError("malformed placeholder syntax: stray brace in template")
    text = re.sub(r"\s+", " ", text).strip()
    if text:
        text = text[0].upper() + text[1:]
    return text
