"""Rule-first classifier for customer decision reasons.

An ordered keyword table maps free-text reasons onto six categories. Rules are
checked top to bottom and the first hit wins, which keeps classification
deterministic and replay-safe. Texts no rule matches can optionally be sent to
a backend with a constrained single-label prompt; offline they default to
"core_needs" and are flagged low-confidence.
"""

from __future__ import annotations

import re
from pathlib import Path

import yaml

from .errors import RequestCapExceeded, TransportError

RULES_VERSION = "rules-v1"

REASON_CATEGORIES = (
    "core_needs",
    "brand_loyalty",
    "reputation",
    "affordable",
    "signature_dish",
    "explore_new",
)

# Ordered rule table: (category, phrase patterns). Word boundaries throughout;
# earlier rows shadow later ones on mixed texts.
_RULE_TABLE: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("core_needs", (
        r"vegetarian", r"vegan", r"gluten", r"diabet", r"sugar[- ]free",
        r"low (?:sugar|sodium|fat|calorie|cholesterol)", r"dietary",
        r"restriction", r"allerg", r"health", r"\bneeds?\b", r"craving",
        r"\bdiet\b", r"my taste", r"suits? (?:my|our) taste",
    )),
    ("brand_loyalty", (
        r"\balways\b", r"loyal", r"\busual\b", r"\bregulars?\b", r"go[- ]to",
        r"our place", r"every time", r"\bhabit\b", r"never let (?:me|us) down",
        r"stick(?:ing)? (?:with|to)",
    )),
    ("reputation", (
        r"\bscores?\b", r"\brating", r"\breviews?\b", r"\bcomments?\b",
        r"reputation", r"\bstars\b", r"highly rated", r"well[- ]reviewed",
        r"praised", r"word of mouth",
    )),
    ("affordable", (
        r"afford", r"\bcheap", r"\bbudget\b", r"\bprices?\b", r"inexpensive",
        r"good value", r"\bcost\b", r"economical", r"wallet", r"save money",
    )),
    ("signature_dish", (
        r"signature", r"famous for", r"specialty", r"renowned",
        r"known for", r"best[- ]known", r"must[- ]try dish",
    )),
    ("explore_new", (
        r"\bnew\b", r"try something", r"explore", r"curious", r"novel",
        r"\bvariety\b", r"change of pace", r"something different",
        r"switch things up", r"adventurous",
    )),
)

_COMPILED = tuple(
    (category, tuple(re.compile(p, re.IGNORECASE) for p in patterns))
    for category, patterns in _RULE_TABLE
)

_FALLBACK_PROMPT = (
    "Classify the reason a diner gave for picking a restaurant into exactly one "
    "label from this list: core_needs, brand_loyalty, reputation, affordable, "
    "signature_dish, explore_new. Reply with the label only.\n\nReason: {text}"
)


def classify_rules(text: str) -> str | None:
    """First matching category from the rule table, or None."""
    for category, patterns in _COMPILED:
        for pattern in patterns:
            if pattern.search(text):
                return category
    return None


def classify_reason(text: str, backend=None) -> tuple[str, str]:
    """Classify one reason text.

    Returns (category, source) where source is "rule", "backend", or
    "default". The backend path is only taken for texts the rule table does
    not cover and only when a backend is supplied.
    """
    category = classify_rules(text)
    if category is not None:
        return category, "rule"
    if backend is not None:
        try:
            reply = backend.complete(
                "You label short texts with exactly one category name.",
                [{"role": "user", "content": _FALLBACK_PROMPT.format(text=text)}],
            ).strip().lower()
        except RequestCapExceeded:
            raise
        except TransportError:
            reply = ""
        for candidate in REASON_CATEGORIES:
            if candidate in reply:
                return candidate, "backend"
    return "core_needs", "default"


def load_corpus(path=None) -> list[tuple[str, str]]:
    """The bundled hand-labeled (text, label) pairs the rule table is pinned to."""
    if path is None:
        from importlib import resources
        path = Path(str(resources.files("foodcourt") / "data" / "reason_corpus.yaml"))
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    return [(item["text"], item["label"]) for item in doc["items"]]
