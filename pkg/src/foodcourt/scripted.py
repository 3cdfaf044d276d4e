"""Deterministic scripted agents.

A scripted policy answers every prompt purpose from the machine-readable
context block embedded in each prompt, with no randomness: restaurant turns
come from a per-day action script, customer behavior from declarative
per-customer rules (needs-first, price-first, score-first, loyal, explorer).

The same policy drives two entry points: `ScriptedBackend` (a direct agent
backend) and `ScriptedTransport` (a wire-level transport behind the gateway,
used to produce recordable, replayable runs without a model service).
"""

from __future__ import annotations

import json
import re
from decimal import Decimal
from pathlib import Path

import yaml

from .errors import ConfigError
from .runtime import extract_context_payload
from .util import round_half_up

POLICY_KINDS = ("score_first", "price_first", "needs_first", "loyal", "explorer")

_TOKEN_RE = re.compile(r"[a-z]+")
_STOPWORDS = frozenset({
    "and", "with", "the", "a", "an", "of", "none", "food", "foods", "dish",
    "dishes", "cuisine", "meals", "meal", "options", "low", "free",
})

REASONS = {
    "score_first": "It has the higher customer score and strong recent comments.",
    "price_first": "Their menu is more affordable for my budget.",
    "needs_first": "Their menu has dishes that match my dietary needs.",
    "loyal": "I always eat there, it is my usual spot.",
    "explorer": "I want to try something different today.",
    "explorer_first": "Starting with the newer spot to explore the menu.",
}


def _tokens(text: str) -> set[str]:
    return {t for t in _TOKEN_RE.findall(text.lower())
            if t not in _STOPWORDS and len(t) > 2}


def _mean_price(option: dict) -> Decimal:
    prices = [Decimal(item["price"]) for item in option["menu"]]
    return sum(prices) / len(prices) if prices else Decimal(0)


def _by_price(options: list[dict]) -> dict:
    return sorted(options, key=lambda o: (_mean_price(o), o["name"], o["id"]))[0]


def _by_score(options: list[dict]) -> dict | None:
    scored = [o for o in options if o.get("customer_score") is not None]
    if not scored:
        return None
    return sorted(scored, key=lambda o: (-o["customer_score"], _mean_price(o),
                                         o["name"]))[0]


class ScriptedPolicy:
    """Rule tables for a whole town; pure function of the prompt context."""

    def __init__(self, doc: dict):
        if not isinstance(doc, dict) or doc.get("schema_version") != 1:
            raise ConfigError(["policy.schema-version: unsupported policy file"])
        self.version = str(doc.get("version", "policy-v0"))
        customers = doc.get("customers") or {}
        self.default_kind = customers.get("default", "score_first")
        self.overrides = dict(customers.get("overrides") or {})
        self.scripts: dict[str, dict[int, list[dict]]] = {}
        for rid, days in (doc.get("restaurants") or {}).items():
            self.scripts[str(rid)] = {int(day): list(calls or [])
                                      for day, calls in (days or {}).items()}

    @classmethod
    def from_file(cls, path) -> "ScriptedPolicy":
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        return cls(doc)

    def kind_for(self, name: str) -> str:
        kind = self.overrides.get(name, self.default_kind)
        return kind if kind in POLICY_KINDS else "score_first"

    # -- dispatch -------------------------------------------------------------

    def respond(self, context: dict | None) -> str:
        if not context:
            return ""
        purpose = context.get("purpose")
        handler = getattr(self, f"_{purpose}", None)
        if handler is None:
            return ""
        return handler(context)

    # -- restaurant purposes ----------------------------------------------------

    def _restaurant_turn(self, ctx: dict) -> str:
        rid = ctx["restaurant"]["id"]
        day = ctx["day"]
        calls = self.scripts.get(rid, {}).get(day, [])
        lines = [f"Day {day}: reviewed the books and the rival's menu."]
        if calls:
            lines.append(f"Executing {len(calls)} planned change(s) today.")
        else:
            lines.append("Holding course today; no changes planned.")
        block = json.dumps(calls, indent=2)
        return "\n".join(lines) + "\n\n```json\n" + block + "\n```"

    def _summarize_day(self, ctx: dict) -> str:
        count = len(ctx.get("actions") or [])
        if count:
            return (f"Day {ctx['day']}: committed {count} change(s); "
                    "watching customer flow for the effect.")
        return f"Day {ctx['day']}: steady operations, no changes."

    # -- customer purposes --------------------------------------------------------

    def _choose_restaurant(self, ctx: dict) -> str:
        profile = self._lead_profile(ctx["unit"])
        rid, reason = self.pick(self.kind_for(profile["name"]), profile,
                                ctx["options"], ctx.get("history") or [])
        block = json.dumps({"choice": rid, "reason": reason})
        return f"{reason}\n\n```json\n{block}\n```"

    def _group_utterance(self, ctx: dict) -> str:
        profile = self._member_profile(ctx["unit"], ctx["member"])
        rid, reason = self.pick(self.kind_for(ctx["member"]), profile,
                                ctx["options"], ctx.get("history") or [])
        name = next(o["name"] for o in ctx["options"] if o["id"] == rid)
        return f"I'd prefer {name}. {reason}"

    def _group_vote(self, ctx: dict) -> str:
        profile = self._member_profile(ctx["unit"], ctx["member"])
        rid, _ = self.pick(self.kind_for(ctx["member"]), profile,
                           ctx["options"], ctx.get("history") or [])
        return "```json\n" + json.dumps({"vote": rid}) + "\n```"

    def _order_dishes(self, ctx: dict) -> str:
        menu = ctx["menu"]
        party = int(ctx["party_size"])
        budget = Decimal(ctx["budget"])
        profile = self._lead_profile(ctx["unit"])
        choice = self._pick_dish(menu, party, budget, profile)
        block = json.dumps({"items": [{"name": choice, "quantity": party}]})
        return f"We'll take the {choice}.\n\n```json\n{block}\n```"

    def _review(self, ctx: dict) -> str:
        scores = ctx.get("dish_scores") or []
        items = dict((n, q) for n, q in ctx.get("items") or [])
        weighted = sum(s * items.get(n, 1) for n, s in scores)
        quantity = sum(items.get(n, 1) for n, _ in scores) or 1
        mean = weighted / quantity
        score = int(min(10, max(1, round_half_up(10 * mean))))
        top = scores[0][0] if scores else "the meal"
        adjective = ("excellent" if score >= 8 else "solid" if score >= 6
                     else "passable" if score >= 4 else "disappointing")
        name = ctx["restaurant"]["name"]
        payload = {
            "experience": f"The {top} at {name} was {adjective}.",
            "score": score,
            "comment": f"{top} was {adjective}; the kitchen knows its craft."
            if score >= 6 else f"{top} was {adjective}; expected better.",
        }
        return ("A fair meal overall.\n\n```json\n"
                + json.dumps(payload) + "\n```")

    # -- selection rules -------------------------------------------------------------

    def pick(self, kind: str, profile: dict, options: list[dict],
             history: list) -> tuple[str, str]:
        """Choose a restaurant id plus the stated reason for the choice."""
        options = sorted(options, key=lambda o: o["id"])
        if kind == "needs_first":
            wanted = _tokens(profile.get("dietary_restriction", "")) | _tokens(
                profile.get("taste", ""))
            def matches(option):
                count = 0
                for item in option["menu"]:
                    text = _tokens(item["name"]) | _tokens(item.get("description", ""))
                    if wanted & text:
                        count += 1
                return count
            ranked = sorted(options, key=lambda o: (-matches(o), _mean_price(o),
                                                    o["name"]))
            if matches(ranked[0]) > 0:
                return ranked[0]["id"], REASONS["needs_first"]
            kind = "score_first"
        if kind == "loyal":
            if history:
                counts: dict[str, int] = {}
                for _, rid in history:
                    counts[rid] = counts.get(rid, 0) + 1
                open_ids = {o["id"] for o in options}
                ranked = sorted(
                    (rid for rid in counts if rid in open_ids),
                    key=lambda rid: (-counts[rid], rid))
                if ranked:
                    return ranked[0], REASONS["loyal"]
            kind = "price_first"
        if kind == "explorer":
            if history:
                last = history[-1][1]
                others = [o for o in options if o["id"] != last]
                target = others[0] if others else options[0]
                return target["id"], REASONS["explorer"]
            return options[-1]["id"], REASONS["explorer_first"]
        if kind == "score_first":
            best = _by_score(options)
            if best is not None:
                return best["id"], REASONS["score_first"]
            kind = "price_first"
        return _by_price(options)["id"], REASONS["price_first"]

    def _pick_dish(self, menu: list[dict], party: int, budget: Decimal,
                   profile: dict) -> str:
        by_price = sorted(menu, key=lambda d: (Decimal(d["price"]), d["name"]))
        affordable = [d for d in by_price if Decimal(d["price"]) * party <= budget]
        wanted = _tokens(profile.get("dietary_restriction", "")) | _tokens(
            profile.get("taste", ""))
        for dish in affordable:
            text = _tokens(dish["name"]) | _tokens(dish.get("description", ""))
            if wanted & text:
                return dish["name"]
        pool = affordable or by_price
        return pool[0]["name"]

    @staticmethod
    def _lead_profile(unit: dict) -> dict:
        if unit["kind"] == "individual":
            return unit["profile"]
        return unit["members"][0]

    @staticmethod
    def _member_profile(unit: dict, name: str) -> dict:
        if unit["kind"] == "individual":
            return unit["profile"]
        for member in unit["members"]:
            if member["name"] == name:
                return member
        return unit["members"][0]


class ScriptedBackend:
    """Agent backend that answers from the prompt's context block."""

    def __init__(self, policy: ScriptedPolicy):
        self.policy = policy
        self.identity = f"scripted:{policy.version}"

    def complete(self, system: str, messages: list[dict]) -> str:
        return self.policy.respond(extract_context_payload(messages))


class ScriptedTransport:
    """Wire-level stand-in for a model service; lets the gateway record and
    replay fully deterministic runs."""

    def __init__(self, policy: ScriptedPolicy):
        self.policy = policy
        self.calls = 0

    def send(self, payload: dict) -> tuple[str, dict]:
        self.calls += 1
        text = self.policy.respond(extract_context_payload(payload.get("messages", [])))
        prompt_chars = sum(len(m.get("content", "")) for m in payload.get("messages", []))
        usage = {"prompt_tokens": prompt_chars // 4,
                 "completion_tokens": len(text) // 4}
        return text, usage
