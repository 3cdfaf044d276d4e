"""Customer judges: restaurant choice, group discussion and voting, dish
ordering under a per-meal budget, and comment emission.

Every operation that consults a backend repairs malformed replies with bounded
retries and then falls back to a deterministic rule, so a run always
completes. Fallbacks are reported to the caller for run-log warnings.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from decimal import Decimal

from .domain import Comment, Unit, money
from .errors import RequestCapExceeded, TransportError
from .reasons import classify_reason
from .restaurant import FrozenMenu, Order, PublicInfo, make_order
from .runtime import AgentBackend, TemplateSet, extract_fenced_blocks
from .util import round_half_up

CUSTOMER_RETRIES = 3
DEFAULT_BUDGET_RATIO = Decimal("0.004")
DEFAULT_COMMENT_RATE = 0.7

FORCED_CHOICE_REASON = "It was the only option open today."


@dataclass(frozen=True)
class DecisionRecord:
    day: int
    unit_id: str
    restaurant_id: str
    reason: str
    category: str
    category_source: str
    votes: tuple[tuple[str, str], ...] | None = None  # (member, restaurant id)
    discussion: tuple[tuple[str, str], ...] = ()      # (member, utterance)
    forced: bool = False
    fallback: bool = False


@dataclass(frozen=True)
class DiningExperience:
    unit_id: str
    day: int
    restaurant_id: str
    items: tuple[tuple[str, int], ...]
    dish_scores: tuple[tuple[str, float], ...]
    text: str
    comment: Comment | None
    fallback_score: bool = False


def meal_budget(unit: Unit, ratio: Decimal = DEFAULT_BUDGET_RATIO) -> Decimal:
    """Per-meal budget: a fixed share of monthly income per person, pooled
    across group members."""
    total = Decimal(0)
    for profile in unit.profiles:
        total += money(profile.monthly_income * ratio)
    return total


def majority_vote(votes, leader_vote: str) -> str:
    """Plurality winner; ties go to the leader's vote."""
    if not votes:
        raise ValueError("votes must be non-empty")
    counts = Counter(votes)
    best = max(counts.values())
    leaders = sorted(rid for rid, n in counts.items() if n == best)
    if len(leaders) == 1:
        return leaders[0]
    return leader_vote if leader_vote in leaders else leaders[0]


# --- prompt assembly ----------------------------------------------------------


def persona_text(unit: Unit, member_index: int = 0) -> str:
    profile = unit.profiles[member_index]
    parts = [
        f"You are {profile.name}.",
        f"Monthly income: {profile.monthly_income}.",
        f"Favorite food: {profile.taste}.",
        f"Health: {profile.health}.",
        f"Dietary restriction: {profile.dietary_restriction}.",
        f"Personality: {profile.personality}.",
    ]
    if unit.kind == "group":
        role = unit.roles[member_index] if member_index < len(unit.roles) else "Member"
        others = ", ".join(n for i, n in enumerate(unit.member_names)
                           if i != member_index)
        parts.append(f"You dine with your {unit.group_type} group "
                     f"({unit.feature}) as {role}, together with {others}.")
    return " ".join(parts)


def unit_payload(unit: Unit) -> dict:
    if unit.kind == "individual":
        p = unit.profiles[0]
        return {"id": unit.unit_id, "kind": "individual", "profile": {
            "name": p.name, "monthly_income": str(p.monthly_income),
            "income_band": p.income_band, "taste": p.taste, "health": p.health,
            "dietary_restriction": p.dietary_restriction,
            "personality": p.personality}}
    return {"id": unit.unit_id, "kind": "group", "type": unit.group_type,
            "feature": unit.feature, "members": [
                {"name": p.name, "role": unit.roles[i],
                 "monthly_income": str(p.monthly_income),
                 "income_band": p.income_band, "taste": p.taste,
                 "health": p.health,
                 "dietary_restriction": p.dietary_restriction,
                 "personality": p.personality}
                for i, p in enumerate(unit.profiles)]}


def _options_section(options) -> str:
    lines = []
    for info in options:
        score = "no rating yet" if info.customer_score is None else str(info.customer_score)
        menu = "; ".join(f"{n} ({p})" for n, p, _ in info.menu)
        lines.append(f'Restaurant "{info.name}" [id {info.rid}]')
        lines.append(f"- customer score: {score}")
        if info.advertisement:
            lines.append(f"- advertisement: {info.advertisement}")
        lines.append(f"- menu: {menu}")
        for day, author, score_value, content in info.comments[-5:]:
            lines.append(f"- comment (day {day}, score {score_value}) {author}: {content}")
        lines.append("")
    return "\n".join(lines)


def _history_section(history) -> str:
    if not history:
        return ""
    lines = [f"- day {d}: {rid}" for d, rid in history]
    return "Your recent choices:\n" + "\n".join(lines) + "\n\n"


def _choose_context(unit, options, history, day) -> str:
    return json.dumps({
        "purpose": "choose_restaurant",
        "day": day,
        "unit": unit_payload(unit),
        "options": [o.to_payload() for o in options],
        "history": [[d, rid] for d, rid in history],
    }, sort_keys=True, separators=(",", ":"))


def _parse_json_reply(completion: str) -> dict | None:
    blocks = extract_fenced_blocks(completion)
    if not blocks:
        return None
    try:
        data = json.loads(blocks[-1][1])
    except json.JSONDecodeError:
        return None
    return data if isinstance(data, dict) else None


def _match_restaurant(value, options) -> str | None:
    if not isinstance(value, str):
        return None
    for info in options:
        if value == info.rid or value == info.name:
            return info.rid
    lowered = value.strip().lower()
    for info in options:
        if lowered in (info.rid.lower(), info.name.lower()):
            return info.rid
    return None


def fallback_choice(options) -> str:
    """Deterministic default: higher customer score, ties by restaurant name."""
    def sort_key(info: PublicInfo):
        score = info.customer_score if info.customer_score is not None else -1.0
        return (-score, info.name, info.rid)
    return sorted(options, key=sort_key)[0].rid


# --- decisions -----------------------------------------------------------------


def decide_individual(backend: AgentBackend, unit: Unit, options, history,
                      templates: TemplateSet,
                      retries: int = CUSTOMER_RETRIES) -> DecisionRecord:
    """One individual's daily restaurant choice. A single open restaurant is a
    forced choice and consults no backend."""
    day = _day_of(options)
    if len(options) == 1:
        return _record(day, unit, options[0].rid, FORCED_CHOICE_REASON, forced=True)

    system = templates.render("customer_system", persona=persona_text(unit))
    user = templates.render(
        "customer_decide", day=day,
        options_section=_options_section(options),
        history_section=_history_section(history),
        context_json=_choose_context(unit, options, history, day))
    messages = [{"role": "user", "content": user}]

    for attempt in range(1, retries + 1):
        try:
            completion = backend.complete(system, messages)
        except RequestCapExceeded:
            raise
        except TransportError:
            break
        data = _parse_json_reply(completion)
        diagnostics = []
        if data is None:
            diagnostics.append('reply must end with a fenced json block '
                               '{"choice": ..., "reason": ...}')
        else:
            rid = _match_restaurant(data.get("choice"), options)
            reason = data.get("reason")
            if rid is None:
                diagnostics.append(f"choice {data.get('choice')!r} names no open restaurant")
            if not isinstance(reason, str) or not reason.strip():
                diagnostics.append("reason must be a non-empty sentence")
            if not diagnostics:
                return _record(day, unit, rid, reason.strip())
        if attempt < retries:
            messages.append({"role": "assistant", "content": completion})
            messages.append({"role": "user", "content": templates.render(
                "customer_retry",
                diagnostics="\n".join(f"- {d}" for d in diagnostics))})

    rid = fallback_choice(options)
    return _record(day, unit, rid, "Chosen by standing rule: best available rating.",
                   fallback=True)


def group_discuss(backend: AgentBackend, unit: Unit, options, history,
                  templates: TemplateSet,
                  retries: int = CUSTOMER_RETRIES) -> DecisionRecord:
    """Group protocol: one utterance per member in roster order, then one vote
    per member; plurality wins with ties broken by the first-listed member."""
    day = _day_of(options)
    if len(options) == 1:
        return _record(day, unit, options[0].rid, FORCED_CHOICE_REASON, forced=True,
                       votes=tuple((n, options[0].rid) for n in unit.member_names))

    group_label = f"{unit.group_type}: {unit.feature}" if unit.feature else unit.group_type
    discussion: list[tuple[str, str]] = []
    for i, profile in enumerate(unit.profiles):
        system = templates.render("customer_system", persona=persona_text(unit, i))
        context = json.dumps({
            "purpose": "group_utterance", "day": day,
            "member": profile.name, "role": unit.roles[i],
            "unit": unit_payload(unit),
            "options": [o.to_payload() for o in options],
            "discussion": [[n, u] for n, u in discussion],
            "history": [[d, rid] for d, rid in history],
        }, sort_keys=True, separators=(",", ":"))
        discussion_section = ""
        if discussion:
            discussion_section = ("So far the group said:\n" + "\n".join(
                f"- {n}: {u}" for n, u in discussion) + "\n\n")
        prompt = templates.render(
            "group_utterance", day=day, group_label=group_label,
            member_name=profile.name, member_role=unit.roles[i],
            options_section=_options_section(options),
            discussion_section=discussion_section,
            context_json=context)
        try:
            utterance = backend.complete(
                system, [{"role": "user", "content": prompt}]).strip()
        except RequestCapExceeded:
            raise
        except TransportError:
            utterance = ""
        discussion.append((profile.name, utterance or "(no comment)"))

    votes: list[tuple[str, str]] = []
    any_fallback = False
    for i, profile in enumerate(unit.profiles):
        rid = _collect_vote(backend, unit, i, options, discussion, history,
                            day, templates, retries)
        if rid is None:
            # Unparseable after retries: side with the leader's current preference.
            rid = votes[0][1] if votes else fallback_choice(options)
            any_fallback = True
        votes.append((profile.name, rid))

    chosen = majority_vote([rid for _, rid in votes], leader_vote=votes[0][1])
    reason = next((u for n, u in discussion
                   if dict(votes).get(n) == chosen and u != "(no comment)"),
                  discussion[0][1])
    return _record(day, unit, chosen, reason, votes=tuple(votes),
                   discussion=tuple(discussion), fallback=any_fallback)


def _collect_vote(backend, unit, member_index, options, discussion, history,
                  day, templates, retries) -> str | None:
    profile = unit.profiles[member_index]
    system = templates.render("customer_system",
                              persona=persona_text(unit, member_index))
    context = json.dumps({
        "purpose": "group_vote", "day": day,
        "member": profile.name, "role": unit.roles[member_index],
        "unit": unit_payload(unit),
        "options": [o.to_payload() for o in options],
        "discussion": [[n, u] for n, u in discussion],
        "history": [[d, rid] for d, rid in history],
    }, sort_keys=True, separators=(",", ":"))
    discussion_section = ("The group discussion:\n" + "\n".join(
        f"- {n}: {u}" for n, u in discussion) + "\n\n")
    prompt = templates.render(
        "group_vote", day=day, member_name=profile.name,
        member_role=unit.roles[member_index],
        discussion_section=discussion_section, context_json=context)
    messages = [{"role": "user", "content": prompt}]
    for attempt in range(1, retries + 1):
        try:
            completion = backend.complete(system, messages)
        except RequestCapExceeded:
            raise
        except TransportError:
            return None
        data = _parse_json_reply(completion)
        rid = _match_restaurant((data or {}).get("vote"), options)
        if rid is not None:
            return rid
        if attempt < retries:
            messages.append({"role": "assistant", "content": completion})
            messages.append({"role": "user", "content": templates.render(
                "customer_retry",
                diagnostics='- reply must end with {"vote": "<restaurant id>"}')})
    return None


def _day_of(options) -> int:
    # All PublicInfo views for a day are built from the same freeze.
    return options[0].day


def _record(day, unit, rid, reason, votes=None, discussion=(), forced=False,
            fallback=False) -> DecisionRecord:
    category, source = classify_reason(reason)
    return DecisionRecord(
        day=day, unit_id=unit.unit_id, restaurant_id=rid, reason=reason,
        category=category, category_source=source, votes=votes,
        discussion=tuple(discussion), forced=forced, fallback=fallback)


# --- ordering and reviews --------------------------------------------------------


def cheapest_dish(frozen: FrozenMenu):
    return sorted(frozen.dishes, key=lambda d: (d.price, d.key))[0]


def order_dishes(backend: AgentBackend, unit: Unit, frozen: FrozenMenu,
                 budget: Decimal, restaurant_name: str, templates: TemplateSet,
                 day: int, retries: int = CUSTOMER_RETRIES
                 ) -> tuple[Order, bool, bool]:
    """Order 1-2 dishes per person within budget.

    Returns (order, over_budget, fallback). When nothing on the menu is
    affordable, everyone gets the single cheapest dish and over_budget is True.
    """
    party = unit.party_size
    menu_section = "\n".join(
        f"- {d.name}: {d.price}" + (f" ({d.description})" if d.description else "")
        for d in frozen.dishes)
    context = json.dumps({
        "purpose": "order_dishes", "day": day,
        "unit": unit_payload(unit),
        "restaurant": {"id": frozen.rid, "name": restaurant_name},
        "menu": [{"name": d.name, "price": str(d.price),
                  "description": d.description} for d in frozen.dishes],
        "budget": str(budget), "party_size": party,
    }, sort_keys=True, separators=(",", ":"))
    prompt = templates.render(
        "customer_order", day=day, restaurant_name=restaurant_name,
        party_size=party, budget=str(budget), menu_section=menu_section,
        context_json=context)
    system = templates.render("customer_system", persona=persona_text(unit))
    messages = [{"role": "user", "content": prompt}]

    for attempt in range(1, retries + 1):
        try:
            completion = backend.complete(system, messages)
        except RequestCapExceeded:
            raise
        except TransportError:
            break
        data = _parse_json_reply(completion)
        diagnostics = _order_diagnostics(data, frozen, budget, party)
        if not diagnostics:
            order = make_order(unit.unit_id, frozen,
                               [(i["name"], i["quantity"]) for i in data["items"]],
                               party_size=party)
            return order, False, False
        if attempt < retries:
            messages.append({"role": "assistant", "content": completion})
            messages.append({"role": "user", "content": templates.render(
                "customer_retry",
                diagnostics="\n".join(f"- {d}" for d in diagnostics))})

    dish = cheapest_dish(frozen)
    order = make_order(unit.unit_id, frozen, [(dish.name, party)], party_size=party)
    over_budget = order.total > budget
    return order, over_budget, True


def _order_diagnostics(data, frozen: FrozenMenu, budget: Decimal,
                       party: int) -> list[str]:
    if data is None or not isinstance(data.get("items"), list) or not data["items"]:
        return ['reply must end with {"items": [{"name": ..., "quantity": ...}]}']
    diagnostics = []
    total = Decimal(0)
    quantity = 0
    for item in data["items"]:
        if not isinstance(item, dict):
            diagnostics.append("each item must be an object with name and quantity")
            continue
        name = item.get("name")
        qty = item.get("quantity", 1)
        if not isinstance(qty, int) or qty < 1:
            diagnostics.append(f"quantity for {name!r} must be an integer >= 1")
            continue
        dish = frozen.find(name) if isinstance(name, str) else None
        if dish is None:
            diagnostics.append(f"dish {name!r} is not on the menu")
            continue
        total += dish.price * qty
        quantity += qty
    if diagnostics:
        return diagnostics
    if not party <= quantity <= 2 * party:
        diagnostics.append(
            f"order 1-2 dishes per person: {quantity} dishes for {party} person(s)")
    if total > budget:
        diagnostics.append(f"total {money(total)} exceeds the budget {budget}")
    return diagnostics


def dine_and_review(backend: AgentBackend, unit: Unit, order: Order,
                    dish_scores, restaurant_name: str, day: int, rng,
                    comment_rate: float, templates: TemplateSet,
                    retries: int = CUSTOMER_RETRIES) -> DiningExperience:
    """Generate the dining experience and, possibly, a public comment.

    Individuals comment with probability `comment_rate`; groups always post
    exactly one aggregated comment naming every member. An unusable score after
    retries falls back to ten times the mean dish score, half-up, clamped.
    """
    score_map = dict(dish_scores)
    ordered_scores = tuple((name, score_map[name]) for name, _ in order.items
                           if name in score_map)
    scores_section = "\n".join(f"- {n}: {s:.2f}" for n, s in ordered_scores)
    context = json.dumps({
        "purpose": "review", "day": day,
        "unit": unit_payload(unit),
        "restaurant": {"id": order.restaurant_id, "name": restaurant_name},
        "items": [[n, q] for n, q in order.items],
        "dish_scores": [[n, s] for n, s in ordered_scores],
    }, sort_keys=True, separators=(",", ":"))
    prompt = templates.render(
        "customer_review", day=day, restaurant_name=restaurant_name,
        scores_section=scores_section, context_json=context)
    system = templates.render("customer_system", persona=persona_text(unit))
    messages = [{"role": "user", "content": prompt}]

    text = ""
    comment_text = ""
    score = None
    for attempt in range(1, retries + 1):
        try:
            completion = backend.complete(system, messages)
        except RequestCapExceeded:
            raise
        except TransportError:
            break
        data = _parse_json_reply(completion)
        if data is not None and isinstance(data.get("score"), int):
            score = min(10, max(1, data["score"]))
            text = str(data.get("experience") or "").strip()
            comment_text = str(data.get("comment") or "").strip()
            break
        if attempt < retries:
            messages.append({"role": "assistant", "content": completion})
            messages.append({"role": "user", "content": templates.render(
                "customer_retry",
                diagnostics="- reply must end with a json block holding an "
                            "integer score from 1 to 10")})

    fallback_score = score is None
    if fallback_score:
        weighted = sum(score_map.get(n, 0.0) * q for n, q in order.items)
        quantity = sum(q for _, q in order.items)
        mean = weighted / quantity if quantity else 0.0
        score = int(min(10, max(1, round_half_up(10 * mean))))
    dishes = ", ".join(n for n, _ in order.items)
    if not text:
        text = f"Ate {dishes} at {restaurant_name}."
    if not comment_text:
        comment_text = text

    if unit.kind == "group":
        author = ", ".join(unit.member_names)
        comment = Comment(day=day, author=author, score=score, content=comment_text)
    elif rng.random() < comment_rate:
        comment = Comment(day=day, author=unit.profiles[0].name, score=score,
                          content=comment_text)
    else:
        comment = None

    return DiningExperience(
        unit_id=unit.unit_id, day=day, restaurant_id=order.restaurant_id,
        items=order.items, dish_scores=ordered_scores, text=text,
        comment=comment, fallback_score=fallback_score)
