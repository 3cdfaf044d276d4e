"""Agent runtime for restaurant managers.

Assembles the daily turn context, renders versioned prompt templates, parses
the fenced-JSON action protocol with bounded repair retries, and maintains the
rolling memory of day summaries. Rendering is deterministic: the same context
and template version produce byte-identical prompts.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template
from typing import Callable, Protocol

from .domain import Comment, Daybook, Dish, RestaurantState
from .errors import DomainError, RequestCapExceeded, TemplateError, TransportError
from .gateway import CompletionRequest, Gateway
from .restaurant import (
    Action,
    AddDish,
    AdjustSalary,
    DeleteDish,
    FireChef,
    HireChef,
    ModifyAd,
    ModifyDish,
    ModifyName,
    Quit,
    RivalInfo,
)

DAYBOOK_WINDOW = 3
MEMORY_WINDOW = 5
TURN_RETRIES = 3

_FENCE_RE = re.compile(r"```([A-Za-z_]*)[ \t]*\n(.*?)\n?```", re.DOTALL)


class AgentBackend(Protocol):
    """Anything that can turn (system prompt, message history) into text."""

    identity: str

    def complete(self, system: str, messages: list[dict]) -> str: ...


class GatewayBackend:
    """Backend that resolves completions through the gateway."""

    def __init__(self, gateway: Gateway, model: str, temperature: float = 0.7,
                 max_tokens: int = 1024):
        self.gateway = gateway
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        # Mode-independent so a replayed run reproduces its recording's log.
        self.identity = f"gateway:{model}"

    def complete(self, system: str, messages: list[dict]) -> str:
        request = CompletionRequest(
            model=self.model,
            system=system,
            messages=tuple((m["role"], m["content"]) for m in messages),
            temperature=self.temperature,
            max_tokens=self.max_tokens,
        )
        return self.gateway.complete(request)


# --- templates ---------------------------------------------------------------


class TemplateSet:
    """Prompt templates loaded from disk; the version string is recorded in
    every run-log header."""

    def __init__(self, root: Path | None = None):
        if root is None:
            root = Path(str(resources.files("foodcourt") / "templates"))
        self.root = Path(root)
        version_file = self.root / "VERSION"
        if not version_file.exists():
            raise TemplateError(f"template set at {self.root} has no VERSION file")
        self.version = version_file.read_text(encoding="utf-8").strip()
        self._cache: dict[str, Template] = {}

    def render(self, name: str, **variables) -> str:
        if name not in self._cache:
            path = self.root / f"{name}.txt"
            if not path.exists():
                raise TemplateError(f"unknown template {name!r} in set {self.version}")
            self._cache[name] = Template(path.read_text(encoding="utf-8"))
        try:
            return self._cache[name].substitute(**variables)
        except (KeyError, ValueError) as exc:
            raise TemplateError(f"template {name!r}: {exc}") from exc


def extract_fenced_blocks(text: str) -> list[tuple[str, str]]:
    """All fenced blocks in `text` as (tag, body) pairs, in order."""
    return [(m.group(1).lower(), m.group(2)) for m in _FENCE_RE.finditer(text)]


def extract_context_payload(messages) -> dict | None:
    """The machine-readable context block of the most recent user message that
    carries one. Scripted backends decide from this instead of prose."""
    for message in reversed(list(messages)):
        if message.get("role") != "user":
            continue
        for tag, body in extract_fenced_blocks(message.get("content", "")):
            if tag == "context":
                try:
                    return json.loads(body)
                except json.JSONDecodeError:
                    return None
    return None


# --- turn context and prompt -------------------------------------------------


@dataclass(frozen=True)
class TurnContext:
    day: int
    rid: str
    name: str
    funds: str
    rent: str
    chefs: tuple[tuple[str, str], ...]            # (name, salary)
    menu: tuple[tuple[str, str, str, str], ...]   # (name, price, cost_price, description)
    advertisement: str
    daybooks: tuple[Daybook, ...]                 # last 3
    own_comments: tuple[Comment, ...]             # previous day only
    rival: RivalInfo | None
    memory: tuple[str, ...]                       # last 5


def make_turn_context(state: RestaurantState, day: int, rival: RivalInfo | None,
                      daybook_window: int = DAYBOOK_WINDOW,
                      memory_window: int = MEMORY_WINDOW) -> TurnContext:
    return TurnContext(
        day=day,
        rid=state.rid,
        name=state.name,
        funds=str(state.funds),
        rent=str(state.rent),
        chefs=tuple((c.name, str(c.salary)) for c in state.chefs),
        menu=tuple((d.name, str(d.price), str(d.cost_price), d.description)
                   for d in state.menu),
        advertisement=state.advertisement,
        daybooks=state.daybooks[-daybook_window:],
        own_comments=tuple(c for c in state.comments if c.day == day - 1),
        rival=rival,
        memory=state.memory[-memory_window:],
    )


def _context_json(ctx: TurnContext) -> str:
    payload = {
        "purpose": "restaurant_turn",
        "day": ctx.day,
        "restaurant": {
            "id": ctx.rid,
            "name": ctx.name,
            "funds": ctx.funds,
            "rent": ctx.rent,
            "chefs": [{"name": n, "salary": s} for n, s in ctx.chefs],
            "menu": [{"name": n, "price": p, "cost_price": c, "description": d}
                     for n, p, c, d in ctx.menu],
            "advertisement": ctx.advertisement,
        },
        "daybooks": [
            {"day": b.day, "income": str(b.income), "expense": str(b.expense),
             "num_of_customer": b.num_of_customer,
             "dishes_sold": [[n, q] for n, q in b.dishes_sold]}
            for b in ctx.daybooks
        ],
        "own_comments": [
            {"day": c.day, "author": c.author, "score": c.score, "content": c.content}
            for c in ctx.own_comments
        ],
        "rival": ctx.rival.to_payload() if (ctx.rival and ctx.day > 1) else None,
        "memory": list(ctx.memory),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _daybook_lines(books) -> str:
    lines = []
    for b in books:
        sold = ", ".join(f"{n} x{q}" for n, q in b.dishes_sold) or "nothing"
        lines.append(f"- day {b.day}: income {b.income}, expense {b.expense}, "
                     f"customers {b.num_of_customer}, sold: {sold}")
    return "\n".join(lines)


def _comment_lines(comments) -> str:
    return "\n".join(f"- (score {c.score}) {c.author}: {c.content}" for c in comments)


def build_restaurant_prompt(ctx: TurnContext, templates: TemplateSet) -> tuple[str, str]:
    """Render (system, user) messages for one manager turn. Sections with no
    data are omitted entirely, so a day-1 prompt carries no daybook or rival
    text."""
    daybook_section = ""
    if ctx.daybooks:
        daybook_section = "Recent daybooks:\n" + _daybook_lines(ctx.daybooks) + "\n\n"

    comments_section = ""
    if ctx.own_comments:
        comments_section = ("Comments posted about your restaurant yesterday:\n"
                            + _comment_lines(ctx.own_comments) + "\n\n")

    rival_section = ""
    if ctx.rival is not None and ctx.day > 1:
        menu = "; ".join(f"{n} ({p})" for n, p, _ in ctx.rival.menu) or "unknown"
        flow = ("unknown" if ctx.rival.customer_flow is None
                else str(ctx.rival.customer_flow))
        rival_comments = "\n".join(
            f"- (score {s}) {a}: {c}" for _, a, s, c in ctx.rival.comments)
        rival_section = (f"Rival restaurant \"{ctx.rival.name}\":\n"
                         f"- menu: {menu}\n"
                         f"- customers served yesterday: {flow}\n")
        if rival_comments:
            rival_section += "- comments received yesterday:\n" + rival_comments + "\n"
        rival_section += "\n"

    memory_section = ""
    if ctx.memory:
        memory_section = ("Your notes from previous days:\n"
                          + "\n".join(f"- {m}" for m in ctx.memory) + "\n\n")

    chef_text = ", ".join(f"{n} (salary {s})" for n, s in ctx.chefs) or "none"
    menu_lines = "\n".join(
        f"- {n}: price {p}, cost {c}" + (f" ({d})" if d else "")
        for n, p, c, d in ctx.menu)
    own_section = (f"- funds: {ctx.funds}\n"
                   f"- monthly rent: {ctx.rent}\n"
                   f"- chefs: {chef_text}\n"
                   f"- advertisement: {ctx.advertisement or '(none)'}\n"
                   f"- menu (cost prices are private to you):\n{menu_lines}")

    user = templates.render(
        "restaurant_turn",
        day=ctx.day,
        daybook_section=daybook_section,
        comments_section=comments_section,
        rival_section=rival_section,
        memory_section=memory_section,
        own_section=own_section,
        context_json=_context_json(ctx),
    )
    system = templates.render("restaurant_system", restaurant_name=ctx.name)
    return system, user


# --- action wire format --------------------------------------------------------


def action_to_call(action: Action) -> dict:
    """Serialize one action to its wire call object."""
    if isinstance(action, ModifyName):
        return {"api": "basic_info", "method": "modify_name", "args": {"name": action.name}}
    if isinstance(action, Quit):
        return {"api": "basic_info", "method": "quit", "args": {}}
    if isinstance(action, HireChef):
        return {"api": "chef", "method": "hire",
                "args": {"name": action.name, "salary": float(action.salary)}}
    if isinstance(action, FireChef):
        return {"api": "chef", "method": "fire", "args": {"name": action.name}}
    if isinstance(action, AdjustSalary):
        return {"api": "chef", "method": "adjust_salary",
                "args": {"name": action.name, "salary": float(action.salary)}}
    if isinstance(action, AddDish):
        return {"api": "menu", "method": "add", "args": {
            "name": action.dish.name, "price": float(action.dish.price),
            "cost_price": float(action.dish.cost_price),
            "description": action.dish.description}}
    if isinstance(action, DeleteDish):
        return {"api": "menu", "method": "delete", "args": {"name": action.name}}
    if isinstance(action, ModifyDish):
        args: dict = {"name": action.name}
        if action.price is not None:
            args["price"] = float(action.price)
        if action.cost_price is not None:
            args["cost_price"] = float(action.cost_price)
        if action.description is not None:
            args["description"] = action.description
        return {"api": "menu", "method": "modify", "args": args}
    if isinstance(action, ModifyAd):
        return {"api": "advertisement", "method": "modify",
                "args": {"content": action.content}}
    raise DomainError(f"unsupported action {type(action).__name__}")


def serialize_actions(actions) -> str:
    calls = [action_to_call(a) for a in actions]
    return "```json\n" + json.dumps(calls, indent=2) + "\n```"


def _require(args: dict, field: str, kinds, where: str, diagnostics: list) -> object:
    value = args.get(field)
    if value is None or not isinstance(value, kinds):
        diagnostics.append(f"{where}: missing or invalid field {field!r}")
        return None
    return value


def _call_to_action(call: dict, index: int, diagnostics: list) -> Action | None:
    where = f"call #{index + 1}"
    if not isinstance(call, dict):
        diagnostics.append(f"{where}: not an object")
        return None
    api = call.get("api")
    method = call.get("method")
    args = call.get("args")
    if not isinstance(args, dict):
        args = {}
    key = (api, method)
    number = (int, float)
    try:
        if key == ("basic_info", "modify_name"):
            name = _require(args, "name", str, where, diagnostics)
            return ModifyName(name) if name else None
        if key == ("basic_info", "quit"):
            return Quit()
        if key == ("chef", "hire"):
            name = _require(args, "name", str, where, diagnostics)
            salary = _require(args, "salary", number, where, diagnostics)
            if name is None or salary is None:
                return None
            if salary < 0:
                diagnostics.append(f"{where}: negative salary")
                return None
            return HireChef(name, salary)
        if key == ("chef", "fire"):
            name = _require(args, "name", str, where, diagnostics)
            return FireChef(name) if name else None
        if key == ("chef", "adjust_salary"):
            name = _require(args, "name", str, where, diagnostics)
            salary = _require(args, "salary", number, where, diagnostics)
            if name is None or salary is None:
                return None
            if salary < 0:
                diagnostics.append(f"{where}: negative salary")
                return None
            return AdjustSalary(name, salary)
        if key == ("menu", "add"):
            name = _require(args, "name", str, where, diagnostics)
            price = _require(args, "price", number, where, diagnostics)
            cost = _require(args, "cost_price", number, where, diagnostics)
            if None in (name, price, cost):
                return None
            description = args.get("description") or ""
            return AddDish(Dish(name, price, cost, str(description)))
        if key == ("menu", "delete"):
            name = _require(args, "name", str, where, diagnostics)
            return DeleteDish(name) if name else None
        if key == ("menu", "modify"):
            name = _require(args, "name", str, where, diagnostics)
            if name is None:
                return None
            price = args.get("price")
            cost = args.get("cost_price")
            description = args.get("description")
            if price is None and cost is None and description is None:
                diagnostics.append(f"{where}: menu modify changes nothing")
                return None
            return ModifyDish(name, price=price, cost_price=cost,
                              description=description)
        if key == ("advertisement", "modify"):
            content = _require(args, "content", str, where, diagnostics)
            return ModifyAd(content) if content is not None else None
    except DomainError as exc:
        diagnostics.append(f"{where}: {exc}")
        return None
    diagnostics.append(f"{where}: unknown api/method {api!r}/{method!r}")
    return None


def call_to_action(call: dict) -> Action:
    """Strict wire-to-action mapping; raises DomainError on any violation."""
    diagnostics: list[str] = []
    action = _call_to_action(call, 0, diagnostics)
    if action is None or diagnostics:
        raise DomainError("; ".join(diagnostics) or "unusable call object")
    return action


def parse_tool_calls(completion: str) -> tuple[tuple[Action, ...], tuple[str, ...]]:
    """Parse the last fenced JSON block of a completion into actions.

    Returns (actions, diagnostics). A non-empty diagnostics tuple means the
    reply is unusable as a whole; every violation found is listed.
    """
    blocks = extract_fenced_blocks(completion)
    if not blocks:
        return (), ("no action block found: end the reply with a fenced json array",)
    body = blocks[-1][1]
    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        return (), (f"action block is not valid JSON: {exc}",)
    if not isinstance(data, list):
        return (), ("action block must be a JSON array of call objects",)
    diagnostics: list[str] = []
    actions: list[Action] = []
    for i, call in enumerate(data):
        action = _call_to_action(call, i, diagnostics)
        if action is not None:
            actions.append(action)
    if diagnostics:
        return (), tuple(diagnostics)
    return tuple(actions), ()


def strip_action_block(completion: str) -> str:
    """Completion text with its trailing action block removed (the free-text
    analysis part)."""
    matches = list(_FENCE_RE.finditer(completion))
    if not matches:
        return completion.strip()
    last = matches[-1]
    return (completion[:last.start()] + completion[last.end():]).strip()


# --- the turn ------------------------------------------------------------------


@dataclass(frozen=True)
class TurnResult:
    analysis: str
    actions: tuple[Action, ...]
    summary: str
    attempts: int
    failed: bool = False
    failure_reason: str | None = None
    dropped_after_quit: int = 0


def truncate_after_quit(actions) -> tuple[tuple[Action, ...], int]:
    """Nothing is processed after a quit; report how many calls were dropped."""
    out: list[Action] = []
    for i, action in enumerate(actions):
        out.append(action)
        if isinstance(action, Quit):
            return tuple(out), len(actions) - i - 1
    return tuple(out), 0


def update_memory(memory, summary: str, window: int = MEMORY_WINDOW) -> tuple[str, ...]:
    """Append one day summary, retaining only the most recent `window`."""
    return (tuple(memory) + (summary,))[-window:]


def _auto_summary(day: int, actions) -> str:
    if not actions:
        return f"Day {day}: no changes committed."
    names = ", ".join(type(a).__name__ for a in actions)
    return f"Day {day}: committed {len(actions)} action(s): {names}."


def run_restaurant_turn(backend: AgentBackend, ctx: TurnContext,
                        templates: TemplateSet,
                        validate: Callable[[tuple[Action, ...]], str | None],
                        retries: int = TURN_RETRIES) -> TurnResult:
    """One manager turn with bounded repair.

    On parse or validation failure the backend is re-prompted with the
    diagnostics, up to `retries` attempts in total; after that the day becomes
    a legal no-op. The committed action list is always all-or-nothing against
    `validate`. A summary is always produced, asking the backend first and
    falling back to an automatic one.
    """
    system, user = build_restaurant_prompt(ctx, templates)
    messages = [{"role": "user", "content": user}]
    analysis = ""
    committed: tuple[Action, ...] = ()
    dropped = 0
    failed = False
    failure_reason = None
    attempts = 0

    for attempt in range(1, retries + 1):
        attempts = attempt
        try:
            completion = backend.complete(system, messages)
        except RequestCapExceeded:
            raise
        except TransportError as exc:
            failed = True
            failure_reason = f"backend transport failure: {exc}"
            break
        actions, diagnostics = parse_tool_calls(completion)
        if not diagnostics:
            actions, dropped = truncate_after_quit(actions)
            error = validate(actions)
            if error is None:
                analysis = strip_action_block(completion)
                committed = actions
                break
            diagnostics = (f"action rejected by the management system: {error}",)
        if attempt == retries:
            failed = True
            failure_reason = "; ".join(diagnostics)
        else:
            messages.append({"role": "assistant", "content": completion})
            messages.append({"role": "user", "content": templates.render(
                "restaurant_retry",
                diagnostics="\n".join(f"- {d}" for d in diagnostics))})

    summary = _request_summary(backend, ctx, committed, templates)
    return TurnResult(analysis=analysis, actions=committed, summary=summary,
                      attempts=attempts, failed=failed,
                      failure_reason=failure_reason, dropped_after_quit=dropped)


def _request_summary(backend, ctx: TurnContext, actions, templates) -> str:
    context = json.dumps({"purpose": "summarize_day", "day": ctx.day,
                          "restaurant": {"id": ctx.rid, "name": ctx.name},
                          "actions": [action_to_call(a) for a in actions]},
                         sort_keys=True, separators=(",", ":"))
    prompt = templates.render(
        "restaurant_summary", day=ctx.day,
        actions_json=json.dumps([action_to_call(a) for a in actions], indent=2),
        context_json=context)
    system = templates.render("restaurant_system", restaurant_name=ctx.name)
    try:
        text = backend.complete(system, [{"role": "user", "content": prompt}]).strip()
    except RequestCapExceeded:
        raise
    except TransportError:
        text = ""
    return text or _auto_summary(ctx.day, actions)
