"""Event-sourced day loop.

Each day runs fixed phases behind barriers: manager turns, menu freeze,
customer decisions and orders, dining and reviews, settlement, memory updates.
Every effect is appended to the run log, and replaying the log over the
initial state reconstructs the final state exactly. Randomness is keyed by
(run seed, unit id, day), so scheduling cannot perturb results.

The log is newline-delimited JSON, one event per line, header first.
Checkpoints are single checksummed files taken between days; resuming
continues deterministically under scripted or replay backends.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from decimal import Decimal
from pathlib import Path

from .config import SimConfig, config_from_dict, config_hash, config_to_dict
from .customers import (
    decide_individual,
    dine_and_review,
    group_discuss,
    majority_vote,
    meal_budget,
    order_dishes,
)
from .domain import (
    Chef,
    Comment,
    Daybook,
    Dish,
    RestaurantState,
    Unit,
    build_units,
    money,
    parse_roster,
    roster_person_count,
)
from .errors import CheckpointError, FoodcourtError, LogFormatError, RequestCapExceeded
from .restaurant import (
    apply_action,
    freeze_day_menu,
    public_view,
    rival_view,
    score_menu,
    settle_day,
)
from .runtime import (
    TemplateSet,
    action_to_call,
    call_to_action,
    make_turn_context,
    run_restaurant_turn,
    update_memory,
)
from .util import canonical_json, derived_seed, sha256_hex

LOG_SCHEMA_VERSION = 1
CHECKPOINT_MAGIC = b"FCCKPT01"
CHECKPOINT_VERSION = 1

PHASE_TURNS = 1
PHASE_FREEZE = 2
PHASE_DECIDE = 3
PHASE_DINE = 4
PHASE_SETTLE = 5

TERMINATION_CAUSES = ("horizon", "voluntary_quit", "insolvency", "request_cap", "abort")

EVENT_TYPES = ("TurnCommitted", "MenuFrozen", "DecisionMade", "OrderPlaced",
               "ExperienceRecorded", "CommentPosted", "DaySettled", "Warning",
               "Terminated")


@dataclass(frozen=True)
class Event:
    day: int
    phase: int
    seq: int
    type: str
    data: dict

    def to_line(self) -> str:
        return json.dumps({"day": self.day, "phase": self.phase, "seq": self.seq,
                           "type": self.type, "data": self.data},
                          sort_keys=True, separators=(",", ":"))


class RunLogWriter:
    """Streams the header plus one event per line; keeps lines in memory so
    checkpoints can embed the log so far."""

    def __init__(self, path=None, header: dict | None = None,
                 existing_lines=None):
        self.path = Path(path) if path else None
        self._fh = None
        if existing_lines is not None:
            self.lines = list(existing_lines)
        else:
            if header is None:
                raise ValueError("a new log needs a header")
            header_line = json.dumps({"type": "Header", "data": header},
                                     sort_keys=True, separators=(",", ":"))
            self.lines = [header_line]
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("w", encoding="utf-8", newline="\n")
            for line in self.lines:
                self._fh.write(line + "\n")
            self._fh.flush()

    def append(self, event: Event) -> None:
        line = event.to_line()
        self.lines.append(line)
        if self._fh:
            self._fh.write(line + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None


def parse_run_log(source) -> tuple[dict, list[Event]]:
    """Parse a log from a path or an iterable of lines. Raises LogFormatError
    naming the first bad line."""
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = [ln.rstrip("\n") for ln in source]
    if not lines:
        raise LogFormatError("empty log", 1)
    try:
        first = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise LogFormatError(f"header does not parse: {exc}", 1) from exc
    if first.get("type") != "Header" or "data" not in first:
        raise LogFormatError("first line is not a Header record", 1)
    header = first["data"]
    if header.get("schema") != LOG_SCHEMA_VERSION:
        raise LogFormatError(
            f"unsupported log schema {header.get('schema')!r}", 1)
    events: list[Event] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            events.append(Event(day=rec["day"], phase=rec["phase"],
                                seq=rec["seq"], type=rec["type"],
                                data=rec["data"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise LogFormatError(f"bad event record: {exc}", i) from exc
        if events[-1].type not in EVENT_TYPES:
            raise LogFormatError(f"unknown event type {events[-1].type!r}", i)
    return header, events


def log_hash(path) -> str:
    return sha256_hex(Path(path).read_bytes())


# --- state serialization (checkpoints, folds) ---------------------------------


def state_to_dict(st: RestaurantState) -> dict:
    return {
        "rid": st.rid, "name": st.name, "funds": str(st.funds),
        "rent": str(st.rent), "status": st.status,
        "advertisement": st.advertisement,
        "chefs": [[c.name, str(c.salary)] for c in st.chefs],
        "menu": [[d.name, str(d.price), str(d.cost_price), d.description]
                 for d in st.menu],
        "comments": [[c.day, c.author, c.score, c.content] for c in st.comments],
        "daybooks": [
            [b.day, str(b.income), str(b.expense), b.num_of_customer,
             [[n, q] for n, q in b.dishes_sold]]
            for b in st.daybooks],
        "memory": list(st.memory),
    }


def state_from_dict(data: dict) -> RestaurantState:
    return RestaurantState(
        rid=data["rid"], name=data["name"], funds=money(data["funds"]),
        rent=money(data["rent"]), status=data["status"],
        advertisement=data["advertisement"],
        chefs=tuple(Chef(n, s) for n, s in data["chefs"]),
        menu=tuple(Dish(n, p, c, d) for n, p, c, d in data["menu"]),
        comments=tuple(Comment(day=d, author=a, score=s, content=c)
                       for d, a, s, c in data["comments"]),
        daybooks=tuple(
            Daybook(day=d, income=i, expense=e, num_of_customer=n,
                    dishes_sold=tuple((dn, q) for dn, q in sold))
            for d, i, e, n, sold in data["daybooks"]),
        memory=tuple(data["memory"]),
    )


# --- the engine ------------------------------------------------------------------


class Engine:
    """Owns the world state, the single log appender, and the day loop."""

    def __init__(self, config: SimConfig, backend, gateway=None,
                 templates: TemplateSet | None = None, log_path=None,
                 resume_payload: dict | None = None):
        self.config = config
        self.backend = backend
        self.gateway = gateway
        self.templates = templates or TemplateSet()

        if resume_payload is None:
            roster_text = config.roster_path.read_text(encoding="utf-8")
            customers, groups = parse_roster(roster_text)
            units = build_units(customers, groups, config.mode)
            self.roster_text = roster_text
            self.units = tuple(sorted(units, key=lambda u: u.unit_id))
            self.restaurants = {s.rid: s.initial_state() for s in config.restaurants}
            self.history: dict[str, list[tuple[int, str]]] = {
                u.unit_id: [] for u in self.units}
            self.next_day = 1
            self.days_completed = 0
            self._seq = 0
            header = self._build_header()
            self.log = RunLogWriter(log_path, header=header)
        else:
            self.roster_text = resume_payload["roster_text"]
            customers, groups = parse_roster(self.roster_text)
            units = build_units(customers, groups, config.mode)
            self.units = tuple(sorted(units, key=lambda u: u.unit_id))
            self.restaurants = {rid: state_from_dict(d) for rid, d in
                                resume_payload["restaurants"].items()}
            self.history = {u.unit_id: [] for u in self.units}
            for uid, pairs in resume_payload["history"].items():
                self.history[uid] = [(int(d), rid) for d, rid in pairs]
            self.next_day = int(resume_payload["next_day"])
            self.days_completed = int(resume_payload["days_completed"])
            self._seq = int(resume_payload["seq"])
            self.log = RunLogWriter(log_path,
                                    existing_lines=resume_payload["log_lines"])
            if self.gateway is not None:
                self.gateway.requests_used = int(resume_payload["requests_used"])

        self.persons = roster_person_count(self.units)
        self._frozen: dict[str, object] = {}
        self._frozen_guard: set[tuple[str, int]] = set()
        self._voluntary_quit: set[str] = set()
        self._insolvent: set[str] = set()

    # -- setup helpers ------------------------------------------------------------

    def _build_header(self) -> dict:
        cfg = self.config
        # The header names the completion provenance; a replay reproduces its
        # recording byte-for-byte, so it inherits "record" here.
        provenance = "record" if cfg.gateway_mode == "replay" else cfg.gateway_mode
        return {
            "schema": LOG_SCHEMA_VERSION,
            "config_hash": config_hash(cfg),
            "template_version": self.templates.version,
            "mode": cfg.mode,
            "seed": cfg.seed,
            "gateway_mode": provenance,
            "backend": getattr(self.backend, "identity", "unknown"),
            "horizon": cfg.horizon,
            "roster_persons": roster_person_count(
                build_units(*parse_roster(self.roster_text), cfg.mode)),
            "unit_count": len(build_units(*parse_roster(self.roster_text), cfg.mode)),
            "restaurants": {s.rid: s.name for s in cfg.restaurants},
            "initial_funds": {s.rid: str(s.funds) for s in cfg.restaurants},
            "wta_threshold": cfg.wta_threshold,
            "wta_from_day": cfg.wta_from_day,
        }

    def _other(self, rid: str) -> str | None:
        for other in self.restaurants:
            if other != rid:
                return other
        return None

    def _emit(self, day: int, phase: int, etype: str, data: dict) -> None:
        self._seq += 1
        self.log.append(Event(day=day, phase=phase, seq=self._seq,
                              type=etype, data=data))

    def _unit_rng(self, unit_id: str, day: int) -> random.Random:
        return random.Random(derived_seed(self.config.seed, unit_id, day))

    def _map_units(self, fn, items):
        """Run fn over items, optionally on threads; results return in input
        order so scheduling cannot reorder commits."""
        if self.config.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    # -- run loop --------------------------------------------------------------------

    def run(self, stop_after_day: int | None = None,
            checkpoint_path=None) -> str | None:
        """Run days until the horizon, a quit, or the request cap.

        Returns the termination cause, or None when paused by stop_after_day.
        """
        cause = None
        try:
            day = self.next_day
            while day <= self.config.horizon:
                self._run_day(day)
                self.days_completed = day
                self.next_day = day + 1
                if checkpoint_path:
                    self.write_checkpoint(checkpoint_path)
                if self._voluntary_quit:
                    cause = "voluntary_quit"
                elif self._insolvent:
                    cause = "insolvency"
                if cause:
                    break
                if stop_after_day is not None and day >= stop_after_day:
                    self.log.close()
                    return None
                day += 1
            else:
                cause = "horizon"
        except RequestCapExceeded:
            cause = "request_cap"
        except FoodcourtError:
            self._emit(self.next_day, PHASE_SETTLE, "Terminated",
                       {"cause": "abort", "days_completed": self.days_completed})
            self.log.close()
            raise
        self._emit(self.days_completed, PHASE_SETTLE, "Terminated",
                   {"cause": cause, "days_completed": self.days_completed})
        self.log.close()
        return cause

    def _run_day(self, day: int) -> None:
        cfg = self.config
        self._voluntary_quit.clear()
        self._insolvent.clear()
        active_ids = sorted(rid for rid, st in self.restaurants.items() if st.active)

        # Phase 1: manager turns. Contexts are built against yesterday-close
        # states for every restaurant before any turn commits (simultaneity).
        contexts = {}
        for rid in active_ids:
            other = self._other(rid)
            rival = rival_view(self.restaurants[other], day) if other else None
            contexts[rid] = make_turn_context(
                self.restaurants[rid], day, rival,
                daybook_window=cfg.daybook_window,
                memory_window=cfg.memory_window)

        def run_turn(rid):
            def validate(actions):
                scratch = self.restaurants[rid]
                try:
                    for action in actions:
                        scratch = apply_action(scratch, action)
                except FoodcourtError as exc:
                    return str(exc)
                return None
            return run_restaurant_turn(self.backend, contexts[rid],
                                       self.templates, validate,
                                       retries=cfg.turn_retries)

        results = dict(zip(active_ids, self._map_units(run_turn, active_ids)))
        summaries = {}
        for rid in active_ids:
            result = results[rid]
            state = self.restaurants[rid]
            for action in result.actions:
                state = apply_action(state, action)
            self.restaurants[rid] = state
            summaries[rid] = result.summary
            if not state.active:
                self._voluntary_quit.add(rid)
            self._emit(day, PHASE_TURNS, "TurnCommitted", {
                "restaurant": rid,
                "actions": [action_to_call(a) for a in result.actions],
                "summary": result.summary,
                "analysis": result.analysis,
                "attempts": result.attempts,
                "failed": result.failed,
            })
            if result.failed:
                self._emit(day, PHASE_TURNS, "Warning", {
                    "code": "turn-failed", "restaurant": rid,
                    "detail": result.failure_reason or "turn committed no actions"})
            if result.dropped_after_quit:
                self._emit(day, PHASE_TURNS, "Warning", {
                    "code": "actions-after-quit-dropped", "restaurant": rid,
                    "detail": f"{result.dropped_after_quit} call(s) ignored"})

        # Phase 2: freeze menus and score dishes for every still-active kitchen.
        open_ids = sorted(rid for rid in active_ids if self.restaurants[rid].active)
        self._frozen = {}
        publics = {}
        scores = {}
        for rid in open_ids:
            if (rid, day) in self._frozen_guard:
                raise FoodcourtError(f"menu for {rid} frozen twice on day {day}")
            self._frozen_guard.add((rid, day))
            state = self.restaurants[rid]
            frozen = freeze_day_menu(state, day)
            self._frozen[rid] = frozen
            scores[rid] = score_menu(state.chefs, frozen.dishes)
            if not state.chefs:
                self._emit(day, PHASE_FREEZE, "Warning", {
                    "code": "no-chefs", "restaurant": rid,
                    "detail": "dish scores computed with salary 0"})
            self._emit(day, PHASE_FREEZE, "MenuFrozen", {
                "restaurant": rid,
                "menu": [{"name": d.name, "price": str(d.price),
                          "cost_price": str(d.cost_price),
                          "description": d.description} for d in frozen.dishes],
                "dish_scores": [[n, s] for n, s in scores[rid]],
            })
            publics[rid] = public_view(state, day, frozen,
                                       comment_cap=cfg.comment_window)

        if not open_ids:
            return  # both quit this morning; nobody dines today

        # Phase 3: every unit picks a restaurant and places one order.
        options = [publics[rid] for rid in open_ids]

        def decide_and_order(unit: Unit):
            history = self.history[unit.unit_id][-3:]
            if unit.kind == "group":
                record = group_discuss(self.backend, unit, options, history,
                                       self.templates,
                                       retries=cfg.customer_retries)
            else:
                record = decide_individual(self.backend, unit, options, history,
                                           self.templates,
                                           retries=cfg.customer_retries)
            budget = meal_budget(unit, cfg.budget_ratio)
            order, over_budget, order_fallback = order_dishes(
                self.backend, unit, self._frozen[record.restaurant_id], budget,
                publics[record.restaurant_id].name, self.templates, day,
                retries=cfg.customer_retries)
            return record, order, over_budget, order_fallback

        outcomes = self._map_units(decide_and_order, list(self.units))
        orders_by_rid: dict[str, list] = {rid: [] for rid in open_ids}
        for unit, (record, order, over_budget, order_fallback) in zip(
                self.units, outcomes):
            data = {
                "unit": unit.unit_id, "kind": unit.kind,
                "restaurant": record.restaurant_id,
                "reason": record.reason, "category": record.category,
                "category_source": record.category_source,
                "party_size": unit.party_size,
                "forced": record.forced, "fallback": record.fallback,
            }
            if record.votes is not None:
                data["votes"] = [[m, rid] for m, rid in record.votes]
            if record.discussion:
                data["discussion"] = [[m, u] for m, u in record.discussion]
            self._emit(day, PHASE_DECIDE, "DecisionMade", data)
            if record.fallback:
                self._emit(day, PHASE_DECIDE, "Warning", {
                    "code": "decision-fallback", "unit": unit.unit_id,
                    "detail": "backend reply unusable; standing rule applied"})
            self.history[unit.unit_id].append((day, record.restaurant_id))

            orders_by_rid[order.restaurant_id].append(order)
            self._emit(day, PHASE_DECIDE, "OrderPlaced", {
                "unit": unit.unit_id, "restaurant": order.restaurant_id,
                "items": [[n, q] for n, q in order.items],
                "total": str(order.total), "party_size": order.party_size,
                "over_budget": over_budget, "fallback": order_fallback,
            })
            if over_budget:
                self._emit(day, PHASE_DECIDE, "Warning", {
                    "code": "over-budget", "unit": unit.unit_id,
                    "detail": f"cheapest dish exceeds budget; total {order.total}"})

        # Phase 4: dining experiences and comments.
        def dine(args):
            unit, (record, order, _, _) = args
            return dine_and_review(
                self.backend, unit, order, dict(scores[order.restaurant_id]),
                publics[order.restaurant_id].name, day,
                self._unit_rng(unit.unit_id, day),
                cfg.comment_rate, self.templates,
                retries=cfg.customer_retries)

        experiences = self._map_units(dine, list(zip(self.units, outcomes)))
        for unit, experience in zip(self.units, experiences):
            self._emit(day, PHASE_DINE, "ExperienceRecorded", {
                "unit": unit.unit_id, "restaurant": experience.restaurant_id,
                "text": experience.text,
                "items": [[n, q] for n, q in experience.items],
                "dish_scores": [[n, s] for n, s in experience.dish_scores],
                "fallback_score": experience.fallback_score,
            })
            if experience.fallback_score:
                self._emit(day, PHASE_DINE, "Warning", {
                    "code": "review-fallback", "unit": unit.unit_id,
                    "detail": "comment score derived from dish scores"})
            if experience.comment is not None:
                rid = experience.restaurant_id
                state = self.restaurants[rid]
                self.restaurants[rid] = replace(
                    state, comments=state.comments + (experience.comment,))
                self._emit(day, PHASE_DINE, "CommentPosted", {
                    "restaurant": rid, "unit": unit.unit_id,
                    "author": experience.comment.author,
                    "score": experience.comment.score,
                    "content": experience.comment.content,
                })

        # Phase 5: settlement.
        served = 0
        for rid in open_ids:
            state, daybook = settle_day(self.restaurants[rid], day,
                                        orders_by_rid[rid], self._frozen[rid])
            self.restaurants[rid] = state
            served += daybook.num_of_customer
            insolvent = not state.active
            if insolvent:
                self._insolvent.add(rid)
            self._emit(day, PHASE_SETTLE, "DaySettled", {
                "restaurant": rid, "income": str(daybook.income),
                "expense": str(daybook.expense),
                "num_of_customer": daybook.num_of_customer,
                "dishes_sold": [[n, q] for n, q in daybook.dishes_sold],
                "funds_close": str(state.funds),
                "insolvent": insolvent,
            })
        if served != self.persons:
            raise FoodcourtError(
                f"day {day} flow conservation broken: served {served} of "
                f"{self.persons} persons")

        # Phase 6: memory updates from the day's summaries.
        for rid in active_ids:
            state = self.restaurants[rid]
            self.restaurants[rid] = replace(state, memory=update_memory(
                state.memory, summaries[rid], window=cfg.memory_window))

    # -- checkpointing -----------------------------------------------------------------

    def write_checkpoint(self, path) -> None:
        payload = {
            "version": CHECKPOINT_VERSION,
            "next_day": self.next_day,
            "days_completed": self.days_completed,
            "seq": self._seq,
            "config": config_to_dict(self.config),
            "roster_text": self.roster_text,
            "restaurants": {rid: state_to_dict(st)
                            for rid, st in self.restaurants.items()},
            "history": {uid: [[d, rid] for d, rid in pairs]
                        for uid, pairs in self.history.items()},
            "requests_used": getattr(self.gateway, "requests_used", 0) or 0,
            "log_lines": list(self.log.lines),
        }
        blob = canonical_json(payload).encode("utf-8")
        digest = sha256_hex(blob).encode("ascii")
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(CHECKPOINT_MAGIC + digest + blob)


def read_checkpoint(path) -> dict:
    raw = Path(path).read_bytes()
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    digest = raw[len(CHECKPOINT_MAGIC): len(CHECKPOINT_MAGIC) + 64]
    blob = raw[len(CHECKPOINT_MAGIC) + 64:]
    if sha256_hex(blob).encode("ascii") != digest:
        raise CheckpointError(f"{path}: checksum mismatch, file corrupted")
    payload = json.loads(blob)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {payload.get('version')!r}")
    return payload


def resume_engine(payload: dict, backend, gateway=None,
                  templates: TemplateSet | None = None, log_path=None) -> Engine:
    config = config_from_dict(payload["config"])
    return Engine(config, backend, gateway=gateway, templates=templates,
                  log_path=log_path, resume_payload=payload)


# --- event-sourcing fold and log verification ------------------------------------


def fold_events(initial: dict[str, RestaurantState], events,
                memory_window: int = 5) -> dict[str, RestaurantState]:
    """Rebuild final restaurant states purely from the event stream."""
    states = dict(initial)
    for event in events:
        data = event.data
        if event.type == "TurnCommitted":
            rid = data["restaurant"]
            state = states[rid]
            for call in data["actions"]:
                state = apply_action(state, call_to_action(call))
            state = replace(state, memory=update_memory(
                state.memory, data["summary"], window=memory_window))
            states[rid] = state
        elif event.type == "CommentPosted":
            rid = data["restaurant"]
            state = states[rid]
            comment = Comment(day=event.day, author=data["author"],
                              score=data["score"], content=data["content"])
            states[rid] = replace(state, comments=state.comments + (comment,))
        elif event.type == "DaySettled":
            rid = data["restaurant"]
            state = states[rid]
            daybook = Daybook(
                day=event.day, income=data["income"], expense=data["expense"],
                num_of_customer=data["num_of_customer"],
                dishes_sold=tuple((n, q) for n, q in data["dishes_sold"]))
            funds = money(data["funds_close"])
            status = "quit" if (funds < 0 or not state.active) else state.status
            states[rid] = replace(state, funds=funds,
                                  daybooks=state.daybooks + (daybook,),
                                  status=status)
    return states


def verify_log(header: dict, events) -> list[str]:
    """Conservation and protocol checks over one parsed log. Empty list means
    every invariant held."""
    violations: list[str] = []
    persons = int(header.get("roster_persons", 0))
    initial_funds = {rid: money(v)
                     for rid, v in (header.get("initial_funds") or {}).items()}

    by_day_settled: dict[int, list] = {}
    by_day_orders: dict[int, list] = {}
    freeze_seqs: dict[int, list[int]] = {}
    decide_seqs: dict[int, list[int]] = {}
    funds_track: dict[str, Decimal] = dict(initial_funds)
    last_seq = 0

    for event in events:
        if event.seq <= last_seq:
            violations.append(f"seq not strictly increasing at {event.seq}")
        last_seq = event.seq
        if event.type == "DaySettled":
            by_day_settled.setdefault(event.day, []).append(event)
            rid = event.data["restaurant"]
            income = money(event.data["income"])
            expense = money(event.data["expense"])
            close = money(event.data["funds_close"])
            if rid in funds_track:
                expected = money(funds_track[rid] + income - expense)
                if expected != close:
                    violations.append(
                        f"day {event.day} funds recurrence broken for {rid}: "
                        f"{funds_track[rid]} + {income} - {expense} != {close}")
                funds_track[rid] = close
        elif event.type == "OrderPlaced":
            by_day_orders.setdefault(event.day, []).append(event)
        elif event.type == "MenuFrozen":
            freeze_seqs.setdefault(event.day, []).append(event.seq)
        elif event.type == "DecisionMade":
            decide_seqs.setdefault(event.day, []).append(event.seq)
            data = event.data
            if data.get("votes"):
                votes = [rid for _, rid in data["votes"]]
                expected = majority_vote(votes, leader_vote=votes[0])
                if expected != data["restaurant"]:
                    violations.append(
                        f"day {event.day} group {data['unit']} decision "
                        f"{data['restaurant']} != majority {expected}")

    for day, settled in sorted(by_day_settled.items()):
        served = sum(e.data["num_of_customer"] for e in settled)
        ordered = sum(e.data["party_size"] for e in by_day_orders.get(day, []))
        if served != ordered:
            violations.append(
                f"day {day}: settled persons {served} != ordered persons {ordered}")
        if persons and served != persons:
            violations.append(
                f"day {day}: served {served} persons, roster has {persons}")

    for day, seqs in sorted(decide_seqs.items()):
        frozen = freeze_seqs.get(day, [])
        if not frozen:
            violations.append(f"day {day}: decisions without a menu freeze")
        elif min(seqs) < max(frozen):
            violations.append(f"day {day}: a decision preceded a menu freeze")

    return violations
