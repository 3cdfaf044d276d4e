"""Shared domain types, roster loading, and pure scoring arithmetic.

Money is two-decimal fixed point (`Decimal` quantized to cents) throughout.
All types are immutable value objects; state evolves only by replacement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation, ROUND_HALF_UP
from pathlib import Path

import yaml

from .errors import DomainError, RosterError

CENT = Decimal("0.01")
TENTH = Decimal("0.1")

SALARY_SCALE = Decimal("5000")  # reference salary in the dish quality formula
DAYS_PER_MONTH = 30

INCOME_BANDS = ("very_poor", "poor", "middle_class", "affluent")
GROUP_TYPES = ("family", "colleague", "couple", "friend")

ROSTER_SCHEMA_VERSION = 1

_WS_RE = re.compile(r"\s+")
_PUNCT_RE = re.compile(r"[^\w\s]", re.UNICODE)


def money(value) -> Decimal:
    """Coerce a number to two-decimal fixed point, half-up."""
    try:
        dec = value if isinstance(value, Decimal) else Decimal(str(value))
    except (InvalidOperation, ValueError) as exc:
        raise DomainError(f"not a currency amount: {value!r}") from exc
    return dec.quantize(CENT, rounding=ROUND_HALF_UP)


def canonical_name(name: str) -> str:
    """Canonical dish-name key: lowercase, trimmed, punctuation stripped,
    whitespace collapsed. Punctuation becomes a separator so hyphenated and
    spaced spellings collide."""
    cleaned = _PUNCT_RE.sub(" ", name.lower())
    return _WS_RE.sub(" ", cleaned).strip()


def score_dish(cost_price, price, chef_salary) -> float:
    """Quality proxy for one dish: half cost-to-price ratio, half chef salary
    against the 5000 reference scale. Unclamped; values above 1 are legal."""
    c = float(cost_price)
    p = float(price)
    f = float(chef_salary)
    if p <= 0:
        raise DomainError("non-positive price")
    if c < 0:
        raise DomainError("negative cost price")
    if f < 0:
        raise DomainError("negative chef salary")
    return 0.5 * (c / p) + 0.5 * (f / float(SALARY_SCALE))


def customer_score(comments) -> float | None:
    """Running reputation: mean of all comment scores so far, one decimal,
    half-up. None when there are no comments yet."""
    scores = [c.score for c in comments]
    if not scores:
        return None
    mean = Decimal(sum(scores)) / Decimal(len(scores))
    return float(mean.quantize(TENTH, rounding=ROUND_HALF_UP))


def band_for_income(income) -> str:
    """Income band thresholds, fitted to the bundled roster."""
    value = money(income)
    if value <= Decimal("5800"):
        return "very_poor"
    if value < Decimal("8000"):
        return "poor"
    if value < Decimal("12000"):
        return "middle_class"
    return "affluent"


# --- value types -----------------------------------------------------------


@dataclass(frozen=True)
class Dish:
    name: str
    price: Decimal
    cost_price: Decimal
    description: str = ""

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise DomainError("dish name must be non-empty")
        object.__setattr__(self, "price", money(self.price))
        object.__setattr__(self, "cost_price", money(self.cost_price))
        if self.price <= 0:
            raise DomainError(f"dish {self.name!r}: non-positive price")
        if self.cost_price < 0:
            raise DomainError(f"dish {self.name!r}: negative cost price")

    @property
    def key(self) -> str:
        return canonical_name(self.name)


@dataclass(frozen=True)
class Chef:
    name: str
    salary: Decimal  # per month

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise DomainError("chef name must be non-empty")
        object.__setattr__(self, "salary", money(self.salary))
        if self.salary < 0:
            raise DomainError(f"chef {self.name!r}: negative salary")


@dataclass(frozen=True)
class Comment:
    day: int
    author: str
    score: int
    content: str

    def __post_init__(self):
        if self.day < 1:
            raise DomainError("comment day must be >= 1")
        if not isinstance(self.score, int) or not 1 <= self.score <= 10:
            raise DomainError(f"comment score {self.score!r} outside [1, 10]")


@dataclass(frozen=True)
class Daybook:
    day: int
    income: Decimal
    expense: Decimal
    num_of_customer: int
    dishes_sold: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.day < 1:
            raise DomainError("daybook day must be >= 1")
        object.__setattr__(self, "income", money(self.income))
        object.__setattr__(self, "expense", money(self.expense))
        if self.income < 0 or self.expense < 0:
            raise DomainError("daybook income/expense must be >= 0")
        if self.num_of_customer < 0:
            raise DomainError("daybook customer count must be >= 0")
        object.__setattr__(self, "dishes_sold", tuple(
            (name, int(qty)) for name, qty in self.dishes_sold))


@dataclass(frozen=True)
class RestaurantState:
    """Full mutable-by-replacement state of one competitor."""

    rid: str
    name: str
    funds: Decimal
    rent: Decimal  # per month
    chefs: tuple[Chef, ...] = ()
    menu: tuple[Dish, ...] = ()
    advertisement: str = ""
    comments: tuple[Comment, ...] = ()
    daybooks: tuple[Daybook, ...] = ()
    memory: tuple[str, ...] = ()
    status: str = "active"

    def __post_init__(self):
        object.__setattr__(self, "funds", money(self.funds))
        object.__setattr__(self, "rent", money(self.rent))
        if self.rent < 0:
            raise DomainError("rent must be >= 0")
        if self.status not in ("active", "quit"):
            raise DomainError(f"unknown status {self.status!r}")
        object.__setattr__(self, "chefs", tuple(self.chefs))
        object.__setattr__(self, "menu", tuple(self.menu))
        object.__setattr__(self, "comments", tuple(self.comments))
        object.__setattr__(self, "daybooks", tuple(self.daybooks))
        object.__setattr__(self, "memory", tuple(self.memory))
        keys = [d.key for d in self.menu]
        if len(keys) != len(set(keys)):
            raise DomainError("menu contains duplicate canonical dish names")
        days = [b.day for b in self.daybooks]
        if days != sorted(days) or len(days) != len(set(days)):
            raise DomainError("daybooks must be strictly ordered by day")

    @property
    def active(self) -> bool:
        return self.status == "active"

    def score(self) -> float | None:
        return customer_score(self.comments)


@dataclass(frozen=True)
class CustomerProfile:
    name: str
    monthly_income: Decimal
    income_band: str
    taste: str
    health: str
    dietary_restriction: str = "None"
    personality: str = ""

    def __post_init__(self):
        object.__setattr__(self, "monthly_income", money(self.monthly_income))
        if self.monthly_income <= 0:
            raise DomainError(f"customer {self.name!r}: income must be > 0")
        if self.income_band not in INCOME_BANDS:
            raise DomainError(
                f"customer {self.name!r}: unknown income band {self.income_band!r}")


@dataclass(frozen=True)
class GroupProfile:
    group_id: str
    group_type: str
    feature: str
    members: tuple[tuple[str, str], ...]  # (customer name, role); first is leader

    def __post_init__(self):
        if self.group_type not in GROUP_TYPES:
            raise DomainError(
                f"group {self.group_id!r}: unknown type {self.group_type!r}")
        object.__setattr__(self, "members", tuple(
            (str(n), str(r)) for n, r in self.members))
        if not 2 <= len(self.members) <= 4:
            raise DomainError(
                f"group {self.group_id!r}: size {len(self.members)} outside [2, 4]")

    @property
    def leader(self) -> str:
        return self.members[0][0]

    @property
    def member_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.members)


@dataclass(frozen=True)
class Unit:
    """One decision-making unit: an individual customer or a whole group."""

    unit_id: str
    kind: str  # "individual" | "group"
    profiles: tuple[CustomerProfile, ...]
    roles: tuple[str, ...] = ()
    group_type: str = ""
    feature: str = ""

    @property
    def party_size(self) -> int:
        return len(self.profiles)

    @property
    def leader(self) -> CustomerProfile:
        return self.profiles[0]

    @property
    def member_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.profiles)


# --- roster file -----------------------------------------------------------


def load_roster(roster_file) -> tuple[tuple[CustomerProfile, ...], tuple[GroupProfile, ...]]:
    """Parse and validate a roster file.

    Raises RosterError naming the offending record on duplicate names, unknown
    group members, group sizes outside [2, 4], or band/income mismatches.
    """
    return parse_roster(Path(roster_file).read_text(encoding="utf-8"))


def parse_roster(text: str) -> tuple[tuple[CustomerProfile, ...], tuple[GroupProfile, ...]]:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise RosterError(f"roster does not parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise RosterError("roster root must be a mapping")
    if doc.get("schema_version") != ROSTER_SCHEMA_VERSION:
        raise RosterError(
            f"unsupported roster schema_version {doc.get('schema_version')!r}")

    customers: list[CustomerProfile] = []
    seen: set[str] = set()
    for rec in doc.get("customers") or []:
        name = str(rec.get("name", "")).strip()
        if not name:
            raise RosterError("customer with empty name", record=repr(rec))
        if name in seen:
            raise RosterError("duplicate customer name", record=name)
        seen.add(name)
        restriction = rec.get("dietary_restriction")
        try:
            profile = CustomerProfile(
                name=name,
                monthly_income=rec.get("monthly_income", 0),
                income_band=str(rec.get("income_band", "")),
                taste=str(rec.get("taste", "")),
                health=str(rec.get("health", "")),
                dietary_restriction="None" if restriction in (None, "") else str(restriction),
                personality=str(rec.get("personality", "")),
            )
        except DomainError as exc:
            raise RosterError(str(exc), record=name) from exc
        expected = band_for_income(profile.monthly_income)
        if profile.income_band != expected:
            raise RosterError(
                f"income band {profile.income_band!r} does not match income "
                f"{profile.monthly_income} (expected {expected!r})", record=name)
        customers.append(profile)

    groups: list[GroupProfile] = []
    counters: dict[str, int] = {}
    grouped: set[str] = set()
    for rec in doc.get("groups") or []:
        gtype = str(rec.get("type", ""))
        counters[gtype] = counters.get(gtype, 0) + 1
        gid = str(rec.get("id") or f"{gtype}_{counters[gtype]}")
        raw_members = rec.get("members") or []
        members = []
        for m in raw_members:
            members.append((str(m.get("name", "")), str(m.get("role", "Member"))))
        try:
            group = GroupProfile(
                group_id=gid,
                group_type=gtype,
                feature=str(rec.get("feature", "")),
                members=tuple(members),
            )
        except DomainError as exc:
            raise RosterError(str(exc), record=gid) from exc
        for member_name in group.member_names:
            if member_name not in seen:
                raise RosterError(
                    f"member {member_name!r} not in customer roster", record=gid)
            if member_name in grouped:
                raise RosterError(
                    f"member {member_name!r} appears in more than one group", record=gid)
            grouped.add(member_name)
        groups.append(group)

    return tuple(customers), tuple(groups)


def dump_roster(customers, groups) -> str:
    """Serialize a roster back to its file format (round-trips load_roster)."""
    doc = {
        "schema_version": ROSTER_SCHEMA_VERSION,
        "customers": [
            {
                "name": c.name,
                "monthly_income": float(c.monthly_income),
                "income_band": c.income_band,
                "taste": c.taste,
                "health": c.health,
                "dietary_restriction": c.dietary_restriction,
                "personality": c.personality,
            }
            for c in customers
        ],
        "groups": [
            {
                "id": g.group_id,
                "type": g.group_type,
                "feature": g.feature,
                "members": [{"name": n, "role": r} for n, r in g.members],
            }
            for g in groups
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)


def build_units(customers, groups, mode: str) -> tuple[Unit, ...]:
    """Assemble decision units for a run.

    single mode: every customer decides alone. group mode: grouped customers
    decide jointly; the rest stay individuals.
    """
    if mode not in ("single", "group"):
        raise DomainError(f"unknown roster mode {mode!r}")
    by_name = {c.name: c for c in customers}
    units: list[Unit] = []
    if mode == "single":
        for c in customers:
            units.append(Unit(unit_id=f"single:{c.name}", kind="individual",
                              profiles=(c,), roles=("Self",)))
        return tuple(units)

    grouped: set[str] = set()
    for g in groups:
        profiles = tuple(by_name[n] for n in g.member_names)
        units.append(Unit(unit_id=g.group_id, kind="group", profiles=profiles,
                          roles=tuple(r for _, r in g.members),
                          group_type=g.group_type, feature=g.feature))
        grouped.update(g.member_names)
    for c in customers:
        if c.name not in grouped:
            units.append(Unit(unit_id=f"single:{c.name}", kind="individual",
                              profiles=(c,), roles=("Self",)))
    return tuple(units)


def roster_person_count(units) -> int:
    return sum(u.party_size for u in units)
