"""The management system exposed to restaurant agents.

Applies management actions to restaurant state, enforces money and resource
constraints, freezes the daily menu, settles accounting, and assembles the
customer-facing and rival-facing views. Monthly rent and salaries are prorated
at 1/30 per simulated day, each term quantized to cents before summing so the
funds recurrence is exact in fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Union

from .domain import (
    CENT,
    DAYS_PER_MONTH,
    Chef,
    Daybook,
    Dish,
    RestaurantState,
    canonical_name,
    customer_score,
    money,
    score_dish,
)
from .errors import ActionError, DomainError

PUBLIC_COMMENT_CAP = 20  # most recent comments shown to customers
HIRE_RUNWAY_DAYS = 3     # funds must cover this many days of fixed costs after a hire


# --- actions ----------------------------------------------------------------


@dataclass(frozen=True)
class ModifyName:
    name: str


@dataclass(frozen=True)
class HireChef:
    name: str
    salary: Decimal


@dataclass(frozen=True)
class FireChef:
    name: str


@dataclass(frozen=True)
class AdjustSalary:
    name: str
    salary: Decimal


@dataclass(frozen=True)
class AddDish:
    dish: Dish


@dataclass(frozen=True)
class DeleteDish:
    name: str


@dataclass(frozen=True)
class ModifyDish:
    name: str
    price: Decimal | None = None
    cost_price: Decimal | None = None
    description: str | None = None


@dataclass(frozen=True)
class ModifyAd:
    content: str


@dataclass(frozen=True)
class Quit:
    pass


Action = Union[ModifyName, HireChef, FireChef, AdjustSalary, AddDish,
               DeleteDish, ModifyDish, ModifyAd, Quit]


def daily_fixed_costs(rent: Decimal, chefs) -> Decimal:
    """Per-day share of rent plus salaries, each term quantized to cents."""
    total = (rent / DAYS_PER_MONTH).quantize(CENT)
    for chef in chefs:
        total += (chef.salary / DAYS_PER_MONTH).quantize(CENT)
    return total


def _find_chef(state: RestaurantState, name: str) -> Chef:
    for chef in state.chefs:
        if chef.name == name:
            return chef
    raise ActionError("unknown-entity", f"no chef named {name!r}")


def _find_dish(state: RestaurantState, name: str) -> Dish:
    key = canonical_name(name)
    for dish in state.menu:
        if dish.key == key:
            return dish
    raise ActionError("unknown-entity", f"no dish named {name!r} on the menu")


def apply_action(state: RestaurantState, action: Action) -> RestaurantState:
    """Apply one management action, returning the updated state.

    Pure with respect to its inputs. Raises ActionError with a machine-readable
    code when the action is rejected; the input state is never modified.
    """
    if not state.active:
        raise ActionError("inactive", "restaurant has quit and accepts no actions")

    if isinstance(action, ModifyName):
        if not action.name.strip():
            raise ActionError("invalid-argument", "restaurant name must be non-empty")
        return replace(state, name=action.name.strip())

    if isinstance(action, HireChef):
        try:
            chef = Chef(action.name, action.salary)
        except DomainError as exc:
            raise ActionError("invalid-argument", str(exc)) from exc
        if any(c.name == chef.name for c in state.chefs):
            raise ActionError("duplicate-chef", f"chef {chef.name!r} already employed")
        projected = daily_fixed_costs(state.rent, state.chefs + (chef,))
        if state.funds < projected * HIRE_RUNWAY_DAYS:
            raise ActionError(
                "insufficient-runway",
                f"hiring {chef.name!r} needs {HIRE_RUNWAY_DAYS} days of fixed costs "
                f"({projected * HIRE_RUNWAY_DAYS}) but funds are {state.funds}")
        return replace(state, chefs=state.chefs + (chef,))

    if isinstance(action, FireChef):
        chef = _find_chef(state, action.name)
        return replace(state, chefs=tuple(c for c in state.chefs if c.name != chef.name))

    if isinstance(action, AdjustSalary):
        chef = _find_chef(state, action.name)
        try:
            updated = Chef(chef.name, action.salary)
        except DomainError as exc:
            raise ActionError("invalid-argument", str(exc)) from exc
        return replace(state, chefs=tuple(
            updated if c.name == chef.name else c for c in state.chefs))

    if isinstance(action, AddDish):
        if any(d.key == action.dish.key for d in state.menu):
            raise ActionError("duplicate-dish",
                              f"dish {action.dish.name!r} already on the menu")
        return replace(state, menu=state.menu + (action.dish,))

    if isinstance(action, DeleteDish):
        dish = _find_dish(state, action.name)
        if len(state.menu) == 1:
            raise ActionError("empty-menu", "cannot delete the last dish")
        return replace(state, menu=tuple(d for d in state.menu if d.key != dish.key))

    if isinstance(action, ModifyDish):
        dish = _find_dish(state, action.name)
        try:
            updated = Dish(
                name=dish.name,
                price=dish.price if action.price is None else action.price,
                cost_price=dish.cost_price if action.cost_price is None else action.cost_price,
                description=dish.description if action.description is None else action.description,
            )
        except DomainError as exc:
            raise ActionError("invalid-argument", str(exc)) from exc
        return replace(state, menu=tuple(
            updated if d.key == dish.key else d for d in state.menu))

    if isinstance(action, ModifyAd):
        return replace(state, advertisement=action.content)

    if isinstance(action, Quit):
        return replace(state, status="quit")

    raise ActionError("unknown-action", f"unsupported action {type(action).__name__}")


# --- daily snapshot, orders, settlement --------------------------------------


@dataclass(frozen=True)
class FrozenMenu:
    """Immutable menu snapshot used for one day's views, orders, and settlement."""

    rid: str
    day: int
    dishes: tuple[Dish, ...]

    def find(self, name: str) -> Dish | None:
        key = canonical_name(name)
        for dish in self.dishes:
            if dish.key == key:
                return dish
        return None


def freeze_day_menu(state: RestaurantState, day: int) -> FrozenMenu:
    return FrozenMenu(rid=state.rid, day=day, dishes=state.menu)


def score_menu(chefs, menu) -> tuple[tuple[str, float], ...]:
    """Score every dish using the highest-paid chef's salary; zero chefs score
    with salary 0 (the caller logs the warning)."""
    top = max((c.salary for c in chefs), default=Decimal(0))
    return tuple((dish.name, score_dish(dish.cost_price, dish.price, top))
                 for dish in menu)


@dataclass(frozen=True)
class Order:
    unit_id: str
    restaurant_id: str
    items: tuple[tuple[str, int], ...]  # (dish name, quantity >= 1)
    total: Decimal
    party_size: int


def make_order(unit_id: str, frozen: FrozenMenu, items, party_size: int) -> Order:
    """Build an order against a frozen menu, computing the exact total."""
    normalized: list[tuple[str, int]] = []
    total = Decimal(0)
    for name, qty in items:
        qty = int(qty)
        if qty < 1:
            raise DomainError(f"order quantity {qty} for {name!r} must be >= 1")
        dish = frozen.find(name)
        if dish is None:
            raise DomainError(f"dish {name!r} not on the day-{frozen.day} menu")
        normalized.append((dish.name, qty))
        total += dish.price * qty
    if not normalized:
        raise DomainError("order must contain at least one dish")
    return Order(unit_id=unit_id, restaurant_id=frozen.rid,
                 items=tuple(normalized), total=money(total),
                 party_size=party_size)


def settle_day(state: RestaurantState, day: int, orders,
               frozen: FrozenMenu) -> tuple[RestaurantState, Daybook]:
    """Close one day's books: income from orders, prorated fixed costs plus
    ingredient costs, customer count in persons. Funds dropping below zero
    forces the restaurant to quit."""
    if any(b.day == day for b in state.daybooks):
        raise DomainError(f"day {day} already settled for {state.rid}")

    income = Decimal(0)
    ingredient_cost = Decimal(0)
    persons = 0
    sold: dict[str, int] = {}
    for order in orders:
        if order.restaurant_id != state.rid:
            raise DomainError(f"order for {order.restaurant_id} routed to {state.rid}")
        for name, qty in order.items:
            dish = frozen.find(name)
            if dish is None:
                raise DomainError(
                    f"settlement error: order references unknown dish {name!r}")
            ingredient_cost += dish.cost_price * qty
            sold[dish.name] = sold.get(dish.name, 0) + qty
        income += order.total
        persons += order.party_size

    expense = money(daily_fixed_costs(state.rent, state.chefs) + ingredient_cost)
    income = money(income)
    daybook = Daybook(
        day=day, income=income, expense=expense, num_of_customer=persons,
        dishes_sold=tuple(sorted(sold.items())),
    )
    funds = money(state.funds + income - expense)
    status = state.status if funds >= 0 else "quit"
    new_state = replace(state, funds=funds, daybooks=state.daybooks + (daybook,),
                        status=status)
    return new_state, daybook


# --- views -------------------------------------------------------------------


@dataclass(frozen=True)
class PublicInfo:
    """What customers see. Never includes cost prices, funds, or salaries."""

    rid: str
    day: int
    name: str
    customer_score: float | None
    advertisement: str
    menu: tuple[tuple[str, Decimal, str], ...]  # (name, price, description)
    comments: tuple[tuple[int, str, int, str], ...]  # (day, author, score, content)

    def to_payload(self) -> dict:
        return {
            "id": self.rid,
            "name": self.name,
            "customer_score": self.customer_score,
            "advertisement": self.advertisement,
            "menu": [{"name": n, "price": str(p), "description": d}
                     for n, p, d in self.menu],
            "comments": [{"day": d, "author": a, "score": s, "content": c}
                         for d, a, s, c in self.comments],
        }


def public_view(state: RestaurantState, day: int, frozen: FrozenMenu,
                comment_cap: int = PUBLIC_COMMENT_CAP) -> PublicInfo:
    """Customer-facing info for the day: frozen menu, running score, current ad,
    and the most recent prior-day comments."""
    recent = state.comments[-comment_cap:] if comment_cap else state.comments
    return PublicInfo(
        rid=state.rid,
        day=day,
        name=state.name,
        customer_score=customer_score(state.comments),
        advertisement=state.advertisement,
        menu=tuple((d.name, d.price, d.description) for d in frozen.dishes),
        comments=tuple((c.day, c.author, c.score, c.content) for c in recent),
    )


@dataclass(frozen=True)
class RivalInfo:
    """Previous-day slice of the rival shown to a manager. No funds, no costs."""

    rid: str
    name: str
    menu: tuple[tuple[str, Decimal, str], ...]
    customer_flow: int | None  # persons served on the previous day
    comments: tuple[tuple[int, str, int, str], ...]  # previous day only

    def to_payload(self) -> dict:
        return {
            "id": self.rid,
            "name": self.name,
            "menu": [{"name": n, "price": str(p), "description": d}
                     for n, p, d in self.menu],
            "customer_flow": self.customer_flow,
            "comments": [{"day": d, "author": a, "score": s, "content": c}
                         for d, a, s, c in self.comments],
        }


def rival_view(state: RestaurantState, day: int) -> RivalInfo:
    """Rival info as of the previous completed day. Called before any day-`day`
    turn is applied, so state.menu is exactly yesterday's closing menu. On day 1
    only the starting menu is available."""
    flow = None
    comments: tuple = ()
    if day >= 2:
        for book in state.daybooks:
            if book.day == day - 1:
                flow = book.num_of_customer
                break
        comments = tuple((c.day, c.author, c.score, c.content)
                         for c in state.comments if c.day == day - 1)
    return RivalInfo(
        rid=state.rid,
        name=state.name,
        menu=tuple((d.name, d.price, d.description) for d in state.menu),
        customer_flow=flow,
        comments=comments,
    )
