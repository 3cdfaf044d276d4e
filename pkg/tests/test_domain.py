from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from foodcourt.domain import (
    Chef,
    Comment,
    Daybook,
    Dish,
    RestaurantState,
    band_for_income,
    build_units,
    canonical_name,
    customer_score,
    dump_roster,
    money,
    parse_roster,
    score_dish,
)
from foodcourt.errors import DomainError, RosterError


def comments(*scores, day=1):
    return [Comment(day=day, author="a", score=s, content="x") for s in scores]


class TestScoreDish:
    def test_listed_examples(self):
        assert score_dish(5, 10, 2500) == pytest.approx(0.5, abs=1e-12)
        assert score_dish(10, 10, 5000) == pytest.approx(1.0, abs=1e-12)
        assert score_dish(0, 10, 0) == 0.0

    def test_unclamped_above_one(self):
        assert score_dish(20, 10, 6000) > 1.0

    def test_non_positive_price_rejected(self):
        with pytest.raises(DomainError, match="non-positive price"):
            score_dish(5, 0, 1000)
        with pytest.raises(DomainError):
            score_dish(5, -3, 1000)

    def test_negative_inputs_rejected(self):
        with pytest.raises(DomainError):
            score_dish(-1, 10, 0)
        with pytest.raises(DomainError):
            score_dish(1, 10, -5)

    @given(c=st.floats(0, 100), p=st.floats(0.01, 100), f=st.floats(0, 10000),
           dc=st.floats(0, 50), df=st.floats(0, 5000))
    def test_monotone_in_cost_and_salary(self, c, p, f, dc, df):
        base = score_dish(c, p, f)
        assert score_dish(c + dc, p, f) >= base
        assert score_dish(c, p, f + df) >= base

    @given(c=st.floats(0.01, 100), p=st.floats(0.01, 100), f=st.floats(0, 10000),
           dp=st.floats(0.01, 50))
    def test_strictly_decreasing_in_price(self, c, p, f, dp):
        assert score_dish(c, p + dp, f) < score_dish(c, p, f)

    @given(c=st.floats(0, 100), p=st.floats(0.1, 100), f=st.floats(0, 10000),
           k=st.floats(0.1, 10))
    def test_ratio_invariance(self, c, p, f, k):
        assert score_dish(k * c, k * p, f) == pytest.approx(
            score_dish(c, p, f), rel=1e-9, abs=1e-9)


class TestCustomerScore:
    def test_empty_is_absent(self):
        assert customer_score([]) is None

    def test_two_point_mean(self):
        assert customer_score(comments(7, 8)) == 7.5

    def test_rounding_half_up_to_one_decimal(self):
        assert customer_score(comments(7, 7, 8)) == 7.3

    @given(st.integers(1, 10))
    def test_single_element_is_identity(self, s):
        assert customer_score(comments(s)) == float(s)


class TestCanonicalName:
    def test_normalization(self):
        assert canonical_name("  Vegan   Delight  Salad! ") == "vegan delight salad"
        assert canonical_name("BBQ-Ribs") == canonical_name("bbq ribs")

    def test_distinct_names_stay_distinct(self):
        assert canonical_name("Apple Pie") != canonical_name("Apple Tart")


class TestMoney:
    def test_quantized_to_cents(self):
        assert money(8.3) == Decimal("8.30")
        assert money("2500") / 30 != money(money("2500") / 30)
        assert money(money("2500") / 30) == Decimal("83.33")


class TestValueTypes:
    def test_dish_invariants(self):
        with pytest.raises(DomainError):
            Dish("", 10, 1)
        with pytest.raises(DomainError):
            Dish("a", 0, 1)
        with pytest.raises(DomainError):
            Dish("a", 10, -1)

    def test_comment_bounds(self):
        with pytest.raises(DomainError):
            Comment(day=1, author="a", score=0, content="")
        with pytest.raises(DomainError):
            Comment(day=1, author="a", score=11, content="")
        with pytest.raises(DomainError):
            Comment(day=0, author="a", score=5, content="")

    def test_menu_rejects_duplicate_canonical_names(self):
        with pytest.raises(DomainError, match="duplicate"):
            RestaurantState(rid="r", name="R", funds=0, rent=0, menu=(
                Dish("Apple Pie", 6, 2), Dish("apple  pie!", 7, 2)))

    def test_daybooks_must_be_ordered(self):
        books = (Daybook(day=2, income=0, expense=0, num_of_customer=0),
                 Daybook(day=1, income=0, expense=0, num_of_customer=0))
        with pytest.raises(DomainError, match="ordered"):
            RestaurantState(rid="r", name="R", funds=0, rent=0, daybooks=books)

    def test_chef_salary_non_negative(self):
        with pytest.raises(DomainError):
            Chef("a", -1)


class TestIncomeBands:
    @pytest.mark.parametrize("income,band", [
        (5000, "very_poor"), (5800, "very_poor"),
        (6000, "poor"), (7900, "poor"),
        (8000, "middle_class"), (11700, "middle_class"),
        (12000, "affluent"), (15000, "affluent"),
    ])
    def test_thresholds(self, income, band):
        assert band_for_income(income) == band


class TestRoster:
    def test_bundled_counts(self, roster):
        customers, groups = roster
        assert len(customers) == 50
        by_type = {}
        for g in groups:
            by_type[g.group_type] = by_type.get(g.group_type, 0) + 1
        assert by_type == {"family": 4, "colleague": 4, "couple": 3, "friend": 4}

    def test_group_mode_partition(self, roster):
        customers, groups = roster
        units = build_units(customers, groups, "group")
        individuals = [u for u in units if u.kind == "individual"]
        group_units = [u for u in units if u.kind == "group"]
        assert len(individuals) == 10
        assert len(group_units) == 15
        assert sum(u.party_size for u in units) == 50

    def test_single_mode_all_individual(self, roster):
        customers, groups = roster
        units = build_units(customers, groups, "single")
        assert len(units) == 50
        assert all(u.kind == "individual" for u in units)

    def test_round_trip(self, roster):
        customers, groups = roster
        again = parse_roster(dump_roster(customers, groups))
        assert again == (customers, groups)

    def test_oversized_group_rejected(self, roster):
        customers, groups = roster
        text = dump_roster(customers, groups).replace(
            "members:\n  - name: Olivia\n    role: Friend\n  - name: Charlie\n    role: Friend",
            "members:\n" + "".join(
                f"  - name: {n}\n    role: Friend\n"
                for n in ("Olivia", "Charlie", "Bob", "David", "Leo")).rstrip())
        with pytest.raises(RosterError, match=r"\[2, 4\]"):
            parse_roster(text)

    def test_duplicate_name_rejected(self, roster):
        customers, groups = roster
        text = dump_roster(customers, groups).replace("name: Xena", "name: Alice", 1)
        with pytest.raises(RosterError, match="duplicate customer name"):
            parse_roster(text)

    def test_unknown_member_rejected(self, roster):
        customers, groups = roster
        text = dump_roster(customers, groups).replace("- name: Olivia\n    role: Friend",
                                                      "- name: Nobody\n    role: Friend")
        with pytest.raises(RosterError, match="Nobody"):
            parse_roster(text)

    def test_band_mismatch_rejected(self, roster):
        customers, groups = roster
        text = dump_roster(customers, groups).replace(
            "income_band: very_poor", "income_band: affluent", 1)
        with pytest.raises(RosterError, match="income band"):
            parse_roster(text)
