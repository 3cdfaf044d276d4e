from __future__ import annotations

from decimal import Decimal

from hypothesis import given, strategies as st

from foodcourt.domain import Chef, Daybook, Dish, RestaurantState
from foodcourt.errors import TransportError
from foodcourt.restaurant import (
    AddDish,
    AdjustSalary,
    DeleteDish,
    FireChef,
    HireChef,
    ModifyAd,
    ModifyDish,
    ModifyName,
    Quit,
    rival_view,
)
from foodcourt.runtime import (
    build_restaurant_prompt,
    make_turn_context,
    parse_tool_calls,
    run_restaurant_turn,
    serialize_actions,
    strip_action_block,
    truncate_after_quit,
    update_memory,
)


def state_with_history(days=5) -> RestaurantState:
    books = tuple(Daybook(day=d, income=10 * d, expense=5, num_of_customer=d)
                  for d in range(1, days + 1))
    return RestaurantState(
        rid="r1", name="Golden Fork", funds=1000, rent=3000,
        chefs=(Chef("Marco", 2500),), menu=(Dish("Burger", 12, 4),),
        advertisement="ad", daybooks=books,
        memory=tuple(f"note {i}" for i in range(7)))


class StubBackend:
    """Replays queued completions; records every request."""

    identity = "stub"

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []

    def complete(self, system, messages):
        self.requests.append((system, [dict(m) for m in messages]))
        if not self.replies:
            return "no more replies"
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


class TestPrompt:
    def test_day_one_omits_history_sections(self, templates):
        state = RestaurantState(rid="r1", name="Golden Fork", funds=1000,
                                rent=3000, menu=(Dish("Burger", 12, 4),))
        rival = rival_view(state, 1)
        ctx = make_turn_context(state, 1, rival)
        _, user = build_restaurant_prompt(ctx, templates)
        assert "Recent daybooks" not in user
        assert "Rival restaurant" not in user
        assert "notes from previous days" not in user

    def test_identical_contexts_render_identically(self, templates):
        state = state_with_history()
        ctx_a = make_turn_context(state, 6, rival_view(state, 6))
        ctx_b = make_turn_context(state, 6, rival_view(state, 6))
        assert build_restaurant_prompt(ctx_a, templates) == \
            build_restaurant_prompt(ctx_b, templates)

    def test_daybook_window_keeps_last_three(self, templates):
        ctx = make_turn_context(state_with_history(days=5), 6, None)
        assert [b.day for b in ctx.daybooks] == [3, 4, 5]
        _, user = build_restaurant_prompt(ctx, templates)
        assert "- day 2:" not in user
        assert "- day 5:" in user

    def test_memory_window_keeps_last_five(self):
        ctx = make_turn_context(state_with_history(), 6, None)
        assert list(ctx.memory) == [f"note {i}" for i in range(2, 7)]


class TestParse:
    def test_happy_path_single_add(self):
        text = ('Some analysis.\n\n```json\n'
                '[{"api": "menu", "method": "add", "args": {"name": "Vegan '
                'Delight Salad", "price": 12, "cost_price": 4, "description": "x"}}]'
                '\n```')
        actions, diagnostics = parse_tool_calls(text)
        assert diagnostics == ()
        assert actions == (AddDish(Dish("Vegan Delight Salad", 12, 4, "x")),)

    def test_prose_only_yields_no_action_block(self):
        actions, diagnostics = parse_tool_calls("I will think about it tomorrow.")
        assert actions == ()
        assert any("no action block" in d for d in diagnostics)

    def test_negative_salary_diagnostic(self):
        text = '```json\n[{"api":"chef","method":"hire","args":{"name":"A","salary":-5}}]\n```'
        actions, diagnostics = parse_tool_calls(text)
        assert actions == ()
        assert any("negative salary" in d for d in diagnostics)

    def test_every_violation_listed(self):
        text = ('```json\n[{"api":"chef","method":"hire","args":{"name":"A","salary":-5}},'
                '{"api":"nope","method":"x","args":{}}]\n```')
        _, diagnostics = parse_tool_calls(text)
        assert len(diagnostics) == 2

    def test_non_array_block(self):
        _, diagnostics = parse_tool_calls('```json\n{"api":"menu"}\n```')
        assert any("array" in d for d in diagnostics)

    def test_invalid_json_block(self):
        _, diagnostics = parse_tool_calls("```json\n[{]\n```")
        assert any("not valid JSON" in d for d in diagnostics)

    def test_last_block_wins(self):
        text = ('```json\n[{"api":"advertisement","method":"modify","args":'
                '{"content":"first"}}]\n```\nwait, better:\n'
                '```json\n[{"api":"advertisement","method":"modify","args":'
                '{"content":"second"}}]\n```')
        actions, diagnostics = parse_tool_calls(text)
        assert diagnostics == ()
        assert actions == (ModifyAd("second"),)

    def test_strip_action_block(self):
        text = "thinking...\n```json\n[]\n```"
        assert strip_action_block(text) == "thinking..."


_actions = st.one_of(
    st.builds(ModifyName, name=st.text(min_size=1, max_size=20).filter(str.strip)),
    st.builds(HireChef, name=st.text(min_size=1, max_size=10).filter(str.strip),
              salary=st.decimals(min_value=0, max_value=9000, places=2)),
    st.builds(FireChef, name=st.text(min_size=1, max_size=10).filter(str.strip)),
    st.builds(AdjustSalary, name=st.text(min_size=1, max_size=10).filter(str.strip),
              salary=st.decimals(min_value=0, max_value=9000, places=2)),
    st.builds(AddDish, dish=st.builds(
        Dish,
        name=st.text(min_size=1, max_size=16).filter(lambda s: s.strip()),
        price=st.decimals(min_value="0.01", max_value=200, places=2),
        cost_price=st.decimals(min_value=0, max_value=100, places=2),
        description=st.text(max_size=30))),
    st.builds(DeleteDish, name=st.text(min_size=1, max_size=10).filter(str.strip)),
    st.builds(ModifyDish, name=st.text(min_size=1, max_size=10).filter(str.strip),
              price=st.decimals(min_value="0.01", max_value=200, places=2)),
    st.builds(ModifyAd, content=st.text(max_size=40)),
    st.just(Quit()),
)


class TestRoundTrip:
    @given(st.lists(_actions, max_size=4))
    def test_serialize_then_parse_is_identity(self, actions):
        actions = truncate_after_quit(tuple(actions))[0]
        parsed, diagnostics = parse_tool_calls(serialize_actions(actions))
        assert diagnostics == ()
        assert [_norm(a) for a in parsed] == [_norm(a) for a in actions]


def _norm(action):
    if isinstance(action, (HireChef, AdjustSalary)):
        return type(action).__name__, action.name, Decimal(str(action.salary))
    if isinstance(action, ModifyDish):
        price = None if action.price is None else Decimal(str(action.price))
        return "ModifyDish", action.name, price, action.cost_price, action.description
    return action


class TestTurn:
    def ctx(self):
        return make_turn_context(state_with_history(), 6, None)

    def test_valid_actions_committed_verbatim(self, templates):
        reply = ('plan\n```json\n[{"api":"advertisement","method":"modify",'
                 '"args":{"content":"new ad"}}]\n```')
        backend = StubBackend([reply, "summary text"])
        result = run_restaurant_turn(backend, self.ctx(), templates,
                                     validate=lambda actions: None)
        assert result.actions == (ModifyAd("new ad"),)
        assert result.summary == "summary text"
        assert not result.failed
        assert result.attempts == 1

    def test_three_malformed_replies_become_noop(self, templates):
        backend = StubBackend(["bad", "worse", "worst", "auto?"])
        result = run_restaurant_turn(backend, self.ctx(), templates,
                                     validate=lambda actions: None)
        assert result.actions == ()
        assert result.failed
        assert result.attempts == 3
        assert result.summary  # fallback summary always produced

    def test_diagnostics_fed_back_on_retry(self, templates):
        backend = StubBackend([
            "no block here",
            'ok\n```json\n[]\n```',
            "summary",
        ])
        result = run_restaurant_turn(backend, self.ctx(), templates,
                                     validate=lambda actions: None)
        assert result.attempts == 2
        retry_prompt = backend.requests[1][1][-1]["content"]
        assert "no action block" in retry_prompt

    def test_validation_failure_is_atomic(self, templates):
        reply = ('```json\n[{"api":"advertisement","method":"modify",'
                 '"args":{"content":"x"}},{"api":"menu","method":"delete",'
                 '"args":{"name":"Ghost"}}]\n```')
        backend = StubBackend([reply, reply, reply, "s"])
        result = run_restaurant_turn(backend, self.ctx(), templates,
                                     validate=lambda actions: "no dish Ghost"
                                     if any(isinstance(a, DeleteDish) for a in actions)
                                     else None)
        assert result.actions == ()
        assert result.failed

    def test_quit_stops_processing(self, templates):
        reply = ('```json\n[{"api":"basic_info","method":"quit","args":{}},'
                 '{"api":"advertisement","method":"modify","args":{"content":"x"}}]\n```')
        backend = StubBackend([reply, "s"])
        result = run_restaurant_turn(backend, self.ctx(), templates,
                                     validate=lambda actions: None)
        assert result.actions == (Quit(),)
        assert result.dropped_after_quit == 1

    def test_transport_failure_is_noop_day(self, templates):
        backend = StubBackend([TransportError("down"), TransportError("down")])
        result = run_restaurant_turn(backend, self.ctx(), templates,
                                     validate=lambda actions: None)
        assert result.actions == ()
        assert result.failed
        assert "transport" in result.failure_reason


class TestMemory:
    def test_window_drops_oldest(self):
        memory = tuple(str(i) for i in range(5))
        assert update_memory(memory, "new") == ("1", "2", "3", "4", "new")

    def test_append_to_empty(self):
        assert update_memory((), "s") == ("s",)

    def test_order_preserved(self):
        out = ()
        for i in range(3):
            out = update_memory(out, str(i))
        assert out == ("0", "1", "2")
