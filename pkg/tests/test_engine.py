from __future__ import annotations

from dataclasses import replace

import pytest

from foodcourt.engine import (
    Engine,
    fold_events,
    parse_run_log,
    read_checkpoint,
    resume_engine,
    verify_log,
)
from foodcourt.errors import CheckpointError, LogFormatError
from foodcourt.gateway import Gateway
from foodcourt.scripted import ScriptedBackend, ScriptedPolicy, ScriptedTransport


def quit_policy(day=2, rid="r2") -> ScriptedPolicy:
    return ScriptedPolicy({
        "schema_version": 1, "version": "quit-test",
        "customers": {"default": "price_first"},
        "restaurants": {rid: {day: [
            {"api": "basic_info", "method": "quit", "args": {}}]}},
    })


def run(config, backend, log_path, **kw):
    engine = Engine(config, backend, log_path=log_path)
    cause = engine.run(**kw)
    return engine, cause


class TestDeterminism:
    def test_same_seed_same_log(self, tmp_path, default_config, scripted_backend):
        cfg = default_config.with_overrides(horizon=4, seed=13)
        _, _ = run(cfg, scripted_backend, tmp_path / "a.ndjson")
        _, _ = run(cfg, scripted_backend, tmp_path / "b.ndjson")
        assert (tmp_path / "a.ndjson").read_bytes() == \
            (tmp_path / "b.ndjson").read_bytes()

    def test_workers_do_not_change_results(self, tmp_path, default_config,
                                           scripted_backend):
        sequential = default_config.with_overrides(horizon=3, seed=5, workers=1)
        threaded = default_config.with_overrides(horizon=3, seed=5, workers=4)
        run(sequential, scripted_backend, tmp_path / "seq.ndjson")
        run(threaded, scripted_backend, tmp_path / "par.ndjson")
        assert (tmp_path / "seq.ndjson").read_bytes() == \
            (tmp_path / "par.ndjson").read_bytes()

    def test_different_seeds_diverge(self, tmp_path, default_config,
                                     scripted_backend):
        a = default_config.with_overrides(horizon=3, seed=1)
        b = default_config.with_overrides(horizon=3, seed=2)
        run(a, scripted_backend, tmp_path / "a.ndjson")
        run(b, scripted_backend, tmp_path / "b.ndjson")
        assert (tmp_path / "a.ndjson").read_bytes() != \
            (tmp_path / "b.ndjson").read_bytes()


class TestEventSourcing:
    def test_fold_reconstructs_final_state(self, session_run, default_config):
        engine, _, log_path = session_run
        header, events = parse_run_log(str(log_path))
        cfg = default_config.with_overrides(seed=7)
        initial = {s.rid: s.initial_state() for s in cfg.restaurants}
        folded = fold_events(initial, events, memory_window=cfg.memory_window)
        assert folded == engine.restaurants

    def test_verify_log_clean(self, session_run):
        _, _, log_path = session_run
        header, events = parse_run_log(str(log_path))
        assert verify_log(header, events) == []

    def test_log_parse_rejects_bad_line(self, tmp_path, session_run):
        _, _, log_path = session_run
        lines = log_path.read_text().splitlines()
        lines[3] = "{not json"
        bad = tmp_path / "bad.ndjson"
        bad.write_text("\n".join(lines) + "\n")
        with pytest.raises(LogFormatError) as err:
            parse_run_log(str(bad))
        assert err.value.line_no == 4


class TestTermination:
    def test_horizon_cause_and_day_count(self, session_run):
        engine, cause, log_path = session_run
        assert cause == "horizon"
        assert engine.days_completed == 15
        header, events = parse_run_log(str(log_path))
        settled = [e for e in events if e.type == "DaySettled"]
        assert len(settled) == 30  # 15 days x 2 restaurants

    def test_voluntary_quit_ends_run_after_day(self, tmp_path, default_config):
        backend = ScriptedBackend(quit_policy(day=2, rid="r2"))
        engine, cause = run(default_config.with_overrides(horizon=6, seed=3),
                            backend, tmp_path / "q.ndjson")
        assert cause == "voluntary_quit"
        assert engine.days_completed == 2
        header, events = parse_run_log(str(tmp_path / "q.ndjson"))
        day2 = [e for e in events if e.day == 2]
        frozen = [e for e in day2 if e.type == "MenuFrozen"]
        assert [e.data["restaurant"] for e in frozen] == ["r1"]
        decisions = [e for e in day2 if e.type == "DecisionMade"]
        assert decisions and all(e.data["forced"] for e in decisions)
        assert all(e.data["restaurant"] == "r1" for e in decisions)
        settled = [e for e in day2 if e.type == "DaySettled"]
        assert len(settled) == 1 and settled[0].data["num_of_customer"] == 50
        assert verify_log(header, events) == []

    def test_insolvency_forces_termination(self, tmp_path, default_config,
                                           scripted_backend):
        bankrupt = tuple(replace(s, funds=s.funds * 0 + 1, rent=s.rent * 30)
                         for s in default_config.restaurants)
        cfg = replace(default_config.with_overrides(horizon=5, seed=1),
                      restaurants=bankrupt)
        engine, cause = run(cfg, scripted_backend, tmp_path / "broke.ndjson")
        assert cause == "insolvency"
        assert engine.days_completed == 1
        assert any(st.funds < 0 and st.status == "quit"
                   for st in engine.restaurants.values())

    def test_horizon_one_has_all_phases(self, tmp_path, default_config,
                                        scripted_backend):
        cfg = default_config.with_overrides(horizon=1, seed=9)
        _, cause = run(cfg, scripted_backend, tmp_path / "one.ndjson")
        assert cause == "horizon"
        _, events = parse_run_log(str(tmp_path / "one.ndjson"))
        kinds = {e.type for e in events}
        assert {"TurnCommitted", "MenuFrozen", "DecisionMade", "OrderPlaced",
                "ExperienceRecorded", "CommentPosted", "DaySettled",
                "Terminated"} <= kinds

    def test_request_cap_aborts_cleanly(self, tmp_path, default_config, policy):
        from foodcourt.runtime import GatewayBackend
        cache = tmp_path / "cap.cache"
        gateway = Gateway("record", transport=ScriptedTransport(policy),
                          cache_path=cache, request_cap=10)
        backend = GatewayBackend(gateway, "scripted-town", temperature=0.0)
        cfg = default_config.with_overrides(horizon=3, seed=2,
                                            gateway_mode="record")
        engine = Engine(cfg, backend, gateway=gateway,
                        log_path=tmp_path / "cap.ndjson")
        cause = engine.run()
        assert cause == "request_cap"
        _, events = parse_run_log(str(tmp_path / "cap.ndjson"))
        assert events[-1].type == "Terminated"
        assert events[-1].data["cause"] == "request_cap"


class TestCheckpoint:
    def test_resume_matches_uninterrupted_run(self, tmp_path, default_config,
                                              scripted_backend):
        cfg = default_config.with_overrides(horizon=5, seed=21)
        run(cfg, scripted_backend, tmp_path / "full.ndjson")

        ckpt = tmp_path / "mid.ckpt"
        engine = Engine(cfg, scripted_backend, log_path=tmp_path / "part.ndjson")
        paused = engine.run(stop_after_day=2, checkpoint_path=ckpt)
        assert paused is None

        payload = read_checkpoint(ckpt)
        resumed = resume_engine(payload, scripted_backend,
                                log_path=tmp_path / "resumed.ndjson")
        cause = resumed.run()
        assert cause == "horizon"
        assert (tmp_path / "resumed.ndjson").read_bytes() == \
            (tmp_path / "full.ndjson").read_bytes()

    def test_checkpoint_at_day_zero_is_identity(self, tmp_path, default_config,
                                                scripted_backend):
        cfg = default_config.with_overrides(horizon=2, seed=4)
        engine = Engine(cfg, scripted_backend, log_path=tmp_path / "z.ndjson")
        engine.write_checkpoint(tmp_path / "zero.ckpt")
        payload = read_checkpoint(tmp_path / "zero.ckpt")
        resumed = resume_engine(payload, scripted_backend,
                                log_path=tmp_path / "z2.ndjson")
        assert resumed.next_day == 1
        assert resumed.restaurants == engine.restaurants
        cause = resumed.run()
        assert cause == "horizon"

    def test_tampered_checkpoint_rejected(self, tmp_path, default_config,
                                          scripted_backend):
        cfg = default_config.with_overrides(horizon=2, seed=4)
        engine = Engine(cfg, scripted_backend, log_path=tmp_path / "t.ndjson")
        engine.run(stop_after_day=1, checkpoint_path=tmp_path / "t.ckpt")
        raw = bytearray((tmp_path / "t.ckpt").read_bytes())
        raw[-1] ^= 0xFF
        (tmp_path / "t.ckpt").write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="checksum"):
            read_checkpoint(tmp_path / "t.ckpt")

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"JUNKJUNK" + b"0" * 64 + b"{}")
        with pytest.raises(CheckpointError, match="not a checkpoint"):
            read_checkpoint(path)


class TestHeader:
    def test_header_contents(self, session_run):
        _, _, log_path = session_run
        header, _ = parse_run_log(str(log_path))
        assert header["mode"] == "group"
        assert header["seed"] == 7
        assert header["roster_persons"] == 50
        assert header["unit_count"] == 25
        assert set(header["restaurants"]) == {"r1", "r2"}
        assert header["template_version"] == "default-v1"
        assert len(header["config_hash"]) == 64
