from __future__ import annotations

import random
import threading

import pytest

from foodcourt.errors import (
    CacheFormatError,
    CacheMissError,
    RequestCapExceeded,
    TransientTransportError,
    TransportError,
)
from foodcourt.gateway import (
    CACHE_MAGIC,
    CompletionRequest,
    Gateway,
    HttpTransport,
    NullTransport,
    RetryPolicy,
    read_cache,
)


def request(content="hello", model="m1", temperature=0.2) -> CompletionRequest:
    return CompletionRequest(model=model, system="sys",
                             messages=(("user", content),),
                             temperature=temperature, max_tokens=64)


class EchoTransport:
    def __init__(self, fail_times=0):
        self.fail_times = fail_times
        self.calls = 0

    def send(self, payload):
        self.calls += 1
        if self.calls <= self.fail_times:
            raise TransientTransportError("flaky")
        text = payload["messages"][-1]["content"].upper()
        return text, {"prompt_tokens": 3, "completion_tokens": 2}


def no_sleep(_):
    pass


class TestFingerprint:
    def test_identical_requests_identical_hashes(self):
        assert request().fingerprint() == request().fingerprint()

    def test_one_character_difference_changes_hash(self):
        assert request("hello").fingerprint() != request("hello!").fingerprint()

    def test_sampling_parameters_are_part_of_identity(self):
        assert request(temperature=0.2).fingerprint() != \
            request(temperature=0.3).fingerprint()

    def test_hash_is_content_only(self):
        # Nothing timing-related exists on the request; two builds agree.
        a = CompletionRequest("m", "s", (("user", "x"),), 0.1, 10)
        b = CompletionRequest("m", "s", (("user", "x"),), 0.1, 10)
        assert a.fingerprint() == b.fingerprint()


class TestRecordReplay:
    def test_record_persists_one_record_per_call(self, tmp_path):
        cache = tmp_path / "c.cache"
        gw = Gateway("record", transport=EchoTransport(), cache_path=cache,
                     sleep=no_sleep)
        assert gw.complete(request()) == "HELLO"
        assert gw.complete(request()) == "HELLO"
        records = read_cache(cache)
        assert len(records) == 2
        assert records[0].fingerprint == records[1].fingerprint
        assert records[0].response == "HELLO"

    def test_replay_hits_cache_without_network(self, tmp_path):
        cache = tmp_path / "c.cache"
        recorder = Gateway("record", transport=EchoTransport(), cache_path=cache,
                           sleep=no_sleep)
        recorder.complete(request("abc"))
        probe = NullTransport()
        replayer = Gateway("replay", transport=probe, cache_path=cache)
        assert replayer.complete(request("abc")) == "ABC"
        assert probe.calls == 0

    def test_replay_miss_names_fingerprint(self, tmp_path):
        cache = tmp_path / "c.cache"
        Gateway("record", transport=EchoTransport(), cache_path=cache,
                sleep=no_sleep).complete(request("known"))
        replayer = Gateway("replay", cache_path=cache)
        missing = request("unknown")
        with pytest.raises(CacheMissError) as err:
            replayer.complete(missing)
        assert missing.fingerprint() in str(err.value)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.cache"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 10)
        with pytest.raises(CacheFormatError):
            read_cache(path)

    def test_truncated_record_rejected(self, tmp_path):
        path = tmp_path / "trunc.cache"
        path.write_bytes(CACHE_MAGIC + b"\x00\x00\x00\xff" + b"{}")
        with pytest.raises(CacheFormatError):
            read_cache(path)


class TestRetry:
    def test_transient_failures_then_success(self):
        transport = EchoTransport(fail_times=3)
        gw = Gateway("live", transport=transport, sleep=no_sleep,
                     rng=random.Random(1))
        assert gw.complete(request()) == "HELLO"
        assert transport.calls == 4

    def test_attempt_budget_respected(self):
        transport = EchoTransport(fail_times=99)
        gw = Gateway("live", transport=transport, sleep=no_sleep,
                     retry=RetryPolicy(attempts=5, base=0.0),
                     rng=random.Random(1))
        with pytest.raises(TransportError, match="after 5 attempts"):
            gw.complete(request())
        assert transport.calls == 5

    def test_backoff_monotone_up_to_cap(self):
        policy = RetryPolicy(attempts=12, base=1.0, cap=60.0)
        rng = random.Random(42)
        delays = [policy.delay(attempt, rng) for attempt in range(1, 12)]
        assert all(b >= a for a, b in zip(delays, delays[1:]))
        assert max(delays) <= 60.0

    def test_request_cap_aborts_cleanly(self):
        gw = Gateway("live", transport=EchoTransport(), request_cap=2,
                     sleep=no_sleep)
        gw.complete(request("a"))
        gw.complete(request("b"))
        with pytest.raises(RequestCapExceeded):
            gw.complete(request("c"))


class FakeResponse:
    def __init__(self, status_code, body=None, text=""):
        self.status_code = status_code
        self._body = body
        self.text = text

    def json(self):
        if self._body is None:
            raise ValueError("no body")
        return self._body


class FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.requests.append((url, json, headers))
        return self.responses.pop(0)


class TestHttpTransport:
    def completion_body(self, text="hi"):
        return {"choices": [{"message": {"content": text}}],
                "usage": {"prompt_tokens": 5, "completion_tokens": 1}}

    def test_success_parses_content_and_usage(self):
        session = FakeSession([FakeResponse(200, self.completion_body("pong"))])
        transport = HttpTransport("https://svc/v1", api_key="k", session=session)
        text, usage = transport.send(request().wire_payload())
        assert text == "pong"
        assert usage["prompt_tokens"] == 5
        url, payload, headers = session.requests[0]
        assert url == "https://svc/v1/chat/completions"
        assert headers["Authorization"] == "Bearer k"
        assert payload["messages"][0]["role"] == "system"

    def test_retryable_status_raises_transient(self):
        session = FakeSession([FakeResponse(429, text="slow down")])
        transport = HttpTransport("https://svc/v1", session=session)
        with pytest.raises(TransientTransportError):
            transport.send(request().wire_payload())

    def test_client_error_is_fatal(self):
        session = FakeSession([FakeResponse(401, text="nope")])
        transport = HttpTransport("https://svc/v1", session=session)
        with pytest.raises(TransportError) as err:
            transport.send(request().wire_payload())
        assert not isinstance(err.value, TransientTransportError)

    def test_malformed_body_is_fatal(self):
        session = FakeSession([FakeResponse(200, {"choices": []})])
        transport = HttpTransport("https://svc/v1", session=session)
        with pytest.raises(TransportError, match="malformed"):
            transport.send(request().wire_payload())


class TestConcurrency:
    def test_parallel_recording_is_safe(self, tmp_path):
        cache = tmp_path / "c.cache"
        gw = Gateway("record", transport=EchoTransport(), cache_path=cache,
                     parallelism=4, sleep=no_sleep)
        errors = []

        def worker(i):
            try:
                gw.complete(request(f"msg {i}"))
            except Exception as exc:  # noqa: BLE001 - collected for assertion
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert len(read_cache(cache)) == 16
        assert gw.requests_used == 16

    def test_rpm_budget_waits(self):
        clock = {"now": 0.0}
        sleeps = []

        def fake_clock():
            return clock["now"]

        def fake_sleep(seconds):
            sleeps.append(seconds)
            clock["now"] += seconds

        gw = Gateway("live", transport=EchoTransport(), rpm=2,
                     clock=fake_clock, sleep=fake_sleep)
        for i in range(3):
            gw.complete(request(str(i)))
        assert sleeps  # third call had to wait for the window
