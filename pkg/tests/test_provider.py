import json

import httpx
import pytest

from evoforge.provider import (BudgetLedger, ChatClient, CompletionRequest, ProviderError,
                               ResponseCache, TokenBucket, budget_report, complete_many,
                               expected_requests)
from mockllm import Recorder, serve


def client(recorder, tmp_path=None, **kw):
    cache = tmp_path / "cache.jsonl" if tmp_path is not None else None
    kw.setdefault("sleep", lambda s: None)
    return ChatClient(base_url="http://mock", api_key="sk-test", cache_path=cache,
                      transport=recorder.transport(), **kw)


def req(content="hello", **kw):
    return CompletionRequest.user("m", content, **kw)


def test_cache_key_sensitivity():
    base = req()
    assert base.cache_key() == req().cache_key()
    variants = [req("other"), req(temperature=0.5), req(top_p=0.9), req(max_tokens=10),
                CompletionRequest.user("m2", "hello")]
    assert len({v.cache_key() for v in variants} | {base.cache_key()}) == 6


def test_request_validation():
    with pytest.raises(ValueError):
        req(temperature=-1)
    with pytest.raises(ValueError):
        req(top_p=0)
    with pytest.raises(ValueError):
        req(purpose="other")


def test_wire_format_and_auth():
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={"choices": [{"message": {"content": "fixed text"}}],
                                         "usage": {"prompt_tokens": 3, "completion_tokens": 2}})

    c = ChatClient(base_url="http://mock/", api_key="sk-test",
                   transport=httpx.MockTransport(handler))
    assert c.complete(req("hi", temperature=0.5, top_p=0.95)) == "fixed text"
    assert seen["url"] == "http://mock/v1/chat/completions"
    assert seen["auth"] == "Bearer sk-test"
    assert seen["body"] == {"model": "m", "messages": [{"role": "user", "content": "hi"}],
                            "temperature": 0.5, "top_p": 0.95, "max_tokens": 256}
    assert c.ledger.prompt_tokens == 3 and c.ledger.completion_tokens == 2


def test_api_key_from_env(monkeypatch):
    monkeypatch.setenv("MY_KEY", "sk-env")
    c = ChatClient(api_key_env="MY_KEY", transport=Recorder().transport())
    assert c.api_key == "sk-env"


def test_cache_hit_counts(tmp_path):
    rec = Recorder()
    c = client(rec, tmp_path)
    a = c.complete(req())
    b = c.complete(req())
    assert a == b
    assert len(rec.payloads) == 1
    assert c.ledger.total_requests == 1 and c.ledger.cache_hits == 1


def test_cache_persists_across_clients(tmp_path):
    rec = Recorder()
    first = client(rec, tmp_path).complete(req())
    again = client(rec, tmp_path)
    assert again.complete(req()) == first
    assert len(rec.payloads) == 1
    line = json.loads((tmp_path / "cache.jsonl").read_text().splitlines()[0])
    assert set(line) == {"key", "response", "usage"}
    assert "sk-test" not in (tmp_path / "cache.jsonl").read_text()


def test_no_cache_always_calls():
    rec = Recorder()
    c = client(rec, use_cache=False)
    c.complete(req())
    c.complete(req())
    assert len(rec.payloads) == 2 and c.ledger.cache_hits == 0


def test_429_then_success_honours_retry_after():
    sleeps = []
    rec = Recorder(failures=[httpx.Response(429, headers={"retry-after": "2"})])
    c = client(rec, sleep=sleeps.append)
    assert c.complete(req())
    assert sleeps == [2.0]
    assert c.network_calls == 2


def test_exponential_backoff_on_5xx():
    sleeps = []
    rec = Recorder(failures=[httpx.Response(500), httpx.Response(503)])
    c = client(rec, sleep=sleeps.append, backoff_base=1.0)
    c.complete(req())
    assert sleeps == [1.0, 2.0]


def test_transport_errors_retried():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        if calls["n"] < 3:
            raise httpx.ConnectError("down")
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    c = ChatClient(base_url="http://mock", transport=httpx.MockTransport(handler),
                   sleep=lambda s: None)
    assert c.complete(req()) == "ok"


def test_hard_failure_carries_request_id():
    failing = [httpx.Response(500, headers={"x-request-id": "abc"}) for _ in range(5)]
    c = client(Recorder(failures=failing))
    with pytest.raises(ProviderError) as info:
        c.complete(req())
    assert info.value.request_id == "abc" and info.value.status == 500
    assert c.network_calls == 5


def test_client_error_not_retried():
    c = client(Recorder(failures=[httpx.Response(400)]))
    with pytest.raises(ProviderError):
        c.complete(req())
    assert c.network_calls == 1


def test_malformed_body():
    c = ChatClient(base_url="http://mock",
                   transport=httpx.MockTransport(lambda r: httpx.Response(200, json={"x": 1})))
    with pytest.raises(ProviderError):
        c.complete(req())


def test_expected_requests():
    assert expected_requests(10, 10, 200) == 20100
    assert expected_requests(10, 10, 50) == 5100
    assert expected_requests(1, 1, 0) == 1


def test_budget_report_fresh():
    rep = budget_report(BudgetLedger())
    assert rep["total_requests"] == 0 and rep["total_tokens"] == 0 and rep["cache_hits"] == 0


def test_budget_ledger_roundtrip():
    lg = BudgetLedger()
    lg.record_request("operator", {"prompt_tokens": 5, "completion_tokens": 1})
    lg.record_hit()
    back = BudgetLedger.from_dict(json.loads(json.dumps(lg.to_dict())))
    assert back == lg


def test_response_cache_first_write_wins(tmp_path):
    cache = ResponseCache(tmp_path / "c.jsonl")
    cache.put("k", "one", {})
    cache.put("k", "two", {})
    assert ResponseCache(tmp_path / "c.jsonl").get("k")["response"] == "one"


def test_token_bucket_waits():
    now = [0.0]
    sleeps = []

    def sleep(s):
        sleeps.append(s)
        now[0] += s

    bucket = TokenBucket(60, burst=1, clock=lambda: now[0], sleep=sleep)
    bucket.acquire()
    bucket.acquire()
    assert sleeps == [pytest.approx(1.0)]


def test_concurrent_completions_counted_once_each():
    rec = Recorder()
    c = client(rec, use_cache=False)
    reqs = [req(f"q{i}") for i in range(40)]
    out = complete_many(c, reqs, max_workers=8)
    assert len(out) == 40
    assert c.network_calls == 40 and c.ledger.total_requests == 40


def test_real_http_roundtrip():
    with serve() as (url, received):
        c = ChatClient(base_url=url)
        text = c.complete(req("### Input:\ngreat film\n\n### Response:"))
        assert text in {"positive", "negative"}
        assert len(received) == 1
