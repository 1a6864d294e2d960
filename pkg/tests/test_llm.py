"""Chat gateway: request shape, stub behavior, online retries, key hygiene."""

from __future__ import annotations

import json
import time

import numpy as np
import pytest
import requests

from xmpc.errors import ConfigError, GatewayError, GatewayTimeoutError
from xmpc.explain import (
    build_qa_context,
    build_scenario_prompt,
    build_shap_prompt,
    classify,
    narrate_attribution,
    parse_scenario,
)
from xmpc.llm import (
    DEFAULT_MODEL,
    ChatExchange,
    LlmConfig,
    answer_question,
    build_request,
    complete,
)
from xmpc.shapley import Attribution

SYSTEM = "test system prompt"


def worked_attribution() -> Attribution:
    # Values round-trip exactly through the prompt's 6-decimal formatting.
    phis = np.array([680.369781, 33.052102, 18.838554, -113.826475, -98.523013])
    base = 1544.673602
    return Attribution(
        feature_names=("oa_temp", "oa_radiation", "zone_temp", "zone_clg_tstat", "zone_occ"),
        feature_values=np.array([32.7, 513.0, 23.5, 25.0, 3.0]),
        shapley_values=phis,
        base_value=base,
        prediction=base + float(np.sum(phis)),
        background_size=0,
        method="exact",
    )


class FakeResponse:
    def __init__(self, status_code=200, payload=None, bad_json=False):
        self.status_code = status_code
        self._payload = payload
        self._bad = bad_json

    def json(self):
        if self._bad:
            raise ValueError("not json")
        return self._payload


def ok_payload(content="hello from the service"):
    return {
        "choices": [{"message": {"content": content}}],
        "model": "remote-model",
        "usage": {"total_tokens": 42},
    }


@pytest.fixture()
def online_cfg(monkeypatch):
    monkeypatch.setenv("LLM_API_KEY", "sk-test-secret-123")
    return LlmConfig(
        mode="online",
        endpoint="https://gateway.example/v1",
        backoff_seconds=0.01,
    )


class TestConfigAndRequest:
    def test_request_shape(self):
        cfg = LlmConfig(temperature=0.7, max_tokens=64)
        body = build_request(cfg, "sys", "user")
        assert body["model"] == DEFAULT_MODEL
        assert body["temperature"] == 0.7
        assert body["max_tokens"] == 64
        assert body["messages"] == [
            {"role": "system", "content": "sys"},
            {"role": "user", "content": "user"},
        ]

    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigError):
            LlmConfig(mode="telepathy")


class TestStub:
    def test_runs_fully_offline(self, no_network):
        exchange = complete(LlmConfig(), SYSTEM, "hello")
        assert exchange.mode == "stub"
        assert exchange.model == f"stub/{DEFAULT_MODEL}"
        assert exchange.response.startswith("Stub response ")

    def test_narration_matches_deterministic_narrator(self, no_network):
        attr = worked_attribution()
        dictionary = {
            "oa_temp": "outdoor air dry-bulb temperature",
            "zone_clg_tstat": "zone temperature setpoint",
            "zone_occ": "occupancy",
        }
        prompt = build_shap_prompt(attr, dictionary, "the cooling power P(t+1)")
        exchange = complete(LlmConfig(), SYSTEM, prompt)
        expected = narrate_attribution(attr, dictionary, "the cooling power P(t+1)")
        assert exchange.response == expected

    def test_scenario_judgment_agrees_with_rubric(self, no_network, mini_episode):
        cfg = LlmConfig()
        for record in mini_episode.records[::5]:
            prompt = build_scenario_prompt(record)
            exchange = complete(cfg, SYSTEM, prompt)
            assert parse_scenario(exchange.response) == classify(record), f"t={record.t}"

    def test_answer_mentions_limit_and_penalty(self, no_network, mini_episode):
        context = build_qa_context(mini_episode, 13, "What is the penalty risk?")
        exchange = answer_question(LlmConfig(), context)
        record = mini_episode.records[13]
        assert f"P_limit(t+2) = {record.p_limit_t2_w:.1f}W" in exchange.response
        assert "quadratic penalty" in exchange.response

    def test_usage_and_latency_recorded(self, no_network):
        exchange = complete(LlmConfig(), SYSTEM, "ping")
        assert exchange.usage["prompt_chars"] == len(SYSTEM) + len("ping")
        assert exchange.latency_seconds >= 0.0


class TestOnline:
    def test_success_first_try(self, online_cfg, monkeypatch):
        calls = []

        def fake_post(url, json=None, headers=None, timeout=None):
            calls.append((url, json, headers, timeout))
            return FakeResponse(payload=ok_payload())

        monkeypatch.setattr(requests, "post", fake_post)
        exchange = complete(online_cfg, SYSTEM, "user text")
        assert exchange.response == "hello from the service"
        assert exchange.mode == "online"
        assert exchange.model == "remote-model"
        assert exchange.usage == {"total_tokens": 42}
        url, body, headers, timeout = calls[0]
        assert url == "https://gateway.example/v1/chat/completions"
        assert headers["Authorization"] == "Bearer sk-test-secret-123"
        assert body["messages"][1]["content"] == "user text"
        assert timeout == online_cfg.timeout_seconds

    def test_retries_then_succeeds_with_backoff(self, online_cfg, monkeypatch):
        attempts = []
        sleeps = []

        def fake_post(url, **kwargs):
            attempts.append(1)
            if len(attempts) < 3:
                raise requests.ConnectionError("refused")
            return FakeResponse(payload=ok_payload("third time lucky"))

        monkeypatch.setattr(requests, "post", fake_post)
        monkeypatch.setattr(time, "sleep", lambda s: sleeps.append(s))
        exchange = complete(online_cfg, SYSTEM, "user")
        assert exchange.response == "third time lucky"
        assert len(attempts) == 3
        assert sleeps == [0.01, 0.02]  # exponential backoff

    def test_timeout_budget_exhausted(self, online_cfg, monkeypatch):
        def fake_post(url, **kwargs):
            raise requests.Timeout("too slow")

        monkeypatch.setattr(requests, "post", fake_post)
        monkeypatch.setattr(time, "sleep", lambda s: None)
        with pytest.raises(GatewayTimeoutError):
            complete(online_cfg, SYSTEM, "user")

    def test_server_errors_retried_then_raised(self, online_cfg, monkeypatch):
        attempts = []

        def fake_post(url, **kwargs):
            attempts.append(1)
            return FakeResponse(status_code=503)

        monkeypatch.setattr(requests, "post", fake_post)
        monkeypatch.setattr(time, "sleep", lambda s: None)
        with pytest.raises(GatewayError, match="503"):
            complete(online_cfg, SYSTEM, "user")
        assert len(attempts) == online_cfg.max_retries

    def test_client_error_not_retried(self, online_cfg, monkeypatch):
        attempts = []

        def fake_post(url, **kwargs):
            attempts.append(1)
            return FakeResponse(status_code=400)

        monkeypatch.setattr(requests, "post", fake_post)
        with pytest.raises(GatewayError, match="400"):
            complete(online_cfg, SYSTEM, "user")
        assert len(attempts) == 1

    def test_malformed_response(self, online_cfg, monkeypatch):
        monkeypatch.setattr(
            requests, "post", lambda url, **kwargs: FakeResponse(payload={"nope": True})
        )
        with pytest.raises(GatewayError, match="malformed"):
            complete(online_cfg, SYSTEM, "user")

        monkeypatch.setattr(requests, "post", lambda url, **kwargs: FakeResponse(bad_json=True))
        with pytest.raises(GatewayError, match="malformed"):
            complete(online_cfg, SYSTEM, "user")

    def test_missing_endpoint_or_key(self, monkeypatch):
        monkeypatch.setenv("LLM_API_KEY", "sk-x")
        with pytest.raises(ConfigError, match="endpoint"):
            complete(LlmConfig(mode="online"), SYSTEM, "user")

        monkeypatch.delenv("LLM_API_KEY", raising=False)
        cfg = LlmConfig(mode="online", endpoint="https://gateway.example")
        with pytest.raises(ConfigError, match="LLM_API_KEY") as info:
            complete(cfg, SYSTEM, "user")
        assert "sk-" not in str(info.value)


class TestExchangeLog:
    def test_log_carries_digests_never_key(self, online_cfg, monkeypatch, tmp_path):
        online_cfg.log_path = str(tmp_path / "exchanges.jsonl")
        monkeypatch.setattr(requests, "post", lambda url, **kwargs: FakeResponse(payload=ok_payload()))
        complete(online_cfg, SYSTEM, "user prompt with sk-test-secret-123 accidentally pasted")

        raw = (tmp_path / "exchanges.jsonl").read_text()
        assert "sk-test-secret-123" not in raw
        entry = json.loads(raw.splitlines()[0])
        assert entry["mode"] == "online"
        assert len(entry["system_digest"]) == 64
        assert len(entry["user_digest"]) == 64
        assert len(entry["response_digest"]) == 64
        assert "user prompt" not in raw  # prompts stored as digests only

    def test_stub_exchanges_logged_too(self, no_network, tmp_path):
        cfg = LlmConfig(log_path=str(tmp_path / "log.jsonl"))
        complete(cfg, SYSTEM, "first")
        complete(cfg, SYSTEM, "second")
        lines = (tmp_path / "log.jsonl").read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["mode"] == "stub"

    def test_no_log_by_default(self, no_network, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        complete(LlmConfig(), SYSTEM, "no log expected")
        assert list(tmp_path.iterdir()) == []


class TestChatExchangeShape:
    def test_fields(self):
        exchange = ChatExchange(
            system_prompt="s", user_prompt="u", response="r", model="m", mode="stub"
        )
        assert exchange.usage == {}
        assert exchange.latency_seconds == 0.0
