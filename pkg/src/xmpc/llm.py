"""Chat-completions gateway with a deterministic offline stub.

Two modes share one ``complete()`` entry point:

* ``stub`` (default): no network at all.  The stub recognizes the three
  request shapes the explainer produces (attribution narration, scenario
  judgment, question answering), parses the numbers back out of the prompt,
  and delegates to the same deterministic narration and rubric logic the
  explainer uses.  Everything stays reproducible and the full pipeline runs
  with networking disabled.
* ``online``: POSTs an OpenAI-style ``/chat/completions`` request with the
  configured model and temperature, bearer-authenticated with a key read
  from the environment.  Transient failures (connect errors, timeouts, 429,
  5xx) retry with exponential backoff; the API key is never logged or
  echoed into error messages.

Every exchange can be appended to a JSON-lines log as digests plus metadata,
never raw key material.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, GatewayError, GatewayTimeoutError

DEFAULT_MODEL = "gpt-3.5-turbo-0301"
QA_SYSTEM_PROMPT = (
    "You are assisting facility operators. Answer the question using only the "
    "explanation document provided in the request; cite its numbers."
)


@dataclass
class LlmConfig:
    mode: str = "stub"  # "stub" or "online"
    endpoint: str = ""
    model: str = DEFAULT_MODEL
    temperature: float = 0.5
    max_tokens: int = 512
    timeout_seconds: float = 30.0
    api_key_env: str = "LLM_API_KEY"
    max_retries: int = 3
    backoff_seconds: float = 0.5
    log_path: str | None = None

    def __post_init__(self):
        if self.mode not in ("stub", "online"):
            raise ConfigError(f"unknown gateway mode {self.mode!r}")


@dataclass
class ChatExchange:
    """One request/response pair, with enough metadata to audit it."""

    system_prompt: str
    user_prompt: str
    response: str
    model: str
    mode: str
    usage: dict = field(default_factory=dict)
    latency_seconds: float = 0.0


def build_request(cfg: LlmConfig, system_prompt: str, user_prompt: str) -> dict:
    """The wire-format request body (also used by tests, without sending)."""
    return {
        "model": cfg.model,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
        "messages": [
            {"role": "system", "content": system_prompt},
            {"role": "user", "content": user_prompt},
        ],
    }


def complete(cfg: LlmConfig, system_prompt: str, user_prompt: str) -> ChatExchange:
    """Run one chat completion in the configured mode."""
    started = time.perf_counter()
    if cfg.mode == "stub":
        response = _stub_response(user_prompt)
        exchange = ChatExchange(
            system_prompt=system_prompt,
            user_prompt=user_prompt,
            response=response,
            model=f"stub/{cfg.model}",
            mode="stub",
            usage={
                "prompt_chars": len(system_prompt) + len(user_prompt),
                "completion_chars": len(response),
            },
            latency_seconds=time.perf_counter() - started,
        )
    else:
        exchange = _complete_online(cfg, system_prompt, user_prompt, started)
    _log_exchange(cfg, exchange)
    return exchange


def answer_question(cfg: LlmConfig, context: str) -> ChatExchange:
    """Answer an operator question over a QA context from the explainer."""
    return complete(cfg, QA_SYSTEM_PROMPT, context)


# ---------------------------------------------------------------------------
# Online path
# ---------------------------------------------------------------------------


def _complete_online(
    cfg: LlmConfig, system_prompt: str, user_prompt: str, started: float
) -> ChatExchange:
    import requests

    if not cfg.endpoint:
        raise ConfigError("online mode requires a chat-completions endpoint URL")
    api_key = os.environ.get(cfg.api_key_env, "")
    if not api_key:
        raise ConfigError(
            f"online mode requires an API key in the {cfg.api_key_env} environment variable"
        )
    url = cfg.endpoint.rstrip("/") + "/chat/completions"
    body = build_request(cfg, system_prompt, user_prompt)
    headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}

    last_error: Exception | None = None
    timed_out = False
    for attempt in range(cfg.max_retries):
        if attempt:
            time.sleep(cfg.backoff_seconds * 2 ** (attempt - 1))
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=cfg.timeout_seconds)
        except requests.Timeout as exc:
            last_error, timed_out = exc, True
            continue
        except requests.ConnectionError as exc:
            last_error = exc
            continue
        if resp.status_code == 429 or resp.status_code >= 500:
            last_error = GatewayError(f"service returned status {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise GatewayError(f"service returned status {resp.status_code}")
        try:
            data = resp.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed chat-completions response ({exc})") from None
        return ChatExchange(
            system_prompt=system_prompt,
            user_prompt=user_prompt,
            response=content,
            model=data.get("model", cfg.model),
            mode="online",
            usage=data.get("usage", {}),
            latency_seconds=time.perf_counter() - started,
        )
    if timed_out:
        raise GatewayTimeoutError(
            f"no response after {cfg.max_retries} attempts (last error: timeout)"
        )
    raise GatewayError(f"no response after {cfg.max_retries} attempts (last error: {last_error})")


# ---------------------------------------------------------------------------
# Offline stub
# ---------------------------------------------------------------------------


def _stub_response(user_prompt: str) -> str:
    if "Shapley values:" in user_prompt and "descriptive paragraph" in user_prompt:
        return _stub_narration(user_prompt)
    if "judge what kind of scenario" in user_prompt:
        return _stub_scenario_judgment(user_prompt)
    if "Question:" in user_prompt:
        return _stub_answer(user_prompt)
    head = hashlib.sha256(user_prompt.encode()).hexdigest()[:12]
    return f"Stub response {head}: no specialized handler matched this request."


def _stub_narration(prompt: str) -> str:
    """Rebuild the attribution from the prompt and run the deterministic narrator."""
    from .explain import narrate_attribution
    from .shapley import Attribution

    shap_match = re.search(r"Shapley values: (.+?)\n\n", prompt, re.S)
    value_match = re.search(r"Variable values: (.+?)\n\n", prompt, re.S)
    target_match = re.search(r"impactful to (.+?)\.\n", prompt, re.S)
    dict_match = re.search(r"listed as follows: \{(.*)\}\s*$", prompt, re.S)
    if not (shap_match and value_match):
        return "Stub narration: could not locate Shapley and variable values in the request."

    phis: dict[str, float] = {}
    base = 0.0
    for item in shap_match.group(1).split("; "):
        name, _, number = item.rpartition(" ")
        if name == "expected_value":
            base = float(number)
        elif name:
            phis[name] = float(number)
    values: dict[str, float] = {}
    for item in value_match.group(1).split("; "):
        name, _, number = item.rpartition(" ")
        if name:
            values[name] = float(number)
    dictionary = {}
    if dict_match:
        for item in dict_match.group(1).split(", "):
            key, _, desc = item.partition(": ")
            if key:
                dictionary[key] = desc

    names = tuple(phis)
    attribution = Attribution(
        feature_names=names,
        feature_values=np.array([values.get(n, 0.0) for n in names]),
        shapley_values=np.array([phis[n] for n in names]),
        base_value=base,
        prediction=base + sum(phis.values()),
        background_size=0,
        method="exact",
    )
    target = target_match.group(1) if target_match else None
    return narrate_attribution(attribution, dictionary=dictionary or None, target_desc=target)


def _stub_scenario_judgment(prompt: str) -> str:
    # The rules section also spells out "T_spt(t+1) = <ceiling>°C", so the
    # interval's own numbers must be read from the part after the instruction.
    head, _, tail = prompt.partition("judge what kind of scenario")
    tail = tail or prompt
    p2 = _first_float(r"P_limit\(t\+2\) = ([\d.]+)W", tail)
    u1 = _first_float(r"T_spt\(t\+1\) = ([\d.]+)°C", tail)
    threshold = _first_float(r"is below ([\d.]+)W", head or prompt) or 5000.0
    ceiling = _first_float(r"T_spt\(t\+1\) < ([\d.]+)°C", head or prompt) or 26.0
    if p2 is None or u1 is None:
        return "Stub judgment: the scenario inputs could not be parsed from the request."
    if p2 < threshold and u1 < ceiling:
        n, why = 1, "the upcoming power limit is tightened and the building is pre-cooled"
    elif p2 < threshold:
        n, why = 3, "the upcoming power limit is tightened but the setpoint stays at the ceiling"
    else:
        n, why = 2, "no demand response event is expected in the hour after the next"
    return f"Scenario {n}: {why}."


def _stub_answer(prompt: str) -> str:
    from .explain import SCENARIO_NAMES, parse_scenario

    scenario = parse_scenario(prompt)
    p2 = _first_float(r"P_limit\(t\+2\) = ([\d.]+)W", prompt)
    u1 = _first_float(r"T_spt\(t\+1\) = ([\d.]+)°C", prompt)
    u2 = _first_float(r"T_spt\(t\+2\) = ([\d.]+)°C", prompt)
    y2 = _first_float(r"P\(t\+2\) = ([\d.]+)W", prompt)
    parts = []
    if scenario:
        parts.append(f"This interval is Scenario {scenario} ({SCENARIO_NAMES[scenario]}).")
    if u1 is not None and u2 is not None:
        parts.append(f"The controller set T_spt(t+1) = {u1}°C and T_spt(t+2) = {u2}°C.")
    if p2 is not None:
        parts.append(f"The power limit for the hour after the next is P_limit(t+2) = {p2}W.")
        if y2 is not None:
            relation = "stays under" if y2 <= p2 else "exceeds"
            parts.append(
                f"The predicted cooling power P(t+2) = {y2}W {relation} that limit; any power "
                "above the limit would incur a quadratic penalty in the controller's cost, "
                "which is the penalty risk the setpoints are chosen to manage."
            )
        else:
            parts.append(
                "Cooling power above that limit would incur a quadratic penalty in the "
                "controller's cost, which is the penalty risk the setpoints are chosen to manage."
            )
    if not parts:
        parts.append("The question context carries no recognizable control record.")
    return " ".join(parts)


def _first_float(pattern: str, text: str) -> float | None:
    match = re.search(pattern, text)
    return float(match.group(1)) if match else None


# ---------------------------------------------------------------------------
# Exchange log
# ---------------------------------------------------------------------------


def _log_exchange(cfg: LlmConfig, exchange: ChatExchange) -> None:
    if not cfg.log_path:
        return
    entry = {
        "model": exchange.model,
        "mode": exchange.mode,
        "temperature": cfg.temperature,
        "system_digest": hashlib.sha256(exchange.system_prompt.encode()).hexdigest(),
        "user_digest": hashlib.sha256(exchange.user_prompt.encode()).hexdigest(),
        "response_digest": hashlib.sha256(exchange.response.encode()).hexdigest(),
        "latency_seconds": exchange.latency_seconds,
        "usage": exchange.usage,
    }
    with Path(cfg.log_path).open("a") as fh:
        fh.write(json.dumps(entry) + "\n")
