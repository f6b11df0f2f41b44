"""Chat-completion client for multimodal planning requests.

Wire format: POST {base_url}/chat/completions with
    {"model": ..., "temperature": ..., "messages": [{"role": ...,
      "content": [{"type": "text", "text": ...} | {"type": "image", "base64": ...}]}]}
The response is read for its first text block and usage counts. The transport
keeps a log of every request sent, which rollout traces reconcile their call
counts against.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import requests

from ..errors import PlannerError, TrajectoryParseError
from ..grid import GridSpec
from .base import PlannerResponse, TokenUsage
from .parsing import parse_trajectory
from .prompts import PromptConfig, corrective_message

ENV_BASE_URL = "CRAFT_LLM_BASE_URL"
ENV_API_KEY = "CRAFT_LLM_API_KEY"
ENV_MODEL = "CRAFT_LLM_MODEL"


@dataclass(frozen=True)
class LlmEndpointConfig:
    """Where and how to reach the chat-completion endpoint, plus token prices."""

    base_url: str = "http://127.0.0.1:8080/v1"
    api_key: str | None = None
    model: str = "clay-planner"
    temperature: float = 0.2
    sampling_temperature: float = 1.0
    max_retries: int = 3
    timeout_s: float = 60.0
    price_in_per_mtok: float = 0.0
    price_out_per_mtok: float = 0.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.price_in_per_mtok < 0 or self.price_out_per_mtok < 0:
            raise ValueError("token prices must be >= 0")

    @classmethod
    def from_file(cls, path: str | Path) -> "LlmEndpointConfig":
        """Load from JSON; CRAFT_LLM_* environment variables override."""
        doc = json.loads(Path(path).read_text())
        cfg = cls(**doc)
        return cfg.with_env_overrides()

    def with_env_overrides(self) -> "LlmEndpointConfig":
        updates = {}
        if os.environ.get(ENV_BASE_URL):
            updates["base_url"] = os.environ[ENV_BASE_URL]
        if os.environ.get(ENV_API_KEY):
            updates["api_key"] = os.environ[ENV_API_KEY]
        if os.environ.get(ENV_MODEL):
            updates["model"] = os.environ[ENV_MODEL]
        return replace(self, **updates) if updates else self


def _wire_blocks(content: list[dict]) -> list[dict]:
    wire = []
    for block in content:
        if block["type"] == "text":
            wire.append({"type": "text", "text": block["text"]})
        elif block["type"] == "image":
            wire.append({"type": "image", "base64": block["base64"]})
        else:
            raise ValueError(f"unknown content block type {block['type']!r}")
    return wire


def _default_send(url: str, payload: dict, headers: dict, timeout: float) -> dict:
    response = requests.post(url, json=payload, headers=headers, timeout=timeout)
    if response.status_code >= 400:
        raise PlannerError(f"HTTP {response.status_code} from {url}: {response.text[:200]}")
    return response.json()


class LlmTransport:
    """Sends chat requests and logs every request payload it issues.

    `send` is injectable so tests can run against canned responses while the
    request log still records real traffic.
    """

    def __init__(
        self,
        endpoint: LlmEndpointConfig,
        send: Callable[[str, dict, dict, float], dict] | None = None,
    ) -> None:
        self.endpoint = endpoint
        self._send = send if send is not None else _default_send
        self.request_log: list[dict] = []

    @property
    def request_count(self) -> int:
        return len(self.request_log)

    def complete(self, messages: list[dict], temperature: float | None = None) -> tuple[str, TokenUsage]:
        """One chat completion over possibly multi-turn messages; retries
        transport failures up to max_retries."""
        payload = {
            "model": self.endpoint.model,
            "temperature": self.endpoint.temperature if temperature is None else temperature,
            "messages": [
                {"role": m["role"], "content": _wire_blocks(m["content"])} for m in messages
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self.endpoint.api_key:
            headers["Authorization"] = f"Bearer {self.endpoint.api_key}"
        url = self.endpoint.base_url.rstrip("/") + "/chat/completions"

        last_error: Exception | None = None
        for _ in range(self.endpoint.max_retries + 1):
            self.request_log.append(payload)
            try:
                doc = self._send(url, payload, headers, self.endpoint.timeout_s)
                return _extract_text(doc), _extract_usage(doc)
            except (requests.RequestException, PlannerError, KeyError, ValueError) as exc:
                last_error = exc
        raise PlannerError(f"transport failed after {self.endpoint.max_retries + 1} attempts: {last_error}")


def _extract_text(doc: dict) -> str:
    message = doc["choices"][0]["message"]
    content = message["content"]
    if isinstance(content, str):
        return content
    for block in content:
        if block.get("type") == "text":
            return block["text"]
    raise ValueError("no text block in response content")


def _extract_usage(doc: dict) -> TokenUsage:
    usage = doc.get("usage") or {}
    return TokenUsage(
        input_tokens=int(usage.get("prompt_tokens", usage.get("input_tokens", 0))),
        output_tokens=int(usage.get("completion_tokens", usage.get("output_tokens", 0))),
    )


def _user(content: list[dict]) -> dict:
    return {"role": "user", "content": content}


def _assistant(text: str) -> dict:
    return {"role": "assistant", "content": [{"type": "text", "text": text}]}


class LlmClient:
    """Parse-aware client: asks, and on unparseable replies re-asks with a
    corrective message quoting the grammar, up to max_retries extra turns."""

    def __init__(self, endpoint: LlmEndpointConfig, transport: LlmTransport | None = None) -> None:
        self.endpoint = endpoint
        self.transport = transport if transport is not None else LlmTransport(endpoint)

    def plan(
        self,
        prompt: list[dict],
        grid: GridSpec,
        prompt_cfg: PromptConfig,
        strengths,
        temperature: float | None = None,
    ) -> PlannerResponse:
        """Request a trajectory; retry with corrective feedback on parse failure."""
        messages = [_user(prompt)]
        usage_total = TokenUsage()
        last_problem = ""
        for _ in range(self.endpoint.max_retries + 1):
            text, usage = self.transport.complete(messages, temperature)
            usage_total = usage_total + usage
            try:
                trajectory = parse_trajectory(text, grid)
            except TrajectoryParseError as exc:
                last_problem = str(exc)
                messages.append(_assistant(text))
                correction = corrective_message(last_problem, prompt_cfg, strengths)
                messages.append(_user([{"type": "text", "text": correction}]))
                continue
            return PlannerResponse(
                raw_text=text,
                trajectory=trajectory,
                rationale=text,
                usage=usage_total,
            )
        raise PlannerError(
            f"response unparseable after {self.endpoint.max_retries + 1} attempts: {last_problem}"
        )

    def ask(
        self,
        prompt: list[dict],
        parse: Callable[[str], object],
        problem_label: str,
        prompt_cfg: PromptConfig,
        strengths,
        temperature: float | None = None,
    ) -> tuple[object, str, TokenUsage]:
        """Generic ask-parse-retry loop for verdicts and votes."""
        messages = [_user(prompt)]
        usage_total = TokenUsage()
        last_problem = ""
        for _ in range(self.endpoint.max_retries + 1):
            text, usage = self.transport.complete(messages, temperature)
            usage_total = usage_total + usage
            try:
                return parse(text), text, usage_total
            except TrajectoryParseError as exc:
                last_problem = str(exc)
                messages.append(_assistant(text))
                correction = f"Your previous reply could not be parsed: {last_problem}. {problem_label}"
                messages.append(_user([{"type": "text", "text": correction}]))
        raise PlannerError(
            f"response unparseable after {self.endpoint.max_retries + 1} attempts: {last_problem}"
        )


def llm_plan(
    endpoint: LlmEndpointConfig,
    prompt: list[dict],
    grid: GridSpec,
    prompt_cfg: PromptConfig,
    strengths,
    transport: LlmTransport | None = None,
    temperature: float | None = None,
) -> PlannerResponse:
    """One-shot planning call against a chat endpoint."""
    return LlmClient(endpoint, transport).plan(prompt, grid, prompt_cfg, strengths, temperature)
