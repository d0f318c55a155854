"""HTTP client for OpenAI-compatible chat completions with JSON-schema output.

Retries transport errors and 429/5xx responses with exponential backoff
(base 1 s, factor 2). A custom transport can be injected for tests, and a
:class:`~maneuverforge.fixtures.FixtureWriter` records successful calls.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import httpx
import jsonschema

from .errors import (AuthMissing, BackendUnavailable, RateLimited,
                     SchemaViolation, Timeout)
from .fixtures import FixtureWriter

DEFAULT_API_KEY_ENV = "MANEUVERGPT_API_KEY"
BACKOFF_BASE_S = 1.0
BACKOFF_FACTOR = 2.0


@dataclass(frozen=True)
class LlmConfig:
    endpoint_url: str
    model_name: str
    api_key_env_var: str = DEFAULT_API_KEY_ENV
    timeout: float = 30.0
    max_retries: int = 2
    temperature: float = 0.2

    def __post_init__(self):
        if not self.timeout > 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def _request_body(config: LlmConfig, messages: list[dict],
                  schema: dict) -> dict:
    return {
        "model": config.model_name,
        "messages": messages,
        "temperature": config.temperature,
        "response_format": {
            "type": "json_schema",
            "json_schema": {
                "name": "structured_output",
                "strict": True,
                "schema": schema,
            },
        },
    }


def _parse_response(payload: dict, schema: dict) -> dict:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise SchemaViolation("response has no choices[0].message.content")
    try:
        doc = json.loads(content)
    except (json.JSONDecodeError, TypeError) as exc:
        raise SchemaViolation(f"response content is not JSON: {exc}") from None
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        raise SchemaViolation(f"response violates schema: {exc.message}") from None
    return doc


def complete_structured(config: LlmConfig, messages: list[dict], schema: dict,
                        *, transport: httpx.BaseTransport | None = None,
                        sleep=time.sleep,
                        recorder: FixtureWriter | None = None) -> dict:
    """POST one schema-constrained completion and return the parsed document.

    Transport errors, 429 and 5xx responses, and schema violations are all
    retried up to ``max_retries`` times; the final failure class is raised.
    Total blocking time is bounded by timeout*(retries+1) plus backoff.
    """
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env_var)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    body = _request_body(config, messages, schema)
    attempts = config.max_retries + 1
    last_error: Exception | None = None

    with httpx.Client(timeout=config.timeout, transport=transport) as client:
        for attempt in range(attempts):
            if attempt > 0:
                sleep(BACKOFF_BASE_S * BACKOFF_FACTOR ** (attempt - 1))
            try:
                response = client.post(config.endpoint_url, json=body,
                                       headers=headers)
            except httpx.TimeoutException as exc:
                last_error = Timeout(f"request timed out: {exc}")
                continue
            except httpx.TransportError as exc:
                last_error = BackendUnavailable(f"transport error: {exc}")
                continue

            if response.status_code in (401, 403):
                raise AuthMissing(
                    f"endpoint rejected credentials from "
                    f"${config.api_key_env_var} (HTTP {response.status_code})")
            if response.status_code == 429:
                last_error = RateLimited("rate limited (HTTP 429)")
                continue
            if response.status_code >= 500:
                last_error = BackendUnavailable(
                    f"server error (HTTP {response.status_code})")
                continue
            if response.status_code != 200:
                raise BackendUnavailable(
                    f"unexpected HTTP {response.status_code}: "
                    f"{response.text[:200]}")

            try:
                payload = response.json()
            except json.JSONDecodeError:
                last_error = SchemaViolation("response body is not JSON")
                continue
            try:
                doc = _parse_response(payload, schema)
            except SchemaViolation as exc:
                last_error = exc
                continue

            if recorder is not None:
                recorder.append(messages, schema, doc)
            return doc

    assert last_error is not None
    raise last_error
