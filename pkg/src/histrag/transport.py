"""Small JSON-over-HTTP client with bounded retries, shared by remote backends."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Any

import httpx

from .errors import BackendError, ConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 2
    backoff_s: float = 0.2
    timeout_s: float = 30.0


def post_json(
    url: str,
    payload: dict[str, Any],
    *,
    component: str,
    api_key: str | None = None,
    policy: RetryPolicy = RetryPolicy(),
    client: httpx.Client | None = None,
) -> dict[str, Any]:
    """POST ``payload`` and return the decoded JSON body.

    4xx responses raise :class:`ConfigError` immediately. Timeouts, connection
    failures and 5xx responses are retried ``policy.max_retries`` times and then
    surface as :class:`BackendError` tagged with ``component``.
    """
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    owns_client = client is None
    client = client or httpx.Client(timeout=policy.timeout_s)
    last: str = "no attempt made"
    try:
        for attempt in range(policy.max_retries + 1):
            if attempt:
                time.sleep(policy.backoff_s * (2 ** (attempt - 1)))
            try:
                resp = client.post(url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("%s request to %s failed (attempt %d): %s", component, url, attempt + 1, last)
                continue
            if 400 <= resp.status_code < 500:
                raise ConfigError(f"{component}: {url} rejected request with HTTP {resp.status_code}: {resp.text[:200]}")
            if resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("%s request to %s returned %s (attempt %d)", component, url, last, attempt + 1)
                continue
            try:
                return resp.json()
            except ValueError as exc:
                raise BackendError(component, f"non-JSON response from {url}") from exc
    finally:
        if owns_client:
            client.close()
    raise BackendError(component, f"{url} unavailable after {policy.max_retries + 1} attempts ({last})")
