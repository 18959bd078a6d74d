"""HTTP bindings for the external model services.

Endpoints and keys come from the environment (``GENERATION_ENDPOINT``,
``EMBEDDING_ENDPOINT``, ``RERANK_ENDPOINT`` and the matching ``*_API_KEY``),
never from config files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import httpx

from .errors import ConfigError, ServiceError


@dataclass
class JsonEndpoint:
    url: str
    api_key: str | None = None
    timeout: float = 60.0
    client: httpx.Client | None = None

    @classmethod
    def from_env(cls, prefix: str, timeout: float = 60.0) -> "JsonEndpoint":
        url = os.environ.get(f"{prefix}_ENDPOINT")
        if not url:
            raise ConfigError(f"{prefix}_ENDPOINT is not set")
        return cls(url=url, api_key=os.environ.get(f"{prefix}_API_KEY"), timeout=timeout)

    def post(self, payload: dict) -> dict:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        client = self.client or httpx.Client(timeout=self.timeout)
        try:
            resp = client.post(self.url, json=payload, headers=headers)
            resp.raise_for_status()
            body = resp.json()
        except httpx.TimeoutException as exc:
            raise TimeoutError(str(exc)) from exc
        except (httpx.HTTPError, ValueError) as exc:
            raise ServiceError(f"request to {self.url} failed: {exc}") from exc
        finally:
            if self.client is None:
                client.close()
        if not isinstance(body, dict):
            raise ServiceError(f"{self.url} returned a non-object response")
        return body
