"""Minimal chat-completion HTTP client with optional request/response tracing."""
from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path


class BackendUnavailable(Exception):
    """Remote endpoint failed; carries the HTTP status when there is one."""

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


ENDPOINT_ENV = "UCPILOT_LLM_ENDPOINT"
TOKEN_ENV = "UCPILOT_LLM_TOKEN"
MODEL_ENV = "UCPILOT_LLM_MODEL"


@dataclass
class ChatBackend:
    """POSTs chat-completion requests to a compatible endpoint.

    Endpoint, token and model come from an optional config file and are
    overridden by environment variables. Requests go out one at a time per
    instance; instances may be handed between threads.
    """

    endpoint: str
    model: str = "default"
    temperature: float = 0.0
    token: str | None = None
    timeout: float = 30.0
    trace_dir: Path | None = None
    _trace_seq: int = field(default=0, repr=False)

    @classmethod
    def from_config(cls, config_path: str | Path | None = None, **overrides) -> "ChatBackend":
        cfg = {}
        if config_path and Path(config_path).exists():
            cfg = json.loads(Path(config_path).read_text())
        endpoint = os.environ.get(ENDPOINT_ENV) or overrides.get("endpoint") or cfg.get("endpoint")
        if not endpoint:
            raise BackendUnavailable("no chat endpoint configured")
        return cls(
            endpoint=endpoint,
            model=os.environ.get(MODEL_ENV) or overrides.get("model") or cfg.get("model", "default"),
            temperature=float(overrides.get("temperature", cfg.get("temperature", 0.0))),
            token=os.environ.get(TOKEN_ENV) or overrides.get("token") or cfg.get("token"),
            timeout=float(overrides.get("timeout", cfg.get("timeout", 30.0))),
        )

    def complete(self, system: str, user: str) -> str:
        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }
        body = json.dumps(payload).encode()
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        req = urllib.request.Request(self.endpoint, data=body, headers=headers)
        self._trace("request", payload)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                reply = json.loads(resp.read().decode())
        except urllib.error.HTTPError as e:
            raise BackendUnavailable(f"endpoint returned HTTP {e.code}", status=e.code) from e
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError, OSError) as e:
            raise BackendUnavailable(f"endpoint unreachable: {e}") from e
        self._trace("response", reply)
        try:
            return reply["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise BackendUnavailable(f"malformed completion payload: {e}") from e

    def _trace(self, kind: str, payload: dict) -> None:
        if self.trace_dir is None:
            return
        self.trace_dir.mkdir(parents=True, exist_ok=True)
        path = self.trace_dir / f"llm-{self._trace_seq:04d}-{kind}.json"
        path.write_text(json.dumps(payload, indent=1, sort_keys=True))
        if kind == "response":
            self._trace_seq += 1


def extract_json_block(text: str):
    """Pull the first JSON object or array out of a completion reply."""
    text = text.strip()
    starts = [(text.find(o), o, c) for o, c in (("{", "}"), ("[", "]")) if text.find(o) >= 0]
    for start, opener, closer in sorted(starts):
        depth = 0
        for i in range(start, len(text)):
            if text[i] == opener:
                depth += 1
            elif text[i] == closer:
                depth -= 1
                if depth == 0:
                    try:
                        return json.loads(text[start:i + 1])
                    except json.JSONDecodeError:
                        break
    return None
