"""HTTP providers for real model endpoints.

Two wire dialects cover the configured providers: OpenAI-style chat
completions and Anthropic-style messages. Both are deliberately thin; the
gateway owns retries, caps, and auditing.
"""

from __future__ import annotations

import base64

import httpx

from .errors import ProviderUnreachable
from .gateway import ImagePart, Part, RoleConfig, TextPart, api_key_for


def _encode_image(part: ImagePart) -> str:
    return base64.b64encode(part.data).decode("ascii")


class OpenAIStyleProvider:
    """POST {endpoint}/chat/completions with an OpenAI-shaped body."""

    def generate(self, system_text: str, parts: tuple[Part, ...], cfg: RoleConfig) -> str:
        content: list[dict] = []
        for part in parts:
            if isinstance(part, TextPart):
                content.append({"type": "text", "text": part.text})
            else:
                content.append({
                    "type": "image_url",
                    "image_url": {
                        "url": f"data:{part.media_type};base64,{_encode_image(part)}"
                    },
                })
        messages = []
        if system_text:
            messages.append({"role": "system", "content": system_text})
        messages.append({"role": "user", "content": content})
        body: dict = {"model": cfg.model, "messages": messages}
        if cfg.temperature is not None:
            body["temperature"] = cfg.temperature
        url = cfg.endpoint.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {api_key_for(cfg)}"}
        try:
            resp = httpx.post(url, json=body, headers=headers, timeout=cfg.timeout_s)
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"] or ""
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise ProviderUnreachable(f"openai-style call failed: {exc}") from exc


class AnthropicStyleProvider:
    """POST {endpoint}/v1/messages with an Anthropic-shaped body."""

    MAX_TOKENS = 8192

    def generate(self, system_text: str, parts: tuple[Part, ...], cfg: RoleConfig) -> str:
        content: list[dict] = []
        for part in parts:
            if isinstance(part, TextPart):
                content.append({"type": "text", "text": part.text})
            else:
                content.append({
                    "type": "image",
                    "source": {
                        "type": "base64",
                        "media_type": part.media_type,
                        "data": _encode_image(part),
                    },
                })
        body: dict = {
            "model": cfg.model,
            "max_tokens": self.MAX_TOKENS,
            "messages": [{"role": "user", "content": content}],
        }
        if system_text:
            body["system"] = system_text
        if cfg.temperature is not None:
            body["temperature"] = cfg.temperature
        url = cfg.endpoint.rstrip("/") + "/v1/messages"
        headers = {
            "x-api-key": api_key_for(cfg),
            "anthropic-version": "2023-06-01",
        }
        try:
            resp = httpx.post(url, json=body, headers=headers, timeout=cfg.timeout_s)
            resp.raise_for_status()
            data = resp.json()
            return "".join(
                block.get("text", "") for block in data.get("content", [])
                if block.get("type") == "text"
            )
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise ProviderUnreachable(f"anthropic-style call failed: {exc}") from exc
