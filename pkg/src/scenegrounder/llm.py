"""LLM endpoint implementations: HTTP chat API, rule-based mock, replay.

All endpoints expose ``complete(system_prompt, user_prompt, max_tokens) ->
text``. The mock and replay endpoints are deterministic, which keeps the
whole grounding pipeline testable offline.
"""

from __future__ import annotations

import json
import os
import re
import time
from pathlib import Path
from typing import Protocol

from .errors import ConfigError, EndpointError


class LlmEndpoint(Protocol):
    def complete(self, system_prompt: str, user_prompt: str, max_tokens: int = 256) -> str: ...


# ---------------------------------------------------------------------------
# deterministic rule-based mock

_STOPWORDS = {"the", "a", "an", "of", "to", "that", "is", "in", "on", "at", "and", "with"}

# (marker phrase, canonical relation); scanned in order, longest first
_RELATION_MARKERS = [
    ("to the left of", "left"),
    ("to the right of", "right"),
    ("in front of", "front"),
    ("left of", "left"),
    ("right of", "right"),
    ("closest to", "closest"),
    ("nearest to", "closest"),
    ("farthest from", "farthest"),
    ("next to", "closest"),
    ("close to", "closest"),
    ("behind", "behind"),
    ("above", "above"),
    ("below", "below"),
    ("near", "closest"),
]

_SENTENCE_RE = re.compile(
    r"^The .+ with id \d+ is (\w+), (\w+), (\w+) "
    r"and at distance ([0-9.]+) m from the .+ with id (\d+)$"
)


def _tokens(text: str) -> set[str]:
    return {w for w in re.findall(r"[a-z0-9]+", text.lower()) if w not in _STOPWORDS}


def split_query(query: str) -> tuple[str, str | None, str]:
    """Split a query at the first relation marker: (target part, relation, anchor part)."""
    low = query.lower()
    for marker, rel in _RELATION_MARKERS:
        pos = low.find(marker)
        if pos >= 0:
            return query[:pos], rel, query[pos + len(marker) :]
    return query, None, ""


def _best_overlap_ids(objects: list[dict], tokens: set[str]) -> list[int]:
    """Ids of objects whose captions share the most tokens with the phrase."""
    scores = [(len(_tokens(o["caption"]) & tokens), int(o["id"])) for o in objects]
    best = max((s for s, _ in scores), default=0)
    if best == 0:
        return []
    return [oid for s, oid in scores if s == best]


class MockEndpoint:
    """Keyword-matching stand-in for a chat LLM.

    Stage one picks targets/anchors by caption-token overlap with the query
    split at its relation phrase. Stage two matches the queried relation
    word against the rendered relation sentences (or distance for
    closest/farthest queries) and falls back to caption overlap when no
    relation information is available.
    """

    def complete(self, system_prompt: str, user_prompt: str, max_tokens: int = 256) -> str:
        if "fix malformed" in system_prompt.lower():
            return "{}"
        if '"target_ids"' in system_prompt:
            return self._stage_one(user_prompt)
        if '"final_object_id"' in system_prompt:
            return self._stage_two(user_prompt)
        raise EndpointError("mock endpoint: unrecognized prompt kind")

    @staticmethod
    def _parse_user_prompt(user_prompt: str) -> tuple[list[dict], str]:
        try:
            objects_text = user_prompt.split("Objects:\n", 1)[1].rsplit("\n\nQuery: ", 1)[0]
            query = user_prompt.rsplit("\n\nQuery: ", 1)[1].rsplit("\nReturn JSON now.", 1)[0]
            return json.loads(objects_text), query
        except (IndexError, json.JSONDecodeError) as err:
            raise EndpointError(f"mock endpoint: cannot parse prompt: {err}")

    def _stage_one(self, user_prompt: str) -> str:
        objects, query = self._parse_user_prompt(user_prompt)
        target_part, _, anchor_part = split_query(query)
        target_ids = _best_overlap_ids(objects, _tokens(target_part))
        anchor_ids = _best_overlap_ids(objects, _tokens(anchor_part)) if anchor_part.strip() else []
        return json.dumps({"target_ids": target_ids, "anchor_ids": anchor_ids})

    def _stage_two(self, user_prompt: str) -> str:
        objects, query = self._parse_user_prompt(user_prompt)
        target_part, rel, anchor_part = split_query(query)
        targets = [o for o in objects if "relations" in o]
        anchors = [o for o in objects if "relations" not in o]

        anchor_id = None
        if anchors and anchor_part.strip():
            ids = _best_overlap_ids(anchors, _tokens(anchor_part))
            anchor_id = min(ids) if ids else None

        chosen = None
        if rel is not None and anchor_id is not None:
            scored: list[tuple[float, int]] = []
            for entry in targets:
                if int(entry["id"]) == anchor_id:
                    continue
                for sentence in entry.get("relations", []):
                    m = _SENTENCE_RE.search(sentence)
                    if not m or int(m.group(5)) != anchor_id:
                        continue
                    triple, dist = m.group(1, 2, 3), float(m.group(4))
                    if rel in ("closest", "farthest"):
                        scored.append((dist, int(entry["id"])))
                    elif rel in triple:
                        scored.append((0.0, int(entry["id"])))
            if scored:
                if rel == "farthest":
                    target_dist = max(d for d, _ in scored)
                else:
                    target_dist = min(d for d, _ in scored)
                chosen = min(oid for d, oid in scored if d == target_dist)

        if chosen is None:
            # no usable relation information: fall back to caption matching
            ids = _best_overlap_ids(targets, _tokens(target_part))
            if not ids and targets:
                ids = [int(t["id"]) for t in targets]
            if not ids and objects:
                ids = [int(o["id"]) for o in objects]
            if not ids:
                return json.dumps({"final_object_id": -1})
            chosen = min(ids)
        return json.dumps({"final_object_id": int(chosen)})


# ---------------------------------------------------------------------------
# transcript replay

class ReplayEndpoint:
    """Plays back recorded responses in order; deterministic by construction."""

    def __init__(self, responses: list[str]):
        self._responses = list(responses)
        self._cursor = 0

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "ReplayEndpoint":
        responses = []
        for line in Path(path).read_text().splitlines():
            if line.strip():
                responses.append(json.loads(line)["response"])
        return cls(responses)

    def complete(self, system_prompt: str, user_prompt: str, max_tokens: int = 256) -> str:
        if self._cursor >= len(self._responses):
            raise EndpointError("replay endpoint exhausted")
        response = self._responses[self._cursor]
        self._cursor += 1
        return response


# ---------------------------------------------------------------------------
# HTTP chat-completion client

ENV_BASE_URL = "SCENEGROUNDER_LLM_BASE_URL"
ENV_MODEL = "SCENEGROUNDER_LLM_MODEL"
ENV_API_KEY = "SCENEGROUNDER_LLM_API_KEY"

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class HttpEndpoint:
    """Chat-completion client with temperature 0 and bounded retries.

    Configuration comes from arguments or the SCENEGROUNDER_LLM_* env vars;
    transient failures (connection errors, timeouts, 429/5xx) are retried up
    to ``max_retries`` times with exponential backoff.
    """

    def __init__(
        self,
        base_url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff_s: float = 0.5,
    ):
        self.base_url = base_url or os.environ.get(ENV_BASE_URL)
        self.model = model or os.environ.get(ENV_MODEL)
        self.api_key = api_key or os.environ.get(ENV_API_KEY)
        if not self.base_url or not self.model:
            raise ConfigError(
                f"HTTP endpoint needs a base URL and model ({ENV_BASE_URL}, {ENV_MODEL})"
            )
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_s = backoff_s

    def complete(self, system_prompt: str, user_prompt: str, max_tokens: int = 256) -> str:
        import requests

        url = self.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
            "temperature": 0,
            "max_tokens": max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt > 0:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                resp = requests.post(url, json=payload, headers=headers, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as err:
                last_error = err
                continue
            if resp.status_code in _RETRYABLE_STATUS:
                last_error = EndpointError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                continue
            if resp.status_code != 200:
                raise EndpointError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as err:
                raise EndpointError(f"malformed chat-completion response: {err}")
        raise EndpointError(f"endpoint failed after {self.max_retries + 1} attempts: {last_error}")
