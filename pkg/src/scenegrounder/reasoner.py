"""Two-stage deductive grounding over the scene graph.

Stage one shows the LLM only ids and captions and asks for target/anchor
candidates; edges are then built for target-anchor pairs alone, and stage two
grounds the query over that compact description. Malformed JSON responses get
one local salvage pass and at most one repair call each, so a query never
spends more than four LLM calls.
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyTargetsError, ParseFailureError, UnknownIdError
from .graph import SceneNode, edge_between, relation_sentence, room_center
from .llm import LlmEndpoint

log = logging.getLogger(__name__)

PROMPT_COORD_DECIMALS = 2


@dataclass
class PromptTemplates:
    """Versioned prompt set; user templates are .format() strings."""

    version: int = 1
    stage_one_system: str = (
        "You are a scene reasoning assistant. The scene is a JSON list of objects, "
        'each with "id" and "caption". Given the user query, select target objects '
        "(objects the query could refer to) and anchor objects (reference objects the "
        "query relates the targets to). Respond with strict JSON "
        '{"target_ids": [...], "anchor_ids": [...]} and nothing else.'
    )
    stage_one_user: str = "Objects:\n{objects}\n\nQuery: {query}\nReturn JSON now."
    stage_two_system: str = (
        "You are a scene reasoning assistant. The scene is a JSON list of the objects "
        'relevant to the query, each with "id", "caption", "bbox_center" and "bbox_extent"; '
        'target objects additionally carry "relations" sentences describing their spatial '
        "relations to anchor objects. Select the single object that best answers the user "
        'query. Respond with strict JSON {"final_object_id": <id>} and nothing else.'
    )
    stage_two_user: str = "Objects:\n{objects}\n\nQuery: {query}\nReturn JSON now."
    repair_system: str = (
        "You fix malformed model output. Respond with the corrected strict JSON object "
        "only, no commentary."
    )
    repair_user: str = (
        "The following text should have been a JSON object matching the schema "
        "{schema}. Rewrite it as strict JSON.\n\nText:\n{raw}"
    )


DEFAULT_PROMPTS = PromptTemplates()

STAGE_ONE_SCHEMA = '{"target_ids": [<int>, ...], "anchor_ids": [<int>, ...]}'
STAGE_TWO_SCHEMA = '{"final_object_id": <int>}'


@dataclass
class StageOneResult:
    target_ids: list[int]
    anchor_ids: list[int]


@dataclass
class RelatedObjectEntry:
    """Compact stage-two description of one object.

    ``relations`` is a sentence list for targets and None for anchors
    (anchors carry no relations field in the prompt).
    """

    id: int
    caption: str
    center: np.ndarray
    extent: np.ndarray
    relations: list[str] | None = None

    def to_prompt_obj(self) -> dict:
        obj = {
            "id": int(self.id),
            "caption": self.caption,
            "bbox_center": [round(float(x), PROMPT_COORD_DECIMALS) for x in self.center],
            "bbox_extent": [round(float(x), PROMPT_COORD_DECIMALS) for x in self.extent],
        }
        if self.relations is not None:
            obj["relations"] = list(self.relations)
        return obj


@dataclass
class TranscriptEntry:
    query: str
    stage: str
    prompt: str
    response: str
    latency_ms: float

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "stage": self.stage,
            "prompt": self.prompt,
            "response": self.response,
            "latency_ms": self.latency_ms,
        }


@dataclass
class GroundingAnswer:
    final_object_id: int
    bbox_center: np.ndarray
    bbox_extent: np.ndarray
    transcript: list[TranscriptEntry]
    stage_one: StageOneResult
    related: list[RelatedObjectEntry]
    out_of_candidates: bool = False

    def to_dict(self) -> dict:
        return {
            "final_object_id": int(self.final_object_id),
            "bbox_center": [float(x) for x in self.bbox_center],
            "bbox_extent": [float(x) for x in self.bbox_extent],
            "out_of_candidates": self.out_of_candidates,
        }


def save_transcript(path: str | Path, entries: list[TranscriptEntry]):
    with Path(path).open("w") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_dict()) + "\n")


def _call(
    llm: LlmEndpoint,
    system: str,
    user: str,
    stage: str,
    query: str,
    transcript: list[TranscriptEntry],
    max_tokens: int,
) -> str:
    start = time.perf_counter()
    response = llm.complete(system, user, max_tokens)
    transcript.append(
        TranscriptEntry(
            query=query,
            stage=stage,
            prompt=user,
            response=response,
            latency_ms=(time.perf_counter() - start) * 1000.0,
        )
    )
    return response


def _strict_parse(text: str) -> dict | None:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        return None
    return obj if isinstance(obj, dict) else None


_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_-]+)?\s*(.*?)```", re.DOTALL)


def local_salvage(text: str) -> dict | None:
    """Cheap non-LLM fixes: strip code fences, then take the outermost braces."""
    candidates = []
    fence = _FENCE_RE.search(text)
    if fence:
        candidates.append(fence.group(1))
    start, end = text.find("{"), text.rfind("}")
    if 0 <= start < end:
        candidates.append(text[start : end + 1])
    for candidate in candidates:
        parsed = _strict_parse(candidate.strip())
        if parsed is not None:
            return parsed
    return None


def repair_json(
    raw_text: str,
    llm: LlmEndpoint,
    schema: str = "{}",
    prompts: PromptTemplates = DEFAULT_PROMPTS,
    stage: str = "repair",
    query: str = "",
    transcript: list[TranscriptEntry] | None = None,
    max_tokens: int = 256,
) -> dict:
    """Parse ``raw_text`` as a JSON object, repairing at most once via the LLM.

    Valid input returns immediately with zero calls; local salvage (fence
    stripping, outermost braces) is tried before spending the repair call.
    Raises ParseFailureError when the repair response is still unusable.
    """
    parsed = _strict_parse(raw_text)
    if parsed is not None:
        return parsed
    parsed = local_salvage(raw_text)
    if parsed is not None:
        return parsed
    repaired = _call(
        llm,
        prompts.repair_system,
        prompts.repair_user.format(schema=schema, raw=raw_text),
        stage,
        query,
        transcript if transcript is not None else [],
        max_tokens,
    )
    parsed = _strict_parse(repaired)
    if parsed is None:
        parsed = local_salvage(repaired)
    if parsed is None:
        raise ParseFailureError(f"unparseable response after repair: {repaired[:200]!r}", stage=stage)
    return parsed


def _coerce_id_list(values, known_ids: set[int], label: str) -> list[int]:
    ids = []
    for v in values if isinstance(values, list) else []:
        try:
            i = int(v)
        except (TypeError, ValueError):
            log.warning("dropping non-integer %s id %r", label, v)
            continue
        if i not in known_ids:
            log.warning("dropping unknown %s id %d", label, i)
            continue
        if i not in ids:
            ids.append(i)
    return ids


def stage_one_select(
    nodes: list[SceneNode],
    query: str,
    llm: LlmEndpoint,
    prompts: PromptTemplates = DEFAULT_PROMPTS,
    transcript: list[TranscriptEntry] | None = None,
    max_tokens: int = 256,
) -> StageOneResult:
    """Select target/anchor candidate ids from captions alone.

    The stage-one prompt carries (id, caption) pairs only — no coordinates.
    Unknown ids in the response are dropped with a warning; an empty target
    list raises EmptyTargetsError.
    """
    if not nodes:
        raise ValueError("stage one needs a non-empty scene")
    if not query:
        raise ValueError("stage one needs a non-empty query")
    transcript = transcript if transcript is not None else []
    objects_json = json.dumps(
        [{"id": int(n.id), "caption": n.caption} for n in nodes], indent=2
    )
    user = prompts.stage_one_user.format(objects=objects_json, query=query)
    try:
        response = _call(llm, prompts.stage_one_system, user, "stage_one", query, transcript, max_tokens)
        parsed = repair_json(
            response, llm, STAGE_ONE_SCHEMA, prompts, "stage_one_repair", query, transcript, max_tokens
        )
    except ParseFailureError as err:
        raise ParseFailureError(str(err), stage="stage_one")
    known = {int(n.id) for n in nodes}
    target_ids = _coerce_id_list(parsed.get("target_ids"), known, "target")
    anchor_ids = _coerce_id_list(parsed.get("anchor_ids"), known, "anchor")
    if not target_ids:
        raise EmptyTargetsError(f"stage one selected no valid target for query {query!r}")
    return StageOneResult(target_ids=target_ids, anchor_ids=anchor_ids)


def build_related_objects(
    result: StageOneResult,
    nodes: list[SceneNode],
    include_edges: bool = True,
) -> list[RelatedObjectEntry]:
    """Expand stage-one candidates into the compact stage-two description.

    Edges are computed for target-anchor pairs only: each target entry gets
    exactly one relation sentence per anchor; anchor entries follow without a
    relations field. ``include_edges=False`` (the edge-ablation mode) leaves
    target relation lists empty.
    """
    by_id = {int(n.id): n for n in nodes}
    room = room_center(nodes)
    entries = []
    for tid in result.target_ids:
        target = by_id[tid]
        sentences = []
        if include_edges:
            for aid in result.anchor_ids:
                anchor = by_id[aid]
                edge = edge_between(target, anchor, room)
                sentences.append(relation_sentence(target, anchor, edge))
        entries.append(
            RelatedObjectEntry(
                id=tid, caption=target.caption, center=target.center,
                extent=target.extent, relations=sentences,
            )
        )
    for aid in result.anchor_ids:
        anchor = by_id[aid]
        entries.append(
            RelatedObjectEntry(
                id=aid, caption=anchor.caption, center=anchor.center,
                extent=anchor.extent, relations=None,
            )
        )
    return entries


def stage_two_ground(
    related: list[RelatedObjectEntry],
    query: str,
    llm: LlmEndpoint,
    nodes: list[SceneNode],
    prompts: PromptTemplates = DEFAULT_PROMPTS,
    transcript: list[TranscriptEntry] | None = None,
    max_tokens: int = 256,
) -> tuple[int, SceneNode]:
    """Ground the query over the compact description; returns (id, node)."""
    if not related:
        raise ValueError("stage two needs a non-empty related-objects list")
    transcript = transcript if transcript is not None else []
    objects_json = json.dumps([e.to_prompt_obj() for e in related], indent=2)
    user = prompts.stage_two_user.format(objects=objects_json, query=query)
    try:
        response = _call(llm, prompts.stage_two_system, user, "stage_two", query, transcript, max_tokens)
        parsed = repair_json(
            response, llm, STAGE_TWO_SCHEMA, prompts, "stage_two_repair", query, transcript, max_tokens
        )
    except ParseFailureError as err:
        raise ParseFailureError(str(err), stage="stage_two")
    try:
        final_id = int(parsed.get("final_object_id"))
    except (TypeError, ValueError):
        raise ParseFailureError(
            f"stage two returned no usable final_object_id: {parsed!r}", stage="stage_two"
        )
    by_id = {int(n.id): n for n in nodes}
    if final_id not in by_id:
        raise UnknownIdError(f"stage two returned unknown object id {final_id}")
    return final_id, by_id[final_id]


def ground(
    nodes: list[SceneNode],
    query: str,
    llm: LlmEndpoint,
    prompts: PromptTemplates = DEFAULT_PROMPTS,
    include_edges: bool = True,
    max_tokens: int = 256,
) -> GroundingAnswer:
    """Run the full two-stage grounding for one query.

    The transcript records every call; a clean run spends exactly two calls
    and malformed responses add at most one repair call per stage.
    """
    transcript: list[TranscriptEntry] = []
    stage_one = stage_one_select(nodes, query, llm, prompts, transcript, max_tokens)
    related = build_related_objects(stage_one, nodes, include_edges=include_edges)
    final_id, node = stage_two_ground(related, query, llm, nodes, prompts, transcript, max_tokens)
    candidates = set(stage_one.target_ids) | set(stage_one.anchor_ids)
    answer = GroundingAnswer(
        final_object_id=final_id,
        bbox_center=node.center,
        bbox_extent=node.extent,
        transcript=transcript,
        stage_one=stage_one,
        related=related,
        out_of_candidates=final_id not in candidates,
    )
    if answer.out_of_candidates:
        log.warning("query %r: final id %d outside stage-one candidates", query, final_id)
    return answer
