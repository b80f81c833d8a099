"""Annotation loaders and evaluation reports.

Two annotation flavors are accepted and normalized into
:class:`AnnotationRecord`:

* referral CSV/JSON with fields ``scene_id``, ``query`` (or ``utterance``),
  ``target_id``, optional ``box`` (six numbers: min corner then max corner)
  and optional ``tags`` (semicolon-separated in CSV, list in JSON);
* ScanRefer-style JSON lists using ``description`` / ``object_id`` names.

Tags pass through verbatim; no semantics are attached here.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError
from .metrics import Aabb3, AccuracyTable, GroundingCase


@dataclass
class AnnotationRecord:
    scene_id: str
    query: str
    target_id: int | None
    gt_box: Aabb3 | None
    tags: frozenset

    def to_case(self) -> GroundingCase:
        if self.gt_box is None:
            raise SchemaError(f"annotation {self.query!r} carries no gt box")
        return GroundingCase(query=self.query, gt_box=self.gt_box, tags=self.tags)


def _parse_box(value) -> Aabb3 | None:
    if value in (None, ""):
        return None
    if isinstance(value, str):
        parts = [float(x) for x in value.replace(",", " ").split()]
    else:
        parts = [float(x) for x in value]
    if len(parts) != 6:
        raise SchemaError(f"box must have 6 numbers (min xyz, max xyz), got {len(parts)}")
    return Aabb3(tuple(parts[:3]), tuple(parts[3:]))


def _parse_tags(value) -> frozenset:
    if value in (None, ""):
        return frozenset()
    if isinstance(value, str):
        return frozenset(t.strip() for t in value.replace("|", ";").split(";") if t.strip())
    return frozenset(str(t) for t in value)


def _record_from_dict(entry: dict, source: str) -> AnnotationRecord:
    query = entry.get("query") or entry.get("utterance") or entry.get("description")
    if not query:
        raise SchemaError(f"{source}: record missing query/utterance/description")
    target = entry.get("target_id", entry.get("object_id"))
    return AnnotationRecord(
        scene_id=str(entry.get("scene_id", "")),
        query=str(query),
        target_id=None if target in (None, "") else int(target),
        gt_box=_parse_box(entry.get("box")),
        tags=_parse_tags(entry.get("tags")),
    )


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Load a CSV or JSON annotation file (flavor by extension)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            try:
                return [_record_from_dict(row, str(path)) for row in csv.DictReader(fh)]
            except (ValueError, KeyError) as err:
                raise SchemaError(f"{path}: {err}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: not valid JSON: {err}")
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a JSON list of annotation records")
    try:
        return [_record_from_dict(entry, str(path)) for entry in data]
    except (ValueError, AttributeError) as err:
        raise SchemaError(f"{path}: {err}")


def load_predictions(path: str | Path) -> list[dict]:
    """Load grounding predictions: a JSON list of answer objects.

    Each entry needs ``final_object_id`` and either ``box`` (six numbers) or
    ``bbox_center`` + ``bbox_extent``.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: not valid JSON: {err}")
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a JSON list of predictions")
    out = []
    for i, entry in enumerate(data):
        try:
            box = entry.get("box")
            if box is not None:
                aabb = _parse_box(box)
            else:
                aabb = Aabb3.from_center_extent(entry["bbox_center"], entry["bbox_extent"])
            out.append({"final_object_id": int(entry["final_object_id"]), "box": aabb})
        except (KeyError, TypeError, ValueError) as err:
            raise SchemaError(f"{path}: prediction {i}: {err}")
    return out


def render_grounding_report(table: AccuracyTable, recall: float | None = None) -> str:
    """Markdown report: Acc@threshold overall and per tag subset."""
    thr_heads = " | ".join(f"A@{thr:g}" for thr in table.thresholds)
    lines = [
        "# Grounding evaluation",
        "",
        f"Cases: {table.n_cases}" + (f" — Recall@1: {recall:.3f}" if recall is not None else ""),
        "",
        f"| Subset | n | {thr_heads} |",
        "|---|---|" + "---|" * len(table.thresholds),
    ]
    overall = " | ".join(f"{table.overall[thr]:.3f}" for thr in table.thresholds)
    lines.append(f"| overall | {table.n_cases} | {overall} |")
    for tag in sorted(table.per_tag):
        row = " | ".join(f"{table.per_tag[tag][thr]:.3f}" for thr in table.thresholds)
        lines.append(f"| {tag} | {table.tag_counts[tag]} | {row} |")
    return "\n".join(lines) + "\n"


def write_accuracy_csv(path: str | Path, table: AccuracyTable, recall: float | None = None):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subset", "n", *[f"acc@{thr:g}" for thr in table.thresholds], "recall@1"])
        writer.writerow(
            ["overall", table.n_cases,
             *[f"{table.overall[thr]:.6f}" for thr in table.thresholds],
             "" if recall is None else f"{recall:.6f}"]
        )
        for tag in sorted(table.per_tag):
            writer.writerow(
                [tag, table.tag_counts[tag],
                 *[f"{table.per_tag[tag][thr]:.6f}" for thr in table.thresholds], ""]
            )
