"""Command-line pipeline: map -> graph -> classify / ground / eval.

Stage boundaries are files (checkpoints, scene-graph JSON, transcripts), so
each command runs standalone and any stage's inputs can come from a third
party that honors the documented formats.

Exit codes: 0 ok, 1 unexpected failure, 2 config/schema problem,
3 LLM parse failure, 4 stage one selected no target, 5 unknown object id.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import archive, checkpoint, datasets, graph, llm, metrics, reasoner, views
from .config import PipelineConfig, load_config
from .errors import (
    ConfigError,
    EmptyTargetsError,
    NoVisibleViewError,
    ParseFailureError,
    SceneGrounderError,
    SchemaError,
    UnknownIdError,
)
from .ingest import lift_frame_detections
from .objectmap import ObjectMap, integrate_frame, postprocess
from .pipeline import StageTimer, build_manifest

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_EMPTY_TARGETS = 4
EXIT_UNKNOWN_ID = 5


def cmd_map(args) -> int:
    config = load_config(args.config)
    timer = StageTimer()
    with timer.stage("load"):
        sequence = archive.load_sequence(args.sequence)
        meta = archive.load_meta(args.detections)
    map = ObjectMap()
    for ref in sequence.frames:
        with timer.stage("read"):
            frame = sequence.load_frame(ref)
            records = archive.load_frame_record(args.detections, ref.index, meta)
        with timer.stage("lift"):
            proposals = [(r.mask, r.confidence, r.descriptor) for r in records]
            detections = lift_frame_detections(
                frame, proposals, config.filter, config.ingest.subsample_stride
            )
        with timer.stage("integrate"):
            integrate_frame(map, detections, ref.index, config.association)
    objects_after_mapping = len(map)
    with timer.stage("postprocess"):
        postprocess(map, config.association)
    with timer.stage("save"):
        checkpoint.save_checkpoint(args.output, map, config.association, meta.dim)
    # wall time snapshots here; the manifest write itself is outside the bracket
    manifest = build_manifest(
        timer,
        config.association,
        {"sequence": str(args.sequence), "detections": str(args.detections)},
        len(sequence.frames),
        {"after_mapping": objects_after_mapping, "after_postprocess": len(map)},
    )
    if args.manifest:
        manifest.save(args.manifest)
    print(
        f"mapped {len(sequence.frames)} frames -> {len(map)} objects "
        f"({manifest.ms_per_frame:.1f} ms/frame)"
    )
    return EXIT_OK


def _frames_from_sequence(sequence: archive.Sequence) -> dict:
    return {ref.index: sequence.load_frame(ref) for ref in sequence.frames}


def cmd_graph(args) -> int:
    config = load_config(args.config)
    map, _ = checkpoint.load_checkpoint(args.checkpoint)
    sequence = archive.load_sequence(args.sequence)
    frames = _frames_from_sequence(sequence)

    captions = graph.load_caption_table(args.captions) if args.captions else None
    embeddings = graph.load_embedding_table(args.embeddings) if args.embeddings else None

    best_views: dict[int, views.BestView] = {}
    for obj in sorted(map.objects.values(), key=lambda o: o.id):
        try:
            best_views[obj.id] = views.best_view(
                obj,
                frames,
                num_views=config.views.num_views,
                splat_radius_px=config.views.splat_radius_px,
                occlusion_tol=config.views.occlusion_tol,
                crop_pad_px=config.views.crop_pad_px,
            )
        except NoVisibleViewError as err:
            print(f"skipping object {obj.id}: {err}", file=sys.stderr)

    frames_rgb = {fi: f.rgb for fi, f in frames.items() if f.rgb is not None}
    describer = graph.ConstantDescriber(args.default_caption)
    nodes = graph.build_scene_nodes(
        map, best_views, describer=describer, captions=captions,
        frames_rgb=frames_rgb, embeddings=embeddings,
    )
    graph.save_scene_graph(args.output, nodes)
    if args.views_out:
        sidecar = [
            {"id": oid, "frame_index": v.frame_index, "crop_box": list(v.crop_box)}
            for oid, v in sorted(best_views.items())
        ]
        Path(args.views_out).write_text(json.dumps(sidecar, indent=2))
    if args.crops_dir:
        from PIL import Image

        out = Path(args.crops_dir)
        out.mkdir(parents=True, exist_ok=True)
        for oid, v in sorted(best_views.items()):
            rgb = frames_rgb.get(v.frame_index)
            if rgb is None:
                continue
            x0, y0, x1, y1 = v.crop_box
            Image.fromarray(rgb[y0:y1, x0:x1]).save(out / f"crop_{oid}.png")
    print(f"scene graph with {len(nodes)} nodes -> {args.output}")
    return EXIT_OK


def cmd_classify(args) -> int:
    from .classify import FixtureTextEmbedder, HttpTextEmbedder, classify_objects

    nodes = graph.load_scene_graph(args.graph)
    graph.attach_embeddings(nodes, graph.load_embedding_table(args.embeddings))
    class_names = [
        line.strip() for line in Path(args.classes).read_text().splitlines() if line.strip()
    ]
    if args.text_embeddings:
        embedder = FixtureTextEmbedder.from_json(args.text_embeddings)
    else:
        embedder = HttpTextEmbedder()
    results = classify_objects(nodes, class_names, embedder)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["object_id", "class", "score"])
        for r in results:
            writer.writerow([r.object_id, r.label, f"{r.score:.6f}"])
    print(f"classified {len(results)}/{len(nodes)} objects -> {args.output}")
    return EXIT_OK


def _make_endpoint(args, config: PipelineConfig):
    kind = args.endpoint or config.endpoint.kind
    if kind == "mock":
        return llm.MockEndpoint()
    if kind == "replay":
        path = args.replay or config.endpoint.replay_path
        if not path:
            raise ConfigError("replay endpoint needs --replay <transcript.jsonl>")
        return llm.ReplayEndpoint.from_jsonl(path)
    if kind == "http":
        return llm.HttpEndpoint()
    raise ConfigError(f"unknown endpoint kind {kind!r}")


def cmd_ground(args) -> int:
    config = load_config(args.config)
    nodes = graph.load_scene_graph(args.graph)
    if not nodes:
        raise SchemaError(f"{args.graph}: scene graph is empty")
    endpoint = _make_endpoint(args, config)
    answer = reasoner.ground(
        nodes,
        args.query,
        endpoint,
        prompts=config.prompts,
        include_edges=not args.no_edges,
        max_tokens=config.endpoint.max_tokens,
    )
    print(json.dumps(answer.to_dict(), indent=2))
    if args.output:
        Path(args.output).write_text(json.dumps(answer.to_dict(), indent=2))
    if args.transcript:
        reasoner.save_transcript(args.transcript, answer.transcript)
    return EXIT_OK


def cmd_eval(args) -> int:
    records = datasets.load_annotations(args.annotations)
    predictions = datasets.load_predictions(args.predictions)
    if len(records) != len(predictions):
        raise SchemaError(
            f"{len(predictions)} predictions for {len(records)} annotations"
        )
    cases = [r.to_case() for r in records]
    table = metrics.grounding_accuracy([p["box"] for p in predictions], cases)
    recall = None
    if all(r.target_id is not None for r in records):
        recall = metrics.recall_at_1(
            [p["final_object_id"] for p in predictions], [r.target_id for r in records]
        )
    report = datasets.render_grounding_report(table, recall)
    print(report)
    if args.report:
        Path(args.report).write_text(report)
    if args.csv:
        datasets.write_accuracy_csv(args.csv, table, recall)
    return EXIT_OK


def cmd_export_ply(args) -> int:
    map, _ = checkpoint.load_checkpoint(args.checkpoint)
    paths = checkpoint.export_ply(map, args.output_dir)
    print(f"wrote {len(paths)} PLY files to {args.output_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenegrounder",
        description="Object-centric 3D mapping and language grounding pipeline",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map", help="build the object map from a posed RGB-D sequence")
    p.add_argument("--sequence", required=True, help="sequence JSON (poses/intrinsics)")
    p.add_argument("--detections", required=True, help="detection archive directory")
    p.add_argument("--output", required=True, help="map checkpoint to write")
    p.add_argument("--manifest", help="run manifest JSON to write")
    p.add_argument("--config", help="pipeline config YAML")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("graph", help="build the scene graph from a map checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sequence", required=True)
    p.add_argument("--output", required=True, help="scene-graph JSON to write")
    p.add_argument("--captions", help="caption fixture JSON (id -> caption)")
    p.add_argument("--embeddings", help="visual-embedding table JSON (id -> vector)")
    p.add_argument("--views-out", help="best-view sidecar JSON to write")
    p.add_argument("--crops-dir", help="directory for best-view crop PNGs")
    p.add_argument("--default-caption", default="object",
                   help="caption used when no fixture entry exists")
    p.add_argument("--config", help="pipeline config YAML")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("classify", help="label graph objects against a class list")
    p.add_argument("--graph", required=True)
    p.add_argument("--embeddings", required=True, help="visual-embedding table JSON")
    p.add_argument("--classes", required=True, help="text file, one class per line")
    p.add_argument("--text-embeddings", help="fixture text-embedding JSON; else HTTP env")
    p.add_argument("--output", required=True, help="CSV to write")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("ground", help="ground a natural-language query in the graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--endpoint", choices=["mock", "http", "replay"],
                   help="LLM endpoint (default from config)")
    p.add_argument("--replay", help="transcript JSONL for the replay endpoint")
    p.add_argument("--transcript", help="transcript JSONL to write")
    p.add_argument("--output", help="answer JSON to write")
    p.add_argument("--no-edges", action="store_true",
                   help="ablation: omit relation sentences from stage two")
    p.add_argument("--config", help="pipeline config YAML")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("eval", help="score grounding predictions against annotations")
    p.add_argument("--predictions", required=True, help="JSON list of answers")
    p.add_argument("--annotations", required=True, help="CSV or JSON annotation file")
    p.add_argument("--report", help="markdown report to write")
    p.add_argument("--csv", help="accuracy CSV to write")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-ply", help="write one colored PLY per map object")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_export_ply)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (SchemaError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseFailureError as err:
        print(f"error ({err.stage or 'parse'}): {err}", file=sys.stderr)
        return EXIT_PARSE
    except EmptyTargetsError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_EMPTY_TARGETS
    except UnknownIdError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_UNKNOWN_ID
    except SceneGrounderError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
