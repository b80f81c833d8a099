"""Config validation and the end-to-end CLI pipeline on a tiny disk fixture."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest
import yaml

from scenegrounder import archive, cli
from scenegrounder.checkpoint import load_checkpoint
from scenegrounder.config import PipelineConfig, config_from_dict, load_config
from scenegrounder.errors import ConfigError
from scenegrounder.geometry import CameraIntrinsics, Pose


class TestConfig:
    def test_defaults_validate(self):
        PipelineConfig().validate()

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown sections"):
            config_from_dict({"nonsense": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            config_from_dict({"filter": {"min_confidence": 0.5, "typo_key": 1}})

    def test_out_of_range_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"filter": {"min_confidence": 2.0}})
        with pytest.raises(ConfigError):
            config_from_dict({"association": {"w_new": 0.3}})
        with pytest.raises(ConfigError):
            config_from_dict({"association": {"sigma_vis_merge": 0.8, "sigma_vis": 0.7}})

    def test_yaml_round_trip(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump({"association": {"sigma_vis": 0.8}, "views": {"num_views": 3}}))
        cfg = load_config(path)
        assert cfg.association.sigma_vis == 0.8
        assert cfg.views.num_views == 3
        assert cfg.filter.min_confidence == 0.5  # untouched default

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/cfg.yaml")


# ---------------------------------------------------------------------------
# disk fixture: 3 posed frames, two planar objects on a depth-2 wall


W, H, DIM = 64, 48, 4
FX = 50.0


def _write_fixture(root):
    seq_dir = root / "seq"
    det_dir = root / "det"
    seq_dir.mkdir()
    det_dir.mkdir()
    intr = CameraIntrinsics(fx=FX, fy=FX, cx=31.5, cy=23.5, width=W, height=H)

    rng = np.random.default_rng(0)
    frames = []
    for i, dx in enumerate((-0.05, 0.0, 0.05)):
        depth = np.full((H, W), 2.0)
        archive.save_depth_png(seq_dir / f"depth_{i}.png", depth)
        rgb = rng.integers(0, 255, size=(H, W, 3), dtype=np.uint8)
        from PIL import Image

        Image.fromarray(rgb).save(seq_dir / f"rgb_{i}.png")
        pose = Pose(np.eye(3), np.array([dx, 0.0, 0.0]))
        frames.append({
            "index": i,
            "pose": pose.to_flat(),
            "depth_path": f"depth_{i}.png",
            "rgb_path": f"rgb_{i}.png",
        })
    archive.save_sequence(seq_dir / "sequence.json", intr, frames)

    meta = archive.ArchiveMeta(width=W, height=H, dim=DIM, stride=2, num_frames=3)
    archive.save_meta(det_dir, meta)
    mask_a = np.zeros((H, W), dtype=bool)
    mask_a[10:22, 8:20] = True
    mask_b = np.zeros((H, W), dtype=bool)
    mask_b[12:24, 40:52] = True
    d_a = np.array([1.0, 0.0, 0.0, 0.0], dtype=np.float32)
    d_b = np.array([0.0, 1.0, 0.0, 0.0], dtype=np.float32)
    for i in range(3):
        records = [
            archive.DetectionRecord(0.9, mask_a, d_a),
            archive.DetectionRecord(0.9, mask_b, d_b),
            archive.DetectionRecord(0.1, mask_a, d_a),  # filtered: low confidence
        ]
        archive.save_frame_record(det_dir, i, records, meta)

    cfg = {
        "filter": {"min_confidence": 0.5, "min_mask_px": 20, "max_mask_fraction": 0.8,
                   "dbscan_eps": 0.3, "dbscan_min_pts": 3},
        "association": {"sigma_vis": 0.75, "w_new": 0.75, "merge_period": 10,
                        "sigma_vis_merge": 0.65, "overlap_thr": 0.25,
                        "post_min_points": 10, "post_min_detections": 2},
        "ingest": {"subsample_stride": 2},
    }
    cfg_path = root / "cfg.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg))
    return seq_dir / "sequence.json", det_dir, cfg_path


@pytest.fixture
def fixture_dirs(tmp_path):
    return _write_fixture(tmp_path)


def _run_map(fixture_dirs, tmp_path, name="map.sgmp"):
    seq, det, cfg = fixture_dirs
    out = tmp_path / name
    manifest = tmp_path / f"{name}.manifest.json"
    code = cli.main([
        "map", "--sequence", str(seq), "--detections", str(det),
        "--output", str(out), "--manifest", str(manifest), "--config", str(cfg),
    ])
    return code, out, manifest


class TestCmdMap:
    def test_maps_two_objects(self, fixture_dirs, tmp_path):
        code, out, manifest = _run_map(fixture_dirs, tmp_path)
        assert code == 0
        map, cfg = load_checkpoint(out)
        assert len(map) == 2
        for obj in map:
            assert obj.num_detections == 3
        doc = json.loads(manifest.read_text())
        assert doc["frames"] == 3
        assert doc["object_counts"]["after_postprocess"] == 2
        assert set(doc["stages_ms"]) >= {"load", "read", "lift", "integrate", "postprocess", "save"}

    def test_checkpoint_stable_across_runs(self, fixture_dirs, tmp_path):
        _, out1, _ = _run_map(fixture_dirs, tmp_path, "a.sgmp")
        _, out2, _ = _run_map(fixture_dirs, tmp_path, "b.sgmp")
        assert out1.read_bytes() == out2.read_bytes()

    def test_corrupt_record_exits_nonzero_naming_frame(self, fixture_dirs, tmp_path, capsys):
        seq, det, cfg = fixture_dirs
        path = det / "frame_1.det"
        path.write_bytes(path.read_bytes()[:-3])
        code = cli.main([
            "map", "--sequence", str(seq), "--detections", str(det),
            "--output", str(tmp_path / "m.sgmp"), "--config", str(cfg),
        ])
        assert code == cli.EXIT_CONFIG
        assert "frame_1" in capsys.readouterr().err

    def test_missing_depth_file_is_clean_error(self, fixture_dirs, tmp_path, capsys):
        seq, det, cfg = fixture_dirs
        (seq.parent / "depth_1.png").unlink()
        code = cli.main(["map", "--sequence", str(seq), "--detections", str(det),
                         "--output", str(tmp_path / "m.sgmp"), "--config", str(cfg)])
        assert code == cli.EXIT_CONFIG
        assert "depth_1" in capsys.readouterr().err

    def test_empty_sequence_empty_map(self, tmp_path):
        seq_dir = tmp_path / "seq"
        det_dir = tmp_path / "det"
        seq_dir.mkdir()
        det_dir.mkdir()
        intr = CameraIntrinsics(fx=FX, fy=FX, cx=31.5, cy=23.5, width=W, height=H)
        archive.save_sequence(seq_dir / "sequence.json", intr, [])
        archive.save_meta(det_dir, archive.ArchiveMeta(W, H, DIM, 2, 0))
        out = tmp_path / "empty.sgmp"
        code = cli.main(["map", "--sequence", str(seq_dir / "sequence.json"),
                         "--detections", str(det_dir), "--output", str(out)])
        assert code == 0
        map, _ = load_checkpoint(out)
        assert len(map) == 0


@pytest.fixture
def mapped(fixture_dirs, tmp_path):
    code, out, _ = _run_map(fixture_dirs, tmp_path)
    assert code == 0
    return fixture_dirs, out


def _run_graph(mapped, tmp_path):
    (seq, det, cfg), ckpt = mapped
    graph_path = tmp_path / "graph.json"
    views_path = tmp_path / "views.json"
    crops_dir = tmp_path / "crops"
    captions = tmp_path / "captions.json"
    captions.write_text(json.dumps({"0": "red cube", "1": "blue cube"}))
    emb = tmp_path / "emb.json"
    emb.write_text(json.dumps({"0": [1.0, 0.0], "1": [0.0, 1.0]}))
    code = cli.main([
        "graph", "--checkpoint", str(ckpt), "--sequence", str(seq),
        "--output", str(graph_path), "--captions", str(captions),
        "--embeddings", str(emb), "--views-out", str(views_path),
        "--crops-dir", str(crops_dir), "--config", str(cfg),
    ])
    return code, graph_path, views_path, crops_dir, emb


class TestCmdGraph:
    def test_schema_valid_graph(self, mapped, tmp_path):
        code, graph_path, views_path, crops_dir, _ = _run_graph(mapped, tmp_path)
        assert code == 0
        doc = json.loads(graph_path.read_text())
        assert {o["caption"] for o in doc["objects"]} == {"red cube", "blue cube"}
        for o in doc["objects"]:
            assert set(o) == {"id", "caption", "bbox_center", "bbox_extent"}
        sidecar = json.loads(views_path.read_text())
        assert {v["id"] for v in sidecar} == {0, 1}
        assert all(len(v["crop_box"]) == 4 for v in sidecar)
        assert sorted(p.name for p in crops_dir.iterdir()) == ["crop_0.png", "crop_1.png"]

    def test_round_trip_matches_memory(self, mapped, tmp_path):
        from scenegrounder.graph import load_scene_graph

        code, graph_path, _, _, _ = _run_graph(mapped, tmp_path)
        assert code == 0
        map, _ = load_checkpoint(mapped[1])
        nodes = load_scene_graph(graph_path)
        for node in nodes:
            obj = map.objects[node.id]
            np.testing.assert_allclose(node.center, obj.center, atol=1e-6)
            np.testing.assert_allclose(node.extent, obj.extent, atol=1e-6)

    def test_empty_map_empty_objects(self, tmp_path):
        from scenegrounder.checkpoint import save_checkpoint
        from scenegrounder.objectmap import AssociationConfig, ObjectMap

        ckpt = tmp_path / "empty.sgmp"
        save_checkpoint(ckpt, ObjectMap(), AssociationConfig(), dim=DIM)
        seq_dir = tmp_path / "seq"
        seq_dir.mkdir()
        intr = CameraIntrinsics(fx=FX, fy=FX, cx=31.5, cy=23.5, width=W, height=H)
        archive.save_sequence(seq_dir / "sequence.json", intr, [])
        out = tmp_path / "graph.json"
        code = cli.main(["graph", "--checkpoint", str(ckpt),
                         "--sequence", str(seq_dir / "sequence.json"), "--output", str(out)])
        assert code == 0
        assert json.loads(out.read_text()) == {"objects": []}


@pytest.fixture
def graphed(mapped, tmp_path):
    code, graph_path, _, _, emb = _run_graph(mapped, tmp_path)
    assert code == 0
    return graph_path, emb


class TestCmdGround:
    def test_mock_grounds_fixture_scene(self, graphed, tmp_path, capsys):
        graph_path, _ = graphed
        answer_path = tmp_path / "answer.json"
        transcript = tmp_path / "transcript.jsonl"
        code = cli.main([
            "ground", "--graph", str(graph_path), "--query", "the red cube near the blue cube",
            "--endpoint", "mock", "--output", str(answer_path), "--transcript", str(transcript),
        ])
        assert code == 0
        answer = json.loads(answer_path.read_text())
        assert answer["final_object_id"] == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed == answer
        assert len(transcript.read_text().splitlines()) == 2

    def test_replay_reproduces_answer(self, graphed, tmp_path):
        graph_path, _ = graphed
        first = tmp_path / "a1.json"
        transcript = tmp_path / "t.jsonl"
        cli.main(["ground", "--graph", str(graph_path), "--query", "the blue cube",
                  "--endpoint", "mock", "--output", str(first), "--transcript", str(transcript)])
        second = tmp_path / "a2.json"
        code = cli.main(["ground", "--graph", str(graph_path), "--query", "the blue cube",
                         "--endpoint", "replay", "--replay", str(transcript),
                         "--output", str(second)])
        assert code == 0
        assert first.read_text() == second.read_text()

    def test_http_without_env_is_config_error(self, graphed, monkeypatch):
        graph_path, _ = graphed
        monkeypatch.delenv("SCENEGROUNDER_LLM_BASE_URL", raising=False)
        monkeypatch.delenv("SCENEGROUNDER_LLM_MODEL", raising=False)
        code = cli.main(["ground", "--graph", str(graph_path), "--query", "the red cube",
                         "--endpoint", "http"])
        assert code == cli.EXIT_CONFIG

    def test_empty_targets_exit_code(self, graphed):
        graph_path, _ = graphed
        code = cli.main(["ground", "--graph", str(graph_path),
                         "--query", "the grand piano", "--endpoint", "mock"])
        assert code == cli.EXIT_EMPTY_TARGETS


class TestCmdClassify:
    def test_csv_output(self, graphed, tmp_path):
        graph_path, emb = graphed
        classes = tmp_path / "classes.txt"
        classes.write_text("cube\nbanana\n")
        text_emb = tmp_path / "text_emb.json"
        text_emb.write_text(json.dumps({
            "an image of cube": [1.0, 0.0],
            "an image of banana": [0.0, 1.0],
        }))
        out = tmp_path / "labels.csv"
        code = cli.main(["classify", "--graph", str(graph_path), "--embeddings", str(emb),
                         "--classes", str(classes), "--text-embeddings", str(text_emb),
                         "--output", str(out)])
        assert code == 0
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 2
        assert rows[0]["class"] == "cube"  # object 0 embeds as e0
        assert rows[1]["class"] == "banana"


class TestCmdEval:
    def _write_eval_inputs(self, tmp_path, perfect=True):
        gt_box = [0, 0, 0, 1, 1, 1]
        ann = tmp_path / "ann.csv"
        with ann.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scene_id", "query", "target_id", "box", "tags"])
            w.writerow(["s0", "the chair", 0, "0 0 0 1 1 1", "easy"])
            w.writerow(["s0", "the table", 1, "2 0 0 3 1 1", "hard;view_dep"])
        preds = [
            {"final_object_id": 0, "box": gt_box},
            {"final_object_id": 1 if perfect else 9,
             "box": [2, 0, 0, 3, 1, 1] if perfect else [9, 9, 9, 10, 10, 10]},
        ]
        pred = tmp_path / "pred.json"
        pred.write_text(json.dumps(preds))
        return pred, ann

    def test_perfect_predictions_all_ones(self, tmp_path, capsys):
        pred, ann = self._write_eval_inputs(tmp_path)
        report = tmp_path / "report.md"
        out_csv = tmp_path / "acc.csv"
        code = cli.main(["eval", "--predictions", str(pred), "--annotations", str(ann),
                         "--report", str(report), "--csv", str(out_csv)])
        assert code == 0
        text = report.read_text()
        assert "Recall@1: 1.000" in text
        assert "| overall | 2 | 1.000 | 1.000 | 1.000 |" in text
        rows = list(csv.DictReader(out_csv.open()))
        assert rows[0]["acc@0.5"] == "1.000000"

    def test_mismatched_lengths_error(self, tmp_path):
        pred, ann = self._write_eval_inputs(tmp_path)
        pred.write_text(json.dumps([{"final_object_id": 0, "box": [0, 0, 0, 1, 1, 1]}]))
        code = cli.main(["eval", "--predictions", str(pred), "--annotations", str(ann)])
        assert code == cli.EXIT_CONFIG


class TestExportPly:
    def test_writes_one_ply_per_object(self, mapped, tmp_path):
        _, ckpt = mapped
        out_dir = tmp_path / "ply"
        code = cli.main(["export-ply", "--checkpoint", str(ckpt), "--output-dir", str(out_dir)])
        assert code == 0
        files = sorted(p.name for p in out_dir.iterdir())
        assert files == ["object_0.ply", "object_1.ply"]
        header = (out_dir / "object_0.ply").read_text().splitlines()
        assert header[0] == "ply"
        assert any(line.startswith("element vertex") for line in header)
