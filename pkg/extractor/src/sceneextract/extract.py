"""Sequence-level extraction: RGB frames -> detection archive."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image

from .backends import ExtractorConfig, FeatureExtractor, MaskProposer, build_backend
from .formats import ProposalRecord, load_rgb_sequence, write_frame_record, write_meta
from .pooling import pool_mask_features

log = logging.getLogger(__name__)


def extract_frame(
    rgb: np.ndarray,
    proposer: MaskProposer,
    extractor: FeatureExtractor,
    stride: int,
) -> list[ProposalRecord]:
    """Proposals + pooled descriptors for one frame."""
    grid = extractor.features(rgb)
    records = []
    for mask, confidence in proposer.propose(rgb):
        descriptor = pool_mask_features(grid, mask, stride)
        if descriptor is None:
            log.warning("proposal covers no feature cell, dropping")
            continue
        records.append(ProposalRecord(confidence=confidence, mask=mask, descriptor=descriptor))
    return records


def extract_sequence(sequence_path: str | Path, output_dir: str | Path, config: ExtractorConfig) -> dict:
    """Run the models over every frame and emit the archive.

    A frame whose models fail is logged and written as an empty record so
    the archive stays aligned with the sequence. Returns a summary with
    per-frame detection counts.
    """
    config.validate()
    proposer, extractor, _ = build_backend(config)
    frames = load_rgb_sequence(sequence_path)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    counts = {}
    width = height = None
    for index, rgb_path in frames:
        try:
            rgb = np.asarray(Image.open(rgb_path).convert("RGB"))
            if width is None:
                height, width = rgb.shape[:2]
            records = extract_frame(rgb, proposer, extractor, config.stride)
        except Exception as err:  # per-frame model failures must not kill the run
            log.warning("frame %d: extraction failed (%s), writing empty record", index, err)
            records = []
        write_frame_record(out, index, records, config.dim)
        counts[index] = len(records)

    if width is None:
        raise ValueError(f"{sequence_path}: sequence has no frames")
    write_meta(out, width, height, config.dim, config.stride, len(frames))
    return {"frames": len(frames), "detections_per_frame": counts, "output": str(out)}
