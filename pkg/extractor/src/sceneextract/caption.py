"""Caption best-view crops into the id-keyed fixture consumed by the grounder."""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .backends import ExtractorConfig, build_backend

log = logging.getLogger(__name__)

_CROP_RE = re.compile(r"crop_(\d+)\.(png|jpg|jpeg)$", re.IGNORECASE)


def caption_crops(crops_dir: str | Path, output_path: str | Path, config: ExtractorConfig) -> dict:
    """Caption every ``crop_<id>.png`` under ``crops_dir``.

    Failures yield an empty caption and land on the ``failed`` list; the
    output JSON (``{"captions": {id: text}, "failed": [ids]}``) is readable
    by the mapping engine's caption-table loader.
    """
    config.validate()
    _, _, captioner = build_backend(config)
    crops_dir = Path(crops_dir)
    captions: dict[int, str] = {}
    failed: list[int] = []
    for path in sorted(crops_dir.iterdir()):
        m = _CROP_RE.search(path.name)
        if not m:
            continue
        object_id = int(m.group(1))
        try:
            crop = np.asarray(Image.open(path).convert("RGB"))
            captions[object_id] = captioner.caption(crop)
        except Exception as err:
            log.warning("crop %s failed: %s", path.name, err)
            captions[object_id] = ""
            failed.append(object_id)
    doc = {"captions": {str(k): v for k, v in sorted(captions.items())}, "failed": sorted(failed)}
    Path(output_path).write_text(json.dumps(doc, indent=2))
    return doc
