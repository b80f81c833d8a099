"""Model backends: mask proposals, dense features, captions.

Two families:

* ``synthetic`` — deterministic image-processing stand-ins (color-component
  masks, projected color/position features, template captions). No model
  weights, suitable for tests, demos and pipeline bring-up.
* ``huggingface`` — thin wrappers over user-supplied checkpoints (mask
  generation, ViT patch features, image-to-text). Weights are never bundled;
  torch/transformers import lazily so the synthetic path stays light.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import ndimage

log = logging.getLogger(__name__)


@dataclass
class ExtractorConfig:
    backend: str = "synthetic"  # synthetic | huggingface
    mask_model: str = ""
    feature_model: str = ""
    caption_model: str = ""
    device: str = "cpu"
    batch_size: int = 1
    stride: int = 8
    dim: int = 64
    min_mask_px: int = 16
    max_mask_fraction: float = 0.9

    def validate(self):
        if self.backend not in ("synthetic", "huggingface"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.stride < 1 or self.dim < 1 or self.batch_size < 1:
            raise ValueError("stride, dim and batch_size must be >= 1")
        if self.backend == "huggingface" and not (self.mask_model and self.feature_model):
            raise ValueError("huggingface backend needs mask_model and feature_model paths")


class MaskProposer(Protocol):
    def propose(self, rgb: np.ndarray) -> list[tuple[np.ndarray, float]]: ...


class FeatureExtractor(Protocol):
    def features(self, rgb: np.ndarray) -> np.ndarray: ...


class Captioner(Protocol):
    def caption(self, crop: np.ndarray) -> str: ...


# ---------------------------------------------------------------------------
# synthetic backend


class SyntheticMaskProposer:
    """Connected components of posterized color as class-agnostic proposals."""

    def __init__(self, levels: int = 4, min_mask_px: int = 16, max_mask_fraction: float = 0.9):
        self.levels = levels
        self.min_mask_px = min_mask_px
        self.max_mask_fraction = max_mask_fraction

    def propose(self, rgb: np.ndarray) -> list[tuple[np.ndarray, float]]:
        img = np.asarray(rgb)
        h, w = img.shape[:2]
        quant = (img.astype(np.int64) * self.levels // 256).clip(0, self.levels - 1)
        key = quant[..., 0] * self.levels * self.levels + quant[..., 1] * self.levels + quant[..., 2]
        proposals = []
        for value in np.unique(key):
            labeled, n = ndimage.label(key == value)
            for comp in range(1, n + 1):
                mask = labeled == comp
                area = int(mask.sum())
                if area < self.min_mask_px or area / (h * w) > self.max_mask_fraction:
                    continue
                confidence = min(0.5 + area / (h * w), 0.99)
                proposals.append((mask, float(confidence)))
        # deterministic order: largest first, ties by first pixel position
        proposals.sort(key=lambda p: (-int(p[0].sum()), int(np.argmax(p[0]))))
        return proposals


class SyntheticFeatureExtractor:
    """Dense features from cell-center color + position, fixed projection.

    The projection matrix is seeded by the feature dimension alone, so two
    runs over the same image produce identical grids.
    """

    def __init__(self, stride: int = 8, dim: int = 64):
        self.stride = stride
        self.dim = dim
        self._proj = np.random.default_rng(dim).normal(size=(5, dim))

    def features(self, rgb: np.ndarray) -> np.ndarray:
        img = np.asarray(rgb, dtype=np.float64) / 255.0
        h, w = img.shape[:2]
        s = self.stride
        gh, gw = h // s, w // s
        ys = np.arange(gh) * s + s // 2
        xs = np.arange(gw) * s + s // 2
        cells = img[np.ix_(ys, xs)]  # (gh, gw, 3) cell-center colors
        gy, gx = np.meshgrid(ys / h, xs / w, indexing="ij")
        raw = np.concatenate([cells, gy[..., None], gx[..., None]], axis=-1)
        return raw @ self._proj


class SyntheticCaptioner:
    """Template caption from the crop's dominant color and size."""

    _NAMES = ["red", "green", "blue"]

    def caption(self, crop: np.ndarray) -> str:
        img = np.asarray(crop)
        if img.size == 0:
            raise ValueError("empty crop")
        mean = img.reshape(-1, img.shape[-1]).mean(axis=0)
        color = self._NAMES[int(np.argmax(mean[:3]))]
        return f"a {color} object about {img.shape[1]}x{img.shape[0]} px"


# ---------------------------------------------------------------------------
# huggingface backend (user-supplied checkpoints, lazy imports)


class HfMaskProposer:
    def __init__(self, model_path: str, device: str = "cpu"):
        from transformers import pipeline

        self._pipe = pipeline("mask-generation", model=model_path, device=device)

    def propose(self, rgb: np.ndarray) -> list[tuple[np.ndarray, float]]:
        from PIL import Image

        out = self._pipe(Image.fromarray(np.asarray(rgb)))
        masks = out["masks"]
        scores = out.get("scores") or [1.0] * len(masks)
        return [(np.asarray(m, dtype=bool), float(s)) for m, s in zip(masks, scores)]


class HfFeatureExtractor:
    """ViT patch embeddings reshaped to the (H/s, W/s, dim) grid."""

    def __init__(self, model_path: str, stride: int, device: str = "cpu"):
        import torch
        from transformers import AutoImageProcessor, AutoModel

        self._torch = torch
        self._processor = AutoImageProcessor.from_pretrained(model_path)
        self._model = AutoModel.from_pretrained(model_path).to(device).eval()
        self._device = device
        self.stride = stride

    def features(self, rgb: np.ndarray) -> np.ndarray:
        from PIL import Image

        h, w = np.asarray(rgb).shape[:2]
        gh, gw = h // self.stride, w // self.stride
        inputs = self._processor(images=Image.fromarray(np.asarray(rgb)), return_tensors="pt")
        with self._torch.no_grad():
            tokens = self._model(**{k: v.to(self._device) for k, v in inputs.items()}).last_hidden_state
        patches = tokens[0, 1:, :]  # drop the CLS token
        side = int(round(float(patches.shape[0]) ** 0.5))
        grid = patches.reshape(side, side, -1).cpu().numpy()
        # model patch grid -> requested grid by nearest neighbor
        yi = (np.arange(gh) * side // max(gh, 1)).clip(0, side - 1)
        xi = (np.arange(gw) * side // max(gw, 1)).clip(0, side - 1)
        return grid[np.ix_(yi, xi)]


class HfCaptioner:
    def __init__(self, model_path: str, device: str = "cpu",
                 prompt: str = ("Describe visible object in front of you, paying close "
                                "attention to its spatial dimensions and visual attributes")):
        from transformers import pipeline

        self._pipe = pipeline("image-to-text", model=model_path, device=device)
        self.prompt = prompt

    def caption(self, crop: np.ndarray) -> str:
        from PIL import Image

        out = self._pipe(Image.fromarray(np.asarray(crop)), prompt=self.prompt)
        return out[0]["generated_text"].strip()


def build_backend(config: ExtractorConfig) -> tuple[MaskProposer, FeatureExtractor, Captioner]:
    config.validate()
    if config.backend == "synthetic":
        return (
            SyntheticMaskProposer(min_mask_px=config.min_mask_px,
                                  max_mask_fraction=config.max_mask_fraction),
            SyntheticFeatureExtractor(stride=config.stride, dim=config.dim),
            SyntheticCaptioner(),
        )
    return (
        HfMaskProposer(config.mask_model, config.device),
        HfFeatureExtractor(config.feature_model, config.stride, config.device),
        HfCaptioner(config.caption_model or config.feature_model, config.device),
    )
