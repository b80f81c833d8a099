"""Foundation-model extraction stage feeding the scenegrounder pipeline.

Turns an RGB(-D) sequence into the detection-archive format (masks +
confidences + pooled descriptors) and best-view crops into caption fixtures.
All coupling to the mapping engine is through those documented files.
"""

from .backends import ExtractorConfig, build_backend
from .caption import caption_crops
from .extract import extract_frame, extract_sequence
from .pooling import pool_mask_features

__version__ = "0.1.0"
