"""Exception types shared across the pipeline stages."""

from __future__ import annotations


class SceneGrounderError(Exception):
    """Base class for all pipeline errors."""


class SchemaError(SceneGrounderError):
    """An input file violates its documented schema; message names file and field."""


class ConfigError(SceneGrounderError):
    """Invalid or unknown configuration key/value."""


class EmptyProjectionError(SceneGrounderError):
    """No mask pixel had valid depth during back-projection."""


class AllNoiseError(SceneGrounderError):
    """DBSCAN labeled every point as noise."""


class EmptyMaskError(SceneGrounderError):
    """A mask covered no feature cell, or a raycast produced no in-bounds pixel."""


class NoVisibleViewError(SceneGrounderError):
    """Every candidate viewpoint produced an empty raycast mask."""


class DescriberUnavailableError(SceneGrounderError):
    """The captioning backend could not produce a caption."""


class ParseFailureError(SceneGrounderError):
    """LLM response could not be parsed as JSON even after one repair call."""

    def __init__(self, message: str, stage: str = ""):
        super().__init__(message)
        self.stage = stage


class EmptyTargetsError(SceneGrounderError):
    """Stage one selected no valid target id."""


class UnknownIdError(SceneGrounderError):
    """The model returned an object id that does not exist in the scene."""


class MissingEmbeddingError(SceneGrounderError):
    """A node lacks the visual embedding required for classification."""


class LengthMismatchError(SceneGrounderError):
    """Paired prediction/ground-truth sequences differ in length."""


class EmptyGtError(SceneGrounderError):
    """Ground-truth label array is empty."""


class EndpointError(SceneGrounderError):
    """An HTTP model endpoint failed after retries."""
