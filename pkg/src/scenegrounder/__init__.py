"""Object-centric 3D mapping and scene-graph grounding from posed RGB-D data.

The pipeline has four stages, each usable on its own:

1. :mod:`~scenegrounder.ingest` / :mod:`~scenegrounder.objectmap` — lift 2D
   mask proposals into world-frame detections and associate them into
   persistent objects;
2. :mod:`~scenegrounder.views` — pick each object's best 2D view by clustered
   raycasting;
3. :mod:`~scenegrounder.graph` — describe objects as graph nodes and compute
   metric + semantic spatial edges;
4. :mod:`~scenegrounder.reasoner` — ground natural-language queries with a
   two-stage deductive LLM protocol (:mod:`~scenegrounder.classify` offers the
   embedding-similarity alternative).
"""

from .geometry import CameraIntrinsics, Frame, Pose, project_mask_to_points
from .ingest import Detection, FilterConfig, dbscan_denoise, filter_proposals, pool_descriptor
from .objectmap import (
    AssociationConfig,
    MapObject,
    ObjectMap,
    associate,
    candidate_objects,
    integrate_frame,
    merge_detection,
    periodic_merge,
    postprocess,
    spatial_overlap,
)
from .views import BestView, best_view, cluster_viewpoints, raycast_mask
from .graph import (
    Edge,
    SceneNode,
    SemanticTriple,
    load_scene_graph,
    metric_relation,
    relation_sentence,
    room_center,
    save_scene_graph,
    semantic_relation,
)
from .reasoner import (
    GroundingAnswer,
    PromptTemplates,
    RelatedObjectEntry,
    StageOneResult,
    build_related_objects,
    ground,
    repair_json,
    stage_one_select,
    stage_two_ground,
)
from .llm import HttpEndpoint, MockEndpoint, ReplayEndpoint
from .classify import ClassifiedObject, classify_objects, label_point_cloud
from .metrics import (
    Aabb3,
    GroundingCase,
    grounding_accuracy,
    iou_aabb,
    recall_at_1,
    semseg_metrics,
)
from .pipeline import RunManifest, map_sequence

__version__ = "0.1.0"
