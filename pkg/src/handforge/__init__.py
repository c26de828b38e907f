"""handforge: domain-randomized synthetic dataset forge, detection math kit,
training orchestrator and segmentation evaluation suite for egocentric
robot-hand segmentation."""

__version__ = "0.1.0"

from .detection import (
    Anchor,
    AnchorLabel,
    Delta,
    LossBreakdown,
    RoiSamplingConfig,
    cross_entropy,
    decode_deltas,
    encode_deltas,
    generate_anchors,
    huber,
    iou_box,
    label_anchors,
    mask_loss,
    sample_rois,
    total_loss,
)
from .errors import HandforgeError
from .evaluate import MetricReport, PixelConfusion, confusion, evaluate_dataset, metrics
from .geometry import (
    Camera,
    HandPose,
    JointLimits,
    PartLabel,
    Pose,
    ShapeKind,
    ShapeSpec,
    Spotlight,
    TriangleMesh,
    build_hand_arm,
    build_primitive,
    project,
)
from .masks import BBox, bbox_from_mask, mask_from_instance
from .meshio import parse_mesh_file, serialize_mesh
from .noise import PerlinParams, perlin
from .randomize import (
    DatasetPreset,
    PerlinTexture,
    RandomizationConfig,
    RealImage,
    SceneDescription,
    SolidColor,
    sample_distractors,
    sample_hand_pose,
    sample_scene,
)
from .render import RenderOutput, composite_over, render
from .train import (
    Checkpoint,
    EarlyStopConfig,
    LineSearchConfig,
    PixelSegmenter,
    TrainableModel,
    fit,
    line_search_lr,
)
