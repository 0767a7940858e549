"""terramotion: terrain-adaptive human motion synthesis.

A numpy/scipy-style library covering the full pipeline: procedural
motion and terrain generation, terrain-to-motion fitting with RBF
refinement, goal-centric canonicalization, egocentric scene encoding,
conditional autoregressive motion diffusion with scene-aware inference
guidance, and evaluation metrics.
"""

from .canonical import (
    CanonicalTransform,
    GoalFrame,
    canonicalize_motion,
    decanonicalize_motion,
    goal_frame,
)
from .config import PipelineConfig, load_config, save_config
from .contacts import detect_foot_contacts
from .datagen import ClipRecord, generate_clip
from .dataset import TrainingSample, build_training_set, load_shard, save_shard
from .denoiser import (
    DenoiserConfig,
    TransformerDenoiser,
    load_checkpoint,
    numpy_denoiser,
    save_checkpoint,
)
from .fitting import (
    ContactConstraint,
    FitResult,
    contact_constraints,
    fit_and_refine,
    fit_error,
    optimal_offset,
    patch_search,
    rbf_refine,
)
from .guidance import (
    GuidanceContext,
    GuidanceSpec,
    apply_guidance,
    guidance_collision,
    guidance_phys,
    guidance_smooth,
    no_guidance,
)
from .heightfield import (
    HeightField,
    TerrainPatch,
    extend_edges,
    height_at,
    height_gradient,
    load_hgt,
    mirror_x,
    sample_patch,
    save_hgt,
)
from .kinematics import forward_kinematics
from .metrics import (
    EvalReport,
    contact_distance_metric,
    diversity,
    evaluate_sequences,
    foot_skate,
    goal_error,
    penetration_metric,
)
from .motion import (
    MotionSegment,
    features_from_segment,
    load_motion,
    mirror_segment,
    rest_segment,
    save_motion,
    segment_from_features,
)
from .objects import (
    ObjectEncoding,
    SdfGrid,
    bps_object_encoding,
    bps_points,
    sphere_sdf_grid,
    uv_sphere_mesh,
)
from .pipeline import run_pipeline
from .rollout import RolloutResult, autoregressive_rollout, standing_seed
from .rotations import matrix_to_sixd, sixd_to_matrix
from .sampling import DiffusionCondition, sample_segment
from .schedule import NoiseSchedule, cosine_schedule, forward_noise
from .scene_embedding import SceneEmbedding, sample_scene_embedding
from .skeleton import Skeleton, default_skeleton
from .styles import STYLES, style_codebook
from .terrain_gen import PatchBankParams, generate_patch_bank, generate_terrain
from .terrain_mesh import TriangleMesh, heightfield_to_mesh, save_obj, watertight_report
from .training import TrainConfig, train_denoiser, training_loss, training_loss_numpy

__version__ = "0.1.0"
