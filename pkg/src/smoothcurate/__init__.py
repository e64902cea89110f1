"""Smoothness scoring and curation of robot demonstrations."""
from .alignment import AlignmentPath, EuclideanCost, PoseCost, dtw_exact, fastdtw, ted
from .core import (
    ArmTrack,
    SpeedSignal,
    Trajectory,
    derive_speed_signal,
    from_rotation_vector,
    geodesic_angle,
    make_trajectory,
    to_rotation_vector,
    validate_trajectory,
)
from .curation import (
    ScoreRecord,
    WeightConfig,
    apply_weights,
    calibrate_lambda,
    normalize_scores,
    rank,
    rerank_candidates,
    select_top_k,
    soft_weights,
    weighted_group_loss,
)
from .diagnostics import (
    QualityQuantityInput,
    StateActionSet,
    chunk_noise_floor,
    conditional_action_variance,
    mixture_noise_floor,
    quality_quantity_curve,
    regret_bound,
)
from .envelope import EnvelopeResult, TedConfig, build_reference, greedy_envelope, partition_phases
from .errors import *  # noqa: F401,F403
from .io import emit_report, load_demonstrations, read_scores, write_demonstration, write_scores
from .pipeline import PipelineConfig, load_config, run_oracles, score_all
from .spectral import SalConfig, sal, sal_for_trajectory
from .synth import NoiseSpec, SynthConfig, inject_noise, min_jerk_segment, synth_dataset

__version__ = "0.1.0"
