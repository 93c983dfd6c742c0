"""Relative camera pose toolkit.

Quaternions are (w, x, y, z), Hamilton product, with canonical form w >= 0.
Absolute poses are world->camera projections: x_cam = R x_world + t. The
relative pose of frame 2 with respect to frame 1 composes as T2 * T1^-1.
"""

from .colmap import (ColmapCameraRecord, ColmapImageRecord,
                     parse_colmap_cameras, parse_colmap_images)
from .datafiles import (DatasetPoseRecord, EpilineRecord, KeypointRecord,
                        PairRecord, PredictionRecord, parse_landmark_poses,
                        read_pairs_csv, read_pose_csv, write_pairs_csv,
                        write_pose_csv)
from .epipolar import (CameraIntrinsics, EpipolarLine, approx_intrinsics,
                       epiline_report, epipolar_line, fundamental_from_pose,
                       intrinsics_from_colmap_camera, skew)
from .errors import (DegenerateLine, DegenerateQuaternion,
                     DegenerateTranslation, InputError, InvariantViolation,
                     ParseError, RelposeError)
from .evaluation import (BoxStats, CdfSeries, ErrorSample, box_stats, cdf,
                         median_errors, percent_change, render_report, score)
from .nn import PoseMlp, forward, init_model, loss_and_gradients, pose_loss, predict
from .pairing import PairingConfig, generate_pairs, make_label_sets, mirror_pairs
from .poses import (AbsolutePose, RelativePose, RigidTransform, relative_pose,
                    rotation_error_deg, translation_error_m)
from .regressor import (PairDataset, RelativePoseRegressor, TrainConfig,
                        load_checkpoint, save_checkpoint, train_one_stage,
                        train_two_stage)
from .rotations import (quat_canonical, quat_conjugate, quat_multiply,
                        quat_normalize, quat_to_rotmat, rotmat_to_quat)
from .synthetic import SyntheticPairSet, make_synthetic, split_pair_set
from .trajectory import (apply_rereference, colmap_trajectory_translation,
                         consecutive_relative, first_frame_transform,
                         rereference_trajectory)

__version__ = "0.1.0"

__all__ = [
    "AbsolutePose", "BoxStats", "CameraIntrinsics", "CdfSeries",
    "ColmapCameraRecord", "ColmapImageRecord", "DatasetPoseRecord",
    "DegenerateLine", "DegenerateQuaternion", "DegenerateTranslation",
    "EpilineRecord", "EpipolarLine", "ErrorSample", "InputError",
    "InvariantViolation", "KeypointRecord", "PairDataset", "PairRecord",
    "PairingConfig", "ParseError", "PoseMlp", "PredictionRecord",
    "RelativePose", "RelativePoseRegressor", "RelposeError", "RigidTransform",
    "SyntheticPairSet", "TrainConfig",
    "approx_intrinsics", "apply_rereference", "box_stats", "cdf",
    "colmap_trajectory_translation", "consecutive_relative", "epiline_report",
    "epipolar_line", "first_frame_transform", "forward",
    "fundamental_from_pose", "generate_pairs", "init_model",
    "intrinsics_from_colmap_camera", "load_checkpoint", "loss_and_gradients",
    "make_label_sets", "make_synthetic", "median_errors", "mirror_pairs",
    "parse_colmap_cameras", "parse_colmap_images", "parse_landmark_poses",
    "percent_change", "pose_loss", "predict", "quat_canonical",
    "quat_conjugate", "quat_multiply", "quat_normalize", "quat_to_rotmat",
    "read_pairs_csv", "read_pose_csv", "relative_pose", "render_report",
    "rereference_trajectory", "rotation_error_deg", "rotmat_to_quat",
    "save_checkpoint", "score", "skew", "split_pair_set", "train_one_stage",
    "train_two_stage", "translation_error_m", "write_pairs_csv",
    "write_pose_csv",
]
