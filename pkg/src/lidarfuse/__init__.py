"""Multi-LiDAR extrinsic-uncertainty propagation, fusion and evaluation kernels."""

from .boxes import Box3D, decode_residual, encode_residual, iou_3d, nms, normalize_points
from .perturbation import ThetaPrior, default_theta, inject, sample_perturbation
from .propagation import PerturbationPrior, TaggedPointCloud, propagate_cloud, propagate_point
from .se3 import RigidTransform, so3_exp

__version__ = "0.1.0"

__all__ = [
    "Box3D",
    "PerturbationPrior",
    "RigidTransform",
    "TaggedPointCloud",
    "ThetaPrior",
    "decode_residual",
    "default_theta",
    "encode_residual",
    "inject",
    "iou_3d",
    "nms",
    "normalize_points",
    "propagate_cloud",
    "propagate_point",
    "sample_perturbation",
    "so3_exp",
]
