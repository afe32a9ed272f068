"""Direct three-frame visual odometry.

Estimates the two relative poses of each three-frame snippet by minimising a
photometric plus edge-weighted loss, splices the snippets into a trajectory
and scores it with windowed ATE.
"""

from .camera import Intrinsics, backproject, project, warp_field, warp_jacobian, warp_pixel
from .errors import (
    BehindCameraError,
    DegenerateGeometryError,
    DegenerateInputError,
    DimensionMismatchError,
    FormatError,
    ImageTooSmallError,
    IncompleteInputError,
    InvalidDepthError,
    InvalidRotationError,
    OutOfBoundsError,
    SnippetVOError,
)
from .evaluation import AteReport, Alignment, horn_align, sequence_ate, snippet_ate, svd_align
from .geometry import (
    SE3Pose,
    camera_center,
    euler_to_rotation,
    euler_to_se3,
    quat_multiply,
    quat_rotate,
    quaternion_to_rotation,
    rotation_to_euler,
    rotation_to_quaternion,
    se3_compose,
    se3_inverse,
    se3_to_euler,
    slerp,
)
from .image import bilinear, edge_mask, laplace, sample_bilinear
from .loss import LossBreakdown, LossWeights, Snippet, SnippetObjective, SnippetPoses, total_loss
from .optimizer import OptimizationTrace, OptimizerConfig, PoseParams12, lambda_sweep, loss_gradient, optimize_snippet
from .trajectory import ForwardPosePair, GlobalTrajectory, gather_sequence, snippet_to_forward, splice

__version__ = "0.1.0"
