"""Scene model: Gaussians, cameras, SH color and two-view geometry."""

from core.scene.camera import (
    EPS_DEPTH,
    Camera,
    look_at,
    project_point,
    project_points,
    right_pose,
)
from core.scene.gaussians import (
    PARAM_FIELDS,
    Gaussian,
    GaussianCloud,
    covariance_from_rs,
    covariances_from_rs,
    inverse_sigmoid,
    normalize_quaternions,
    quaternion_to_rotation,
    rotation_to_quaternion,
    sh_coeff_count,
    sigmoid,
)
from core.scene.geometry import (
    Observation,
    ReprojectionReport,
    SparsePoint,
    pixel_ray,
    reprojection_error,
    triangulate_two_view,
    triangulation_angle,
)
from core.scene.sh import SH_C0, eval_sh, rgb_to_sh_dc, sh_basis, sh_to_color

__all__ = [
    'EPS_DEPTH',
    'Camera',
    'look_at',
    'project_point',
    'project_points',
    'right_pose',
    'PARAM_FIELDS',
    'Gaussian',
    'GaussianCloud',
    'covariance_from_rs',
    'covariances_from_rs',
    'inverse_sigmoid',
    'normalize_quaternions',
    'quaternion_to_rotation',
    'rotation_to_quaternion',
    'sh_coeff_count',
    'sigmoid',
    'Observation',
    'ReprojectionReport',
    'SparsePoint',
    'pixel_ray',
    'reprojection_error',
    'triangulate_two_view',
    'triangulation_angle',
    'SH_C0',
    'eval_sh',
    'rgb_to_sh_dc',
    'sh_basis',
    'sh_to_color',
]
