"""Multi-view point clouds: grid-embedded surface representation, geometric loss,
direct surface fitting and evaluation metrics."""
from .core import (MVPC, PointGridMap, TriangleMesh, ViewCamera, ViewRig, area_weighted_normals,
                   backproject, far_point, make_rig, merge_mvpc_to_mesh, project, triangulate)
from .estimators import MVPCFitter, MVPCSampler
from .exceptions import (EmptyInputError, FitDivergedError, MvpcError, MvpcFormatError,
                         NotAnMvpcFileError, ObjParseError, ShapeMismatchError,
                         TrailingBytesError, UnexpectedEOFError, UnsupportedVersionError)
from .fitter import FitConfig, FitTrace, fit, init_mvpc
from .geoloss import (GeoLoss, GradientField, LossBreakdown, LossWeights, geo_loss,
                      multiview_consistency_loss, point_distance_loss, quasi_volume_loss,
                      visibility_ce_loss)
from .io_formats import read_mvpc, read_obj, write_mvpc, write_obj_mesh, write_ply_points
from .metrics import (VoxelGrid, chamfer, coverage, depth_discontinuity_mask, mvpc_to_points,
                      voxel_iou, voxelize)
from .sampler import OverlapMask, normalize_mesh, overlap_masks, sample_mvpc

__version__ = "0.1.0"
