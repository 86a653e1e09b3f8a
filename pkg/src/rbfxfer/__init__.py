"""Field transfer between unrelated 3D point clouds with rescaled, compactly
supported RBF interpolation, including a determinant-preserving path for
deformation-gradient tensors."""
from .pointcloud import (
    DISPLACEMENT_RADIUS,
    SCALAR_RADIUS,
    TENSOR_RADIUS,
    NeighborIndex,
    PointSet,
    RadiusConfig,
    StructuredGrid,
    adaptive_radii,
    build_index,
    gauss_points,
)
from .sparse import GMRESBreakdown, SolverConfig, SolveStats, csr_from_triplets, gauss_seidel_apply, gmres, spmv
from .rbf import (
    InterpolationError,
    Interpolant,
    PreconditionerError,
    RescaledInterpolant,
    UncoveredDestinationError,
    assemble_eval_gradient,
    assemble_eval_matrix,
    assemble_interp_matrix,
    build_cardinal_preconditioner,
    build_interpolant,
    build_rescaled,
    wendland,
)
from .tensor import (
    CANONICAL_TRIPLET,
    AlignedSVD,
    DegenerateQuaternionError,
    NonPositiveDeterminantError,
    RawSVD,
    align_svd,
    aligned_svd,
    det3,
    quaternion_to_rotation,
    rotation_to_quaternion,
    svd3,
)
from .fieldxfer import (
    MethodKind,
    TensorField,
    TransferOperator,
    build_operator,
    transfer_displacement_gradient,
    transfer_scalar,
    transfer_tensor,
    transfer_tensor_euclidean,
    transfer_tensor_svd,
)

__version__ = "0.1.0"
