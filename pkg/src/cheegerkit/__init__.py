"""cheegerkit: Cheeger constants of curved tubes and spherical shells.

Three independent routes to the same quantity:

* closed forms -- (d-1)/a for non-overlapping tubes around closed curves
  (curves, tube) and d(R^(d-1)+r^(d-1))/(R^d-r^d) for shells (shell);
* vector-field certificates -- numerical verification of |V| <= 1 and
  div V >= c, which lower-bounds the Cheeger constant (certify);
* a discrete oracle -- Dinkelbach ratio minimization with graph min-cuts
  on voxelized domains, which upper-bounds it from actual cuts (oracle).

The cli module ties them together behind the `cheegerkit` command.
"""

from .curves import (
    ArcLengthTable,
    CurveSpec,
    FrameField,
    arc_length,
    bishop_frame,
    circle,
    curve_from_table,
    ellipse,
    load_curve_table,
    point_at,
    preset,
    tangent_and_curvature,
    trefoil,
)
from .errors import (
    AmbiguousProjectionError,
    CheegerKitError,
    ClosureError,
    ConfigurationError,
    DegenerateCurveError,
    DomainError,
    EmptyDomainError,
    HypothesisViolatedError,
    IntegrationFailureError,
    InvalidGeometryError,
    NonConvergenceError,
    NumericError,
    StencilError,
    TooFewSamplesError,
    UndersampledError,
)
from .tube import (
    OverlapStatus,
    TubeGeometry,
    TubeSpec,
    build_tube,
    check_nonoverlap,
    fermi_map,
    jacobian,
    membership,
    montecarlo_volume,
    nearest_point,
    tube_boundary_area,
    tube_cheeger,
    tube_geometry,
    tube_volume,
    unbounded_segment_upper_bound,
    unit_ball_volume,
)
from .shell import (
    ShellFieldProfile,
    ShellSpec,
    shell_cheeger,
    shell_divergence,
    shell_field,
    shell_perimeter_volume,
    shell_profile,
)
from .certify import (
    Certificate,
    FieldSpec,
    certify_lower_bound,
    load_tabulated_field,
    numeric_divergence,
    save_tabulated_field,
    shell_field_spec,
    tabulated_field_spec,
    tube_field,
    tube_field_spec,
)
from .oracle import (
    CutGraph,
    CutResult,
    VoxelDomain,
    build_cut_graph,
    dinkelbach_cheeger,
    load_mask,
    min_cut,
    rasterize,
    rasterize_ball,
    rasterize_box,
    rasterize_shell,
    rasterize_tube,
    save_cut_svg,
    save_mask,
    subset_perimeter_volume,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # curves
    "CurveSpec",
    "ArcLengthTable",
    "FrameField",
    "circle",
    "ellipse",
    "trefoil",
    "preset",
    "curve_from_table",
    "load_curve_table",
    "arc_length",
    "bishop_frame",
    "point_at",
    "tangent_and_curvature",
    # tube
    "TubeSpec",
    "TubeGeometry",
    "OverlapStatus",
    "build_tube",
    "check_nonoverlap",
    "fermi_map",
    "jacobian",
    "membership",
    "montecarlo_volume",
    "nearest_point",
    "tube_volume",
    "tube_boundary_area",
    "tube_cheeger",
    "tube_geometry",
    "unbounded_segment_upper_bound",
    "unit_ball_volume",
    # shell
    "ShellSpec",
    "ShellFieldProfile",
    "shell_profile",
    "shell_cheeger",
    "shell_perimeter_volume",
    "shell_field",
    "shell_divergence",
    # certify
    "FieldSpec",
    "Certificate",
    "tube_field",
    "tube_field_spec",
    "shell_field_spec",
    "tabulated_field_spec",
    "load_tabulated_field",
    "save_tabulated_field",
    "numeric_divergence",
    "certify_lower_bound",
    # oracle
    "VoxelDomain",
    "CutGraph",
    "CutResult",
    "rasterize",
    "rasterize_tube",
    "rasterize_shell",
    "rasterize_ball",
    "rasterize_box",
    "build_cut_graph",
    "subset_perimeter_volume",
    "min_cut",
    "dinkelbach_cheeger",
    "save_mask",
    "load_mask",
    "save_cut_svg",
    # errors
    "CheegerKitError",
    "DomainError",
    "DegenerateCurveError",
    "ClosureError",
    "NumericError",
    "IntegrationFailureError",
    "InvalidGeometryError",
    "HypothesisViolatedError",
    "AmbiguousProjectionError",
    "TooFewSamplesError",
    "UndersampledError",
    "StencilError",
    "EmptyDomainError",
    "ConfigurationError",
    "NonConvergenceError",
]
