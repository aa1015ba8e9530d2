"""Simultaneous spatial confidence regions for combinations of excursion sets.

Given M study conditions sampled over one 2D lattice, the package fits
per-pixel linear models, combines the standardized excursion statistics by
conjunction or disjunction, calibrates a simultaneous threshold with a wild
t-bootstrap along the estimated set boundary, and emits nested region masks
bracketing the true combined set at a chosen confidence level.
"""

from .bootstrap import (
    BootstrapConfig,
    QuantileResult,
    bootstrap_quantile,
    empirical_quantile,
    rademacher_stream,
)
from .errors import (
    ConfigurationError,
    DegenerateBootstrapError,
    DegeneratePixelError,
    DesignError,
    EmptyEstimateError,
    ExcursetError,
    FormatError,
    InvalidParameterError,
    ValidationError,
)
from .excursion import (
    BoundaryPoint,
    BoundarySegmentation,
    CombineSpec,
    StandardizedFields,
    save_boundary_csv,
    segment_boundary,
    standardize,
)
from .field import (
    FieldStack,
    Lattice,
    ScalarField,
    gaussian_smooth,
    load_field_stack,
    load_mask_csv,
    save_field_stack,
    save_mask,
    save_overlay_png,
)
from .glm import DesignSpec, GlmFit, fit, intercept_only_design
from .regions import (
    ConfidenceRegions,
    check_inclusion,
    region_report,
    threshold_regions,
)
from .simharness import (
    CoverageReport,
    SimulationSpec,
    generate_noise,
    generate_signal,
    naive_comparison,
    run_coverage,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
