"""Exact equal-mass transport partitions and Wasserstein bounds for a dyadic digital sequence in [0, 1)^d."""

from .geometry import Rect, cut, disjoint, max_sq_dist, volume, within_radius
from .partition import (
    TransportPartition,
    build_partition,
    choose_level,
    drift_schedule,
    verify_drift,
    verify_partition,
)
from .sequence import DigitWord, count_in_cube, cube_rect, point, prefix, word_of
from .transport import (
    obstruction_scan,
    volumetric_lower_winfty,
    w1_exact_1d,
    winfty_exact_1d,
    winfty_oracle_grid,
    winfty_upper,
    wp_upper,
)

__version__ = "0.1.0"

__all__ = [
    "Rect",
    "cut",
    "disjoint",
    "max_sq_dist",
    "volume",
    "within_radius",
    "TransportPartition",
    "build_partition",
    "choose_level",
    "drift_schedule",
    "verify_drift",
    "verify_partition",
    "DigitWord",
    "count_in_cube",
    "cube_rect",
    "point",
    "prefix",
    "word_of",
    "obstruction_scan",
    "volumetric_lower_winfty",
    "w1_exact_1d",
    "winfty_exact_1d",
    "winfty_oracle_grid",
    "winfty_upper",
    "wp_upper",
]
