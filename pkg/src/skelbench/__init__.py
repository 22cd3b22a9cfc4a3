"""Medial-axis skeletons, their pixel/point/parametric datasets, and evaluation metrics."""

from .geometry import ShapeError, SkeletonGraph
from .metrics import chamfer, f1_pixel, mbe, msd, parametric_distance
from .parametrize import ParametricSkeleton, parametrize
from .skeletonize import clean_shape, prune, skeletonize, skeletonize_auto

__all__ = [
    "ParametricSkeleton",
    "ShapeError",
    "SkeletonGraph",
    "chamfer",
    "clean_shape",
    "f1_pixel",
    "mbe",
    "msd",
    "parametric_distance",
    "parametrize",
    "prune",
    "skeletonize",
    "skeletonize_auto",
]

__version__ = "0.1.0"
