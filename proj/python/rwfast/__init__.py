"""Spectral random walker segmentation.

Arrays use numpy order: a 2D image has shape (rows, cols) and voxel index
``row * cols + col``.
"""

from ._rwfast import (
    FormatError,
    Image,
    InvalidParam,
    IoError,
    NumericError,
    RwfastError,
    SpectralPack,
    dice,
    hard_labels,
    image_from_array,
    load_image,
    load_pack,
    make_phantom,
    mean_overlap,
    precompute,
    random_walker,
    sample_seeds,
    segment,
)

__version__ = "0.1.0"

__all__ = [
    "FormatError",
    "Image",
    "InvalidParam",
    "IoError",
    "NumericError",
    "RwfastError",
    "SpectralPack",
    "dice",
    "hard_labels",
    "image_from_array",
    "load_image",
    "load_pack",
    "make_phantom",
    "mean_overlap",
    "precompute",
    "random_walker",
    "sample_seeds",
    "segment",
]
