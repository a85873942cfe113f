"""Matching and security evaluation for images of randomly collapsed resist nanostructures."""

from .clone import CloneParams, make_virtual_clone, tile_physical_size
from .image import (
    PixelScale,
    center_crop,
    frame_average,
    load_pgm,
    median_filter,
    preprocess,
    read_pgm,
    save_pgm,
    write_pgm,
)
from .similarity import MatchParams, SimilarityScore, build_mask, masked_pearson, shifted_similarity

__version__ = "0.1.0"
