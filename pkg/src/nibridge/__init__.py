"""Non-intersecting Brownian bridges: samplers, free convolution, limit shapes and bulk statistics."""

from .densitymatch import DensityMatchError, DensityMatchSpec, construct_matching_density
from .freeconv import (FreeConvolutionError, FreeConvolutionResult, GriddedMeasure,
                       classical_locations, free_convolve_semicircle, hilbert_transform,
                       stieltjes)
from .jets import JetProfile, consistent_extension, jet_v
from .limitshape import (HeightGrid, ShapeGrid, SolverError, complex_slope, residual_G,
                         residual_H, solve_G_dirichlet)
from .sampling import (BoundaryData, DbmState, GlauberChain, PathEnsemble, TimeGrid,
                       dbm_euler, dbm_matrix, glauber_step, height_function,
                       sample_constrained_ensemble, sample_watermelon_gue)
from .statistics import (RescaledSample, empirical_correlation, rescale_bulk,
                         sine_correlation, sine_kernel)

__version__ = "0.1.0"

__all__ = [
    "BoundaryData", "DbmState", "DensityMatchError", "DensityMatchSpec", "FreeConvolutionError",
    "FreeConvolutionResult", "GlauberChain", "GriddedMeasure", "HeightGrid", "JetProfile",
    "PathEnsemble", "RescaledSample", "ShapeGrid", "SolverError", "TimeGrid",
    "classical_locations", "complex_slope", "consistent_extension", "construct_matching_density",
    "dbm_euler", "dbm_matrix", "empirical_correlation", "free_convolve_semicircle",
    "glauber_step", "height_function", "hilbert_transform", "jet_v", "rescale_bulk",
    "residual_G", "residual_H", "sample_constrained_ensemble", "sample_watermelon_gue",
    "sine_correlation", "sine_kernel", "solve_G_dirichlet", "stieltjes",
]
