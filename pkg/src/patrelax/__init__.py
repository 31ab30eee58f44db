"""Photoacoustic reconstruction with relaxed, temporally filtered data fidelities."""
from .errors import PatError
from .experiment import ExperimentConfig, build_setup, reconstruct, run_comparison
from .filters import FilterSpec, build_filter
from .forward import DetectorGeometry, PatForwardModel, Sinogram, TimeGrid
from .image import Image, ImageGrid, make_paper_phantom
from .solver import SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "PatError", "ExperimentConfig", "build_setup", "reconstruct", "run_comparison",
    "FilterSpec", "build_filter", "DetectorGeometry", "PatForwardModel", "Sinogram",
    "TimeGrid", "Image", "ImageGrid", "make_paper_phantom", "SolverConfig", "solve",
]
