"""Scribble synthesis, partial losses and Dice benchmarking for 3D label volumes."""
from .scribble_gen import ScribbleConfig, ScribbleGenerator, generate_volume
from .volume_io import LabelVolume, read_nifti, write_nifti

__all__ = ["LabelVolume", "ScribbleConfig", "ScribbleGenerator", "generate_volume", "read_nifti", "write_nifti"]
__version__ = "0.1.0"
