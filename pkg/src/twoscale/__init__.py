"""Two-scale truncated wavelet-frame regularisation: frames, scenes, transform, energy and solver."""

from .frames import FilterBank, FrameSystem, build_frame_system, frame_system, named_bank, verify_uep
from .scene import LatticeImage, Scene, disk_scene, halfplane_scene, make_scene, sample, sinusoid_scene
from .transform import ModelParams, TwoScaleField, analyze, two_scale
from .energy import OperatorSpec, apply_operator, fidelity_energy, regularity_energy, total_energy
from .solver import SolverParams, restore
from .kernels import available_backends, get_backend, set_backend

__version__ = "0.1.0"

__all__ = [
    "FilterBank", "FrameSystem", "build_frame_system", "frame_system", "named_bank", "verify_uep",
    "LatticeImage", "Scene", "disk_scene", "halfplane_scene", "make_scene", "sample", "sinusoid_scene",
    "ModelParams", "TwoScaleField", "analyze", "two_scale",
    "OperatorSpec", "apply_operator", "fidelity_energy", "regularity_energy", "total_energy",
    "SolverParams", "restore",
    "available_backends", "get_backend", "set_backend",
]
