"""Analytic diffusion kernels on positions and orientations, enhancement and fiber coherence."""

from .convolution import (FodField, KernelTable, build_kernel_table, delta_field, enhance,
                          shift_twist_convolve)
from .fbc import FbcResult, Streamline, Tractogram, fbc, fbc_scores, fiber_density, filter_tractogram
from .kernel import DiffusionParams, Section, asymmetry_sum, kernel_quotient, kernel_two_point
from .lie import RigidMotion, se3_exp, se3_log
from .sphere import GridSpec, SphereSampling, antipodalize, icosphere

__all__ = [
    "DiffusionParams", "FbcResult", "FodField", "GridSpec", "KernelTable", "RigidMotion",
    "Section", "SphereSampling", "Streamline", "Tractogram", "antipodalize", "asymmetry_sum",
    "build_kernel_table", "delta_field", "enhance", "fbc", "fbc_scores", "fiber_density",
    "filter_tractogram", "icosphere", "kernel_quotient", "kernel_two_point", "se3_exp",
    "se3_log", "shift_twist_convolve",
]
