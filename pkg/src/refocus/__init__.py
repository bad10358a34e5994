"""Hybrid depth-of-field rendering from an image and a disparity map."""

from .aperture import ApertureKernel, build_kernel, cached_kernel, snap_radius
from .classical import blur_radius, render_gather_uniform, render_scatter
from .errormap import (BoundaryField, alpha_beta, boundary_field, color_difference_map,
                       compute_error_map, error_map_improved, error_map_initial)
from .fusion import RenderRequest, RenderResult, focus_from_point, render
from .metrics import loss_arnet, loss_iunet, psnr, ssim
from .multiscale import (CoreConfig, PyramidSchedule, adaptive_factor, build_schedule,
                         iunet_stage, render_core_layered, render_neural)
from .oracle import DatasetSpec, TwoPlaneScene, generate_dataset, generate_scene, render_oracle
from .raster import (ApertureSpec, RenderParams, gamma_decode, gamma_encode, load_disparity,
                     load_image, normalize_disparity, resize_bilinear, save_disparity,
                     save_image, signed_defocus)

__version__ = "0.1.0"
