"""Expand-and-sparsify density and mode estimation on the unit sphere."""

__version__ = "0.1.0"

from . import _kernels

_kernels.configure_workers()

from .baselines import KdeModel, KnnModel, kde_density, knn_density  # noqa: E402
from .eas import (  # noqa: E402
    EasModel,
    ProjectionBank,
    encode,
    encode_batch,
    evaluate,
    evaluate_batch,
    fit,
    load_model,
    make_bank,
    region_diagnostics,
    save_model,
)
from .evaluation import etv, rate_experiment, select_eas_k, select_kde_bandwidth, select_knn_k  # noqa: E402
from .modes import connected_components, recover_modes, single_mode  # noqa: E402
from .sphere import cap_mass, cap_radius, cap_volume, sample_uniform, surface_area  # noqa: E402
from .vmf import VmfComponent, VmfMixture, mean_pair, vmf_pdf, vmf_sample  # noqa: E402

__all__ = [
    "EasModel", "KdeModel", "KnnModel", "ProjectionBank", "VmfComponent", "VmfMixture",
    "cap_mass", "cap_radius", "cap_volume", "connected_components", "encode", "encode_batch", "etv",
    "evaluate", "evaluate_batch", "fit", "kde_density", "knn_density", "load_model", "make_bank",
    "mean_pair", "rate_experiment", "recover_modes", "region_diagnostics", "sample_uniform",
    "save_model", "select_eas_k", "select_kde_bandwidth", "select_knn_k", "single_mode",
    "surface_area", "vmf_pdf", "vmf_sample",
]
