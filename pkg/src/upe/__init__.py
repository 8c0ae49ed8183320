"""Unconditional quantile effects of location, scale and simultaneous covariate shifts."""
from .cdf_model import BasisSpec, FittedCdfModel, build_design, fit_binary_link
from .data import Dataset, ingest_csv
from .effects import (
    EffectEstimate,
    PolicySpec,
    elasticity,
    estimate_location_scale,
    estimate_simultaneous,
    fit_tau,
)
from .inference import effect_confidence_intervals, influence_rows, scale_effect_ttest
from .kernels import BACKEND
from .numerics import KernelSpec, LinkKind, kde_at, sample_quantile, silverman_bandwidth
from .oracle import NormalLinearDgp, brute_force_effect, closed_form_effects, stein_check

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BasisSpec",
    "Dataset",
    "EffectEstimate",
    "FittedCdfModel",
    "KernelSpec",
    "LinkKind",
    "NormalLinearDgp",
    "PolicySpec",
    "brute_force_effect",
    "build_design",
    "closed_form_effects",
    "effect_confidence_intervals",
    "elasticity",
    "estimate_location_scale",
    "estimate_simultaneous",
    "fit_binary_link",
    "fit_tau",
    "influence_rows",
    "ingest_csv",
    "kde_at",
    "sample_quantile",
    "scale_effect_ttest",
    "silverman_bandwidth",
    "stein_check",
]
