"""Moment-based separation of a planar measure into a diffuse cloud and point outliers.

The pipeline: power moments -> orthonormal polynomial basis -> Hessenberg
matrix of the shift operator -> truncated commutator traces -> moments of the
uniform-density cloud -> shape reconstruction (rational model of the
exponential transform, or Christoffel-function decay classification).
"""

from .errors import (
    CentroidUndefined,
    CloudSepError,
    DegreeOutOfRange,
    EmptyMeasure,
    FitIllConditioned,
    InfiniteChristoffel,
    NoConvergence,
    NotAMomentMatrix,
    OutsideDomainRequired,
    QuadratureFailure,
    RankDeficient,
)
from .measures import Disk, Ellipse, MeasureSpec, Polygon, SampleCloud
from .moments import ComplexMoments, moments_of_samples, moments_of_spec
from .orthopoly import OrthonormalBasis, cd_kernel, christoffel, orthonormalize
from .hessenberg import HessenbergMatrix, arnoldi_hessenberg, build_hessenberg, perturb
from .traces import (
    CloudMoments,
    TraceEstimate,
    area,
    centroid_integral,
    cloud_moments,
    commutator_trace,
    perturbation_experiment,
)
from .exptransform import (
    ExpTransformSeries,
    QuadratureDomainModel,
    eval_exp_disk,
    eval_exp_series,
    exp_series,
    pade_fit,
    select_order,
)
from .shape import (
    ClassificationGrid,
    classify_grid,
    connected_components,
    estimate_atom_mass,
)
from .pipeline import RunConfig

__version__ = "0.1.0"

__all__ = [
    "CloudSepError",
    "EmptyMeasure",
    "QuadratureFailure",
    "NotAMomentMatrix",
    "RankDeficient",
    "DegreeOutOfRange",
    "InfiniteChristoffel",
    "NoConvergence",
    "CentroidUndefined",
    "FitIllConditioned",
    "OutsideDomainRequired",
    "Disk",
    "Ellipse",
    "Polygon",
    "MeasureSpec",
    "SampleCloud",
    "ComplexMoments",
    "moments_of_spec",
    "moments_of_samples",
    "OrthonormalBasis",
    "orthonormalize",
    "cd_kernel",
    "christoffel",
    "HessenbergMatrix",
    "build_hessenberg",
    "arnoldi_hessenberg",
    "perturb",
    "TraceEstimate",
    "CloudMoments",
    "commutator_trace",
    "cloud_moments",
    "area",
    "centroid_integral",
    "perturbation_experiment",
    "ExpTransformSeries",
    "QuadratureDomainModel",
    "exp_series",
    "eval_exp_series",
    "eval_exp_disk",
    "pade_fit",
    "select_order",
    "ClassificationGrid",
    "classify_grid",
    "connected_components",
    "estimate_atom_mass",
    "RunConfig",
]
