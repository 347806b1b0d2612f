"""Rounded polygonal domains, corner weights and uniform weighted-Sobolev estimates."""

__version__ = "0.1.0"

from .errors import RoundoffError  # noqa: E402
from .geometry import (  # noqa: E402
    Polygon,
    RoundedDomain,
    RoundingParams,
    construct_rounded_domain,
    polygon_validate,
    preset,
    select_default_params,
)
from .weights import EtaProfile, WeightFunction  # noqa: E402

__all__ = [
    "__version__",
    "RoundoffError",
    "Polygon",
    "RoundedDomain",
    "RoundingParams",
    "construct_rounded_domain",
    "polygon_validate",
    "preset",
    "select_default_params",
    "EtaProfile",
    "WeightFunction",
]
