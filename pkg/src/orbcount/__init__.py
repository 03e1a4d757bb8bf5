"""Higher-rank orbit counting for matrix groups in products of SL(d, R)."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    ConvergenceError,
    InsufficientDataError,
    NotProximalError,
    NumericDomainError,
    OrbcountError,
    ResourceError,
    TransversalityError,
    UnsupportedError,
)
from .lie_sl import (  # noqa: E402
    ChamberVector,
    GroupElement,
    LinearForm,
    busemann_iwasawa,
    cartan_projection,
    direct_sum,
    jordan_projection,
    opposition_involution,
)
from .flags import (  # noqa: E402
    Flag,
    act,
    attracting_flag,
    busemann_weights,
    cocycle_period,
    exterior_power,
    gromov_product,
    is_transverse,
    limit_flag,
    opposite_standard_flag,
    standard_flag,
)

__all__ = [
    "__version__",
    "ChamberVector", "GroupElement", "LinearForm", "Flag",
    "cartan_projection", "jordan_projection", "opposition_involution", "busemann_iwasawa", "direct_sum",
    "act", "attracting_flag", "busemann_weights", "cocycle_period", "exterior_power", "gromov_product",
    "is_transverse", "limit_flag", "standard_flag", "opposite_standard_flag",
    "OrbcountError", "NumericDomainError", "ConfigurationError", "NotProximalError", "TransversalityError",
    "InsufficientDataError", "ConvergenceError", "UnsupportedError", "ResourceError",
]
