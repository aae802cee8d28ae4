"""Types shared by the coefficient integrals, tables and LUT files."""

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, NamedTuple

from fiber_nlc.core.errors import ParameterError

SUPPORTED_RULES = ("gauss-legendre",)


class CoeffOrder(str, Enum):
    """Which perturbation coefficient a table holds."""

    FO = "fo"
    SO_TERM1 = "so-term1"
    SO_TERM2 = "so-term2"

    @property
    def is_second_order(self) -> bool:
        return self is not CoeffOrder.FO


class CoeffIndex(NamedTuple):
    """Pulse indices of a coefficient; ``k`` is 0 for first-order entries."""

    m: int
    n: int
    k: int = 0

    def swapped(self) -> "CoeffIndex":
        """The index with ``m`` and ``n`` exchanged."""
        return CoeffIndex(self.n, self.m, self.k)


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite quadrature settings.

    Panel counts are per span, so panel edges always include the span
    boundaries where the power profile jumps.
    """

    rule: str = "gauss-legendre"
    order: int = 8
    panels_z: int = 4
    panels_s: int = 4
    rel_tol: float = 1e-6
    max_doublings: int = 5

    def __post_init__(self) -> None:
        if self.rule not in SUPPORTED_RULES:
            raise ParameterError(
                f"Unsupported quadrature rule: {self.rule}. Supported rules: {', '.join(SUPPORTED_RULES)}"
            )
        if self.order < 1:
            raise ParameterError(f"Rule order must be positive, got {self.order}")
        if self.panels_z < 2 or self.panels_s < 2:
            raise ParameterError(
                f"Panel counts must be at least 2, got panels_z={self.panels_z}, panels_s={self.panels_s}"
            )
        if not self.rel_tol > 0:
            raise ParameterError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_doublings < 0:
            raise ParameterError(f"max_doublings must be non-negative, got {self.max_doublings}")

    def doubled(self, times: int = 1) -> "QuadratureSpec":
        """The same rule with panel counts multiplied by ``2**times``."""
        factor = 2**times
        return dataclasses.replace(self, panels_z=self.panels_z * factor, panels_s=self.panels_s * factor)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)
