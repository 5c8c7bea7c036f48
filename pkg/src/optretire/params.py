"""Model constants for dX = (1 + f(X)) dt + A f(X)^alpha dW."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError


class Regime(str, enum.Enum):
    CLASSIC = "classic"  # A = 1, alpha = 1
    GENERAL_LINEAR = "general-linear"  # alpha = 1, A != 1
    POWER_REGULAR = "power-regular"  # 1/2 < alpha < 1
    HALF_CRITICAL = "half-critical"  # alpha = 1/2
    DEGENERATE = "degenerate"  # alpha < 1/2


# regimes with a finite value function served by gsolve
VALUE_REGIMES = frozenset(
    {Regime.CLASSIC, Regime.GENERAL_LINEAR, Regime.POWER_REGULAR, Regime.HALF_CRITICAL}
)
# regimes where the optimal Markov control exists
CONTROL_REGIMES = frozenset({Regime.CLASSIC, Regime.GENERAL_LINEAR, Regime.POWER_REGULAR})


@dataclass(frozen=True)
class ModelParams:
    """Diffusion scale ``A``, exponent ``alpha`` and retirement target ``M``.

    ``alpha > 1`` is rejected: no solution theory is available there.
    """

    A: float = 1.0
    alpha: float = 1.0
    M: float = 10.0

    def __post_init__(self):
        for name in ("A", "alpha", "M"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.alpha > 1.0:
            raise DomainError(f"alpha = {self.alpha} > 1 is outside the analysed range (0, 1]")

    def regime(self) -> Regime:
        if self.alpha == 1.0:
            return Regime.CLASSIC if self.A == 1.0 else Regime.GENERAL_LINEAR
        if self.alpha == 0.5:
            return Regime.HALF_CRITICAL
        if self.alpha > 0.5:
            return Regime.POWER_REGULAR
        return Regime.DEGENERATE

    @property
    def rate(self) -> float:
        """Right-hand constant of the g-ODE, (1 - 1/(2 alpha))^(2 alpha - 1) / (alpha A^2).

        Equals 1/(2 A^2) at alpha = 1 and 2/A^2 at alpha = 1/2 (0^0 = 1).
        """
        a = self.alpha
        return (1.0 - 1.0 / (2.0 * a)) ** (2.0 * a - 1.0) / (a * self.A**2)

    def as_dict(self) -> dict:
        return {"A": self.A, "alpha": self.alpha, "M": self.M}
