"""Investment policies and their closed-form expected retirement times."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StrategyParseError, UnattainableError, UnsupportedRegimeError
from .gsolve import GFunction
from .params import CONTROL_REGIMES, ModelParams

SOFT_REFLECT = "soft-reflect"
RUIN = "ruin"


class Strategy:
    """Markov policy x -> f(x) >= 0 (amount invested at fortune x)."""

    default_clamp = SOFT_REFLECT
    noiseless = False  # True when f is identically 0, so no variates are needed

    def evaluate(self, x):
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def __str__(self):
        return self.to_text()


@dataclass(frozen=True)
class Zero(Strategy):
    """Invest nothing and save the salary."""

    noiseless = True

    def evaluate(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def to_text(self):
        return "zero"


@dataclass(frozen=True)
class Constant(Strategy):
    c: float
    default_clamp = RUIN  # f(0) > 0: the ruin rule applies

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"Constant strategy needs c > 0, got {self.c!r}")

    def evaluate(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.c)

    def to_text(self):
        return f"const:{self.c!r}"


@dataclass(frozen=True)
class Threshold(Strategy):
    """Invest 0 on [0, eps] and c above eps."""

    eps: float
    c: float

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise DomainError(f"Threshold needs eps > 0, got {self.eps!r}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"Threshold needs c > 0, got {self.c!r}")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > self.eps, self.c, 0.0)

    def to_text(self):
        return f"threshold:{self.eps!r},{self.c!r}"


@dataclass(frozen=True, eq=False)
class Optimal(Strategy):
    """f0 read off a tabulated GFunction."""

    gfun: GFunction

    def __post_init__(self):
        regime = self.gfun.params.regime()
        if regime not in CONTROL_REGIMES:
            raise UnsupportedRegimeError(f"no optimal control in regime {regime.value}")

    def evaluate(self, x):
        return self.gfun.f0(x)

    def to_text(self):
        return "optimal"


def parse_strategy(text: str, params: ModelParams | None = None, grid: int = 2001) -> Strategy:
    """Parse "zero", "const:C", "threshold:EPS,C" or "optimal".

    ``params`` is needed for "optimal" (to tabulate g) and is used to check
    eps < M for thresholds.
    """
    t = text.strip().lower()
    try:
        if t == "zero":
            return Zero()
        if t == "optimal":
            if params is None:
                raise StrategyParseError("'optimal' needs model parameters")
            return Optimal(GFunction.build(params, n=grid))
        kind, _, arg = t.partition(":")
        if kind in ("const", "constant"):
            return Constant(float(arg))
        if kind == "threshold":
            eps_s, c_s = arg.split(",")
            s = Threshold(float(eps_s), float(c_s))
            if params is not None and not s.eps < params.M:
                raise DomainError(f"threshold eps={s.eps} must be below M={params.M}")
            return s
    except StrategyParseError:
        raise
    except UnsupportedRegimeError:
        raise
    except (ValueError, TypeError) as exc:
        raise StrategyParseError(f"cannot parse strategy {text!r}: {exc}") from exc
    raise StrategyParseError(f"unknown strategy {text!r}; expected zero, const:C, threshold:EPS,C or optimal")


# ---------------------------------------------------------------------------
# closed forms


def expected_time_zero(x: float, M: float) -> float:
    if not 0.0 <= x <= M:
        raise DomainError(f"x = {x} outside [0, M={M}]")
    return M - x


@dataclass(frozen=True)
class ThresholdConstants:
    A_prime: float
    D: float
    k: float


def _check_threshold(eps, c, alpha, M):
    if not (0.0 < eps < M):
        raise DomainError(f"need 0 < eps < M, got eps={eps}, M={M}")
    if not c > 0:
        raise DomainError(f"need c > 0, got {c}")
    if not alpha > 0:
        raise DomainError(f"need alpha > 0, got {alpha}")


def _threshold_parts(eps, c, alpha, M):
    k = 2.0 * (1.0 + c) / c ** (2.0 * alpha)
    # A' e^{-k eps}: slope matching c/(1+c) = k A' e^{-k eps}
    a_eps = c ** (2.0 * alpha + 1.0) / (2.0 * (1.0 + c) ** 2)
    D = eps + (M - eps) / (1.0 + c) + a_eps * -math.expm1(-k * (M - eps))
    return k, a_eps, D


def threshold_constants(eps: float, c: float, alpha: float, M: float) -> ThresholdConstants:
    """A', D and the decay rate k of the threshold-strategy expected time (A = 1)."""
    _check_threshold(eps, c, alpha, M)
    k, a_eps, D = _threshold_parts(eps, c, alpha, M)
    try:
        A_prime = a_eps * math.exp(k * eps)
    except OverflowError:
        A_prime = math.inf
    return ThresholdConstants(A_prime, D, k)


def expected_time_threshold(x: float, eps: float, c: float, alpha: float, M: float) -> float:
    """E_x[tau_M] for the policy f = 0 on [0, eps], f = c above (A = 1).

    D - x on [0, eps]; (M - x)/(1+c) + A'(e^{-kx} - e^{-kM}) on [eps, M], with
    A' from C^1 matching at eps and D from continuity there.
    """
    _check_threshold(eps, c, alpha, M)
    if not 0.0 <= x <= M:
        raise DomainError(f"x = {x} outside [0, M={M}]")
    k, a_eps, D = _threshold_parts(eps, c, alpha, M)
    if x <= eps:
        return D - x
    # A'(e^{-kx} - e^{-kM}) written relative to eps to avoid overflow
    return (M - x) / (1.0 + c) + a_eps * math.exp(-k * (x - eps)) * -math.expm1(-k * (M - x))


def fast_retirement_sequence(per_decade: int = 8, c_min: float = 10.0, c_max: float = 1e12):
    """Geometric grid of investment levels c searched by fast_retirement_params."""
    j_lo = round(per_decade * math.log10(c_min))
    j_hi = round(per_decade * math.log10(c_max))
    return [10.0 ** (j / per_decade) for j in range(j_lo, j_hi + 1)]


def fast_retirement_params(alpha: float, target: float, M: float, per_decade: int = 8):
    """Smallest c on a geometric grid with eps = 1/(1+c) and E_0[tau_M] <= target.

    Only valid for alpha < 1/2, where the expected time tends to 0 as c grows.
    """
    if not 0.0 < alpha < 0.5:
        raise UnsupportedRegimeError(f"fast retirement needs 0 < alpha < 1/2, got {alpha}")
    if not target > 0:
        raise DomainError("target must be positive")
    if not M > 0:
        raise DomainError("M must be positive")
    best = math.inf
    for c in fast_retirement_sequence(per_decade):
        eps = 1.0 / (1.0 + c)
        if not eps < M:
            continue
        k = 2.0 * (1.0 + c) / c ** (2.0 * alpha)
        if not math.isfinite(math.exp(min(k * eps, 700.0))) or k * eps > 700.0:
            break
        t = expected_time_threshold(0.0, eps, c, alpha, M)
        best = min(best, t)
        if t <= target:
            return eps, c
    raise UnattainableError(f"no c up to 1e12 reaches target {target}; best {best:.6g}", best)
