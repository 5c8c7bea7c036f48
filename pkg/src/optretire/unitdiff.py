"""Unit-diffusion change of variables.

A diffusion dY = a(Y) dt + b(Y) dW is written as Y = G(X) where X solves
dX = A(X) dt + dW. G is the inverse of B(y) = int du / b(u), so G' = b(G), and

    A(x) = (a(G(x)) - b'(G(x)) G'(x) / 2) / b(G(x)) = a(y)/b(y) - b'(y)/2.

Because G maps into the state space of Y, a nonnegative G certifies that Y
stays nonnegative.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from . import rng
from .errors import CertificateError, DomainError, TransformError
from .gsolve import GFunction
from .params import CONTROL_REGIMES


@dataclass(frozen=True)
class DiffusionSpec:
    """Coefficients (a, b) on a finite closed ``domain``; b > 0 inside it."""

    a: Callable[[float], float]
    b: Callable[[float], float]
    domain: tuple[float, float]
    b_prime: Callable[[float], float] | None = None

    def __post_init__(self):
        lo, hi = self.domain
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DomainError(f"domain must be a finite interval, got {self.domain!r}")


class BoundaryClass(str, enum.Enum):
    NEVER_HITS_ZERO = "never-hits-zero"
    SOFT_REFLECTION = "soft-reflection"
    UNDEFINED_AFTER_ZERO = "undefined-after-zero"


def classify_sqrt_boundary(c: float, rtol: float = 0.0) -> BoundaryClass:
    """Behaviour at 0 of the unit diffusion built from dY = dt + c sqrt|Y| dW.

    The transformed drift 2(1 - c^2/4)/(c^2 x) is singular at 0 unless c = 2.
    ``rtol`` widens the c = 2 class for numerically estimated coefficients.
    """
    if not c > 0:
        raise DomainError(f"c must be positive, got {c!r}")
    if abs(c - 2.0) <= 2.0 * rtol:
        return BoundaryClass.SOFT_REFLECTION
    return BoundaryClass.NEVER_HITS_ZERO if c < 2.0 else BoundaryClass.UNDEFINED_AFTER_ZERO


def _quad(func, lo, hi, tol):
    val, _ = integrate.quad(func, lo, hi, epsabs=tol, epsrel=1e-13, limit=500)
    return val


@dataclass(frozen=True, eq=False)
class UnitTransform:
    """B, its inverse ``g_map`` and the unit-diffusion drift ``A_drift``.

    ``y_lo``/``y_hi`` bound the state interval actually mapped; they equal the
    domain ends only where 1/b is integrable and an ``origin`` was requested
    there, otherwise they sit ``delta`` inside.
    """

    spec: DiffusionSpec
    anchor: float
    offset: float
    y_lo: float
    y_hi: float
    delta: float
    tol: float
    _ys: np.ndarray = field(repr=False)
    _xs: np.ndarray = field(repr=False)

    def _inv_b(self, u):
        return 1.0 / self.spec.b(u)

    def B(self, y: float) -> float:
        if not self.y_lo <= y <= self.y_hi:
            raise DomainError(f"y = {y} outside the mapped interval [{self.y_lo}, {self.y_hi}]")
        return self.offset + _quad(self._inv_b, self.anchor, y, self.tol)

    @property
    def x_range(self) -> tuple[float, float]:
        return float(self._xs[0]), float(self._xs[-1])

    def g_map(self, x: float) -> float:
        """Inverse of B by safeguarded Newton (B' = 1/b) on a tabulated bracket."""
        x_lo, x_hi = self.x_range
        if not x_lo - 1e-12 <= x <= x_hi + 1e-12:
            raise DomainError(f"x = {x} outside the image [{x_lo}, {x_hi}]")
        i = int(np.clip(np.searchsorted(self._xs, x) - 1, 0, self._xs.size - 2))
        lo, hi = float(self._ys[i]), float(self._ys[i + 1])
        xl, xh = float(self._xs[i]), float(self._xs[i + 1])
        y = lo + (hi - lo) * (x - xl) / (xh - xl) if xh > xl else lo
        for _ in range(100):
            r = self.B(y) - x
            if r == 0.0:
                return y
            if r < 0:
                lo = y
            else:
                hi = y
            y_new = y - r * self.spec.b(y)
            if not lo < y_new < hi:
                y_new = 0.5 * (lo + hi)
            if abs(y_new - y) <= 1e-15 * max(1.0, abs(y)) or hi - lo <= 1e-15 * max(1.0, abs(y)):
                return y_new
            y = y_new
        raise TransformError(f"g_map did not converge at x = {x}")

    def b_prime(self, y: float) -> float:
        if self.spec.b_prime is not None:
            return self.spec.b_prime(y)
        h = max(1e-6, 1e-6 * abs(y))
        lo, hi = max(y - h, self.spec.domain[0]), min(y + h, self.spec.domain[1])
        return (self.spec.b(hi) - self.spec.b(lo)) / (hi - lo)

    def drift_at_state(self, y: float) -> float:
        return self.spec.a(y) / self.spec.b(y) - 0.5 * self.b_prime(y)

    def A_drift(self, x: float) -> float:
        return self.drift_at_state(self.g_map(x))

    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes (x, y) with x = B(y), for vectorised interpolation of g_map."""
        return self._xs.copy(), self._ys.copy()

    def tabulate(self) -> dict:
        ys, xs = self._ys, self._xs
        with np.errstate(divide="ignore", invalid="ignore"):
            A = np.array([self.drift_at_state(float(y)) if self.spec.b(float(y)) > 0 else math.nan for y in ys])
        return {"x": xs.copy(), "g_map": ys.copy(), "A_drift": A}

    def to_csv(self) -> str:
        t = self.tabulate()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "g_map", "A_drift"])
        for row in zip(t["x"], t["g_map"], t["A_drift"]):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _check_endpoint_integrable(inv_b, anchor, end, width, tol):
    """Raise unless int_anchor^end 1/b stays bounded as the end is approached."""
    side = 1.0 if end > anchor else -1.0
    vals = []
    with warnings.catch_warnings():
        # a divergent integral is expected to trip QUADPACK here
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for k in range(2, 14, 2):
            point = end - side * width * 10.0**-k
            vals.append(_quad(inv_b, anchor, point, tol))
    inc = np.abs(np.diff(vals))
    # an integrable algebraic singularity gives geometrically shrinking increments
    if not (np.all(np.isfinite(vals)) and inc[-1] < 0.5 * inc[0] and inc[-1] < 1e-2 * max(1.0, abs(vals[-1]))):
        raise TransformError(f"1/b is not integrable at the domain endpoint {end}")


def build_transform(
    spec: DiffusionSpec,
    anchor: float | None = None,
    tol: float = 1e-12,
    delta: float | None = None,
    origin: float | None = None,
    nodes: int = 801,
) -> UnitTransform:
    """Construct the unit-diffusion transform of ``spec``.

    B is anchored at ``anchor`` (default: domain midpoint). When ``origin`` is
    given, B is shifted so that B(origin) = 0; an ``origin`` at a domain end
    requires 1/b to be integrable there.
    """
    lo, hi = spec.domain
    width = hi - lo
    delta = 1e-6 * width if delta is None else float(delta)
    anchor = 0.5 * (lo + hi) if anchor is None else float(anchor)
    if not lo < anchor < hi:
        raise DomainError(f"anchor {anchor} must lie inside {spec.domain}")
    probe = np.linspace(lo + delta, hi - delta, 257)
    bvals = np.array([spec.b(float(y)) for y in probe])
    if not np.all(bvals > 0):
        bad = float(probe[np.argmin(bvals)])
        raise TransformError(f"b must be positive on the domain interior; b({bad}) = {spec.b(bad)}")

    def inv_b(u):
        return 1.0 / spec.b(u)

    y_lo, y_hi = lo + delta, hi - delta
    offset = 0.0
    if origin is not None:
        if not lo <= origin <= hi:
            raise DomainError(f"origin {origin} outside {spec.domain}")
        for end in (lo, hi):
            if origin == end:
                _check_endpoint_integrable(inv_b, anchor, end, width, tol)
        if origin == lo:
            y_lo = lo
        if origin == hi:
            y_hi = hi
        offset = -_quad(inv_b, anchor, origin, tol)

    # nodes uniform in y plus geometric refinement towards both ends
    geo = np.geomspace(delta, 0.05 * width, nodes // 4)
    ys = np.unique(np.concatenate([np.linspace(y_lo, y_hi, nodes), y_lo + geo, y_hi - geo]))
    ys = ys[(ys >= y_lo) & (ys <= y_hi)]
    for point in (anchor, origin):
        if point is not None and point not in ys:
            ys = np.insert(ys, int(np.searchsorted(ys, point)), point)
    seg = np.array([_quad(inv_b, float(ys[i]), float(ys[i + 1]), tol) for i in range(ys.size - 1)])
    xs = np.concatenate([[0.0], np.cumsum(seg)])
    ref = origin if origin is not None else anchor
    xs = xs - xs[int(np.searchsorted(ys, ref))]  # exact zero at the reference point
    if origin is None:
        xs = xs + offset
    if not np.all(np.diff(xs) > 0):
        raise TransformError("B is not strictly increasing on the tabulated nodes")
    ys.setflags(write=False)
    xs.setflags(write=False)
    return UnitTransform(spec, anchor, offset, float(y_lo), float(y_hi), delta, tol, ys, xs)


def sqrt_spec(c: float, y_max: float = 25.0) -> DiffusionSpec:
    """dY = dt + c sqrt(Y) dW on [0, y_max], with analytic b'."""
    return DiffusionSpec(
        a=lambda y: 1.0,
        b=lambda y: c * math.sqrt(abs(y)),
        domain=(0.0, y_max),
        b_prime=lambda y: 0.5 * c / math.sqrt(abs(y)),
    )


def sqrt_closed_forms(c: float):
    """B(y), G(x) and A(x) for the c sqrt|y| family, anchored at B(0) = 0."""

    def B(y):
        return 2.0 / c * math.sqrt(abs(y)) * math.copysign(1.0, y)

    def G(x):
        return c * c * x * x / 4.0 * math.copysign(1.0, x)

    def A(x):
        return 2.0 * (1.0 - c * c / 4.0 * math.copysign(1.0, x)) / (c * c * abs(x))

    return B, G, A


# ---------------------------------------------------------------------------
# certificate for the optimally controlled process


@dataclass(frozen=True)
class Certificate:
    lower_bound: float  # smallest state reached by g_map over the image
    upper_bound: float
    truncation: float  # delta cut off the domain end(s) where b vanishes
    nonnegative: bool
    sqrt_coefficient: float  # lim b(y)/sqrt(y) as y -> 0
    boundary_class: BoundaryClass


def optimal_diffusion_spec(gfun: GFunction) -> DiffusionSpec:
    """a = 1 + f0, b = A f0^alpha on [0, M] for a tabulated optimal control."""
    params = gfun.params
    if params.regime() not in CONTROL_REGIMES:
        raise CertificateError(f"no optimal control in regime {params.regime().value}")
    A, alpha, rate = params.A, params.alpha, params.rate
    p = 2.0 * alpha - 1.0
    scale = 1.0 / (1.0 - 0.5 / alpha)

    def f0(y):
        return float(gfun.f0(y))

    def b_prime(y):
        T = float(gfun.T(y))
        df0 = scale * rate * (1.0 + T) / T**p
        return A * alpha * f0(y) ** (alpha - 1.0) * df0

    return DiffusionSpec(
        a=lambda y: 1.0 + f0(y),
        b=lambda y: A * f0(y) ** alpha,
        domain=(0.0, params.M),
        b_prime=b_prime,
    )


def nonnegativity_certificate(source, delta: float | None = None, tol: float = 1e-10) -> Certificate:
    """Check that the state map of the unit-diffusion representation is nonnegative.

    ``source`` is a GFunction (optimal control) or a DiffusionSpec. Specs whose
    domain extends below 0 or whose b does not vanish at 0 are refused: for
    them the diffusion is not pinned to the half line.
    """
    if isinstance(source, GFunction):
        spec = optimal_diffusion_spec(source)
    elif isinstance(source, DiffusionSpec):
        spec = source
    else:
        raise TypeError("source must be a GFunction or DiffusionSpec")
    lo, hi = spec.domain
    if lo < 0.0:
        raise CertificateError(f"domain {spec.domain} extends below 0")
    if spec.b(lo) != 0.0:
        raise CertificateError(f"b({lo}) = {spec.b(lo)} does not vanish at the lower boundary")

    tr = build_transform(spec, tol=tol, delta=delta, origin=lo)
    xs, ys = tr.table()
    width = hi - lo
    y1 = lo + 1e-8 * width
    r1 = spec.b(y1) / math.sqrt(y1 - lo)
    r2 = spec.b(lo + (y1 - lo) / 4.0) / math.sqrt((y1 - lo) / 4.0)
    c_eff = 2.0 * r2 - r1  # removes the O(sqrt y) term
    return Certificate(
        lower_bound=float(ys.min()),
        upper_bound=float(ys.max()),
        truncation=tr.delta if tr.y_hi < hi else 0.0,
        nonnegative=bool(ys.min() >= -tol),
        sqrt_coefficient=c_eff,
        boundary_class=classify_sqrt_boundary(c_eff, rtol=1e-6),
    )


def simulate_mapped(tr: UnitTransform, y0: float, t: float, dt: float, paths: int, seed: int) -> np.ndarray:
    """Y(t) = g_map(X(t)) with X the unit diffusion reflected at the image of y_lo.

    A_drift and g_map are interpolated from the transform's node table.
    """
    n_steps = round(t / dt)
    if n_steps < 1 or not math.isclose(n_steps * dt, t, rel_tol=1e-9):
        raise DomainError("t must be a positive multiple of dt")
    xs, ys = tr.table()
    with np.errstate(divide="ignore", invalid="ignore"):
        A_nodes = np.array([tr.drift_at_state(float(y)) if tr.spec.b(float(y)) > 0 else 0.0 for y in ys])
    A_nodes = np.nan_to_num(A_nodes)
    x_lo, x_hi = xs[0], xs[-1]
    x = np.full(paths, tr.B(y0) if y0 != tr.y_lo else x_lo)
    ids = np.arange(paths)
    sqdt = math.sqrt(dt)
    for k in range(n_steps):
        x = x + np.interp(x, xs, A_nodes) * dt + sqdt * rng.normals(seed, ids, k, stream=2)
        x = np.where(x < x_lo, 2.0 * x_lo - x, x)
        x = np.minimum(x, x_hi)
    return np.interp(x, xs, ys)
