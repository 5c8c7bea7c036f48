"""Lower-branch solution g = -V' of the retirement problem, its value and control.

Everything is computed in the coordinate ``T = 1/g - 1 >= 0``. In that
coordinate the defining equation of every supported regime reads

    I_p(T) = rate * x,    I_p(T) = int_0^T t^p / (1 + t) dt,    p = 2 alpha - 1,

which is the substitution t = (1 - u)/u applied to int_g^1 (1-u)^p / u^(p+1) du.
``I_1(T) = T - log(1+T)`` recovers 1/g + log g = 1 + x/2 (with rate 1/2) and
``I_0(T) = log(1+T)`` gives g = exp(-2x/A^2). T is an analytic function of
x^(1/(2 alpha)), which removes the square-root cusp at x = 0 and keeps small-x
quantities such as f0 = T / (1 - 1/(2 alpha)) free of cancellation.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, SolverError, UnsupportedControlError, UnsupportedRegimeError
from .params import CONTROL_REGIMES, VALUE_REGIMES, ModelParams, Regime
from .quadrature import adaptive_simpson

DEFAULT_TOL = 1e-12
VALUE_TOL = 1e-9
MAX_ITER = 200


def h_eval(y: float) -> float:
    """1/y + log y; its minimum value 1 is attained at y = 1."""
    if not y > 0:
        raise DomainError(f"h_eval requires y > 0, got {y!r}")
    return 1.0 / y + math.log(y)


def _require_value_regime(params: ModelParams) -> Regime:
    regime = params.regime()
    if regime not in VALUE_REGIMES:
        raise UnsupportedRegimeError(
            f"regime {regime.value} (alpha={params.alpha}) has no finite value function; "
            "see strategies.fast_retirement_params"
        )
    return regime


def _p(params: ModelParams) -> float:
    return 2.0 * params.alpha - 1.0


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _series_small(T: float, p: float) -> float:
    # sum_k (-1)^k T^(p+k+1) / (p+k+1), for T <= 1/2
    term = T ** (p + 1.0)
    total = 0.0
    k = 0
    while True:
        c = term / (p + k + 1.0)
        total += c
        if abs(c) <= 1e-17 * total:
            return total
        term *= -T
        k += 1


def _gauss_legendre(a: float, b: float, p: float) -> float:
    half = 0.5 * (b - a)
    t = 0.5 * (a + b) + half * _GL_NODES
    return half * float(np.dot(_GL_WEIGHTS, t**p / (1.0 + t)))


def _series_tail(T: float, p: float) -> float:
    # int_2^T t^p/(1+t) dt via v = 1/t: sum_k (-1)^k (2^(p-k) - T^(p-k)) / (k - p)
    total = 2.0**p * math.expm1(p * math.log(0.5 * T)) / p
    k = 1
    while True:
        c = (2.0 ** (p - k) - T ** (p - k)) / (k - p)
        total += c if k % 2 == 0 else -c
        if abs(c) <= 1e-17 * abs(total):
            return total
        k += 1


def inner_integral(T: float, p: float) -> float:
    """int_0^T t^p/(1+t) dt for 0 <= p <= 1.

    Closed forms at p = 0 and (for T > 1/2) p = 1; otherwise a power series below T = 1/2,
    24-point Gauss-Legendre on [1/2, min(T, 2)] and an inverse-power series
    above 2. Every piece converges at least like 2^-k.
    """
    if T <= 0.0:
        return 0.0
    if p == 0.0:
        return math.log1p(T)
    if T <= 0.5:
        # also for p = 1, where T - log1p(T) cancels catastrophically
        return _series_small(T, p)
    if p == 1.0:
        return T - math.log1p(T)
    base = _series_small(0.5, p)
    if T <= 2.0:
        return base + _gauss_legendre(0.5, T, p)
    return base + _gauss_legendre(0.5, 2.0, p) + _series_tail(T, p)


def _inner_slope(T: float, p: float) -> float:
    return T**p / (1.0 + T)


def solve_t(x: float, params: ModelParams, tol: float = DEFAULT_TOL) -> float:
    """Return T = 1/g(x) - 1 by bracketed Newton iteration."""
    if not x >= 0.0 or not math.isfinite(x):
        raise DomainError(f"x must be a finite nonnegative number, got {x!r}")
    if not tol > 0:
        raise DomainError("tol must be positive")
    _require_value_regime(params)
    if x == 0.0:
        return 0.0
    p = _p(params)
    target = params.rate * x
    if p == 0.0:
        # inf once rate*x > 709; solve_g then uses exp(-rate*x) directly
        return math.expm1(target) if target < 709.0 else math.inf

    def resid(T):
        return inner_integral(T, p) - target

    # small-T behaviour I ~ T^(p+1)/(p+1)
    T = ((p + 1.0) * target) ** (1.0 / (p + 1.0))
    lo, hi = 0.0, max(2.0 * T, 1.0)
    while resid(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
        if not math.isfinite(hi):
            raise SolverError("solve_t: could not bracket the root", (lo, hi))
    T = min(max(T, lo), hi)
    r = resid(T)
    for _ in range(MAX_ITER):
        if abs(r) <= 1e-15 * target or r == 0.0:
            break
        if r < 0.0:
            lo = T
        else:
            hi = T
        step = r / _inner_slope(T, p)
        T_new = T - step
        if not lo < T_new < hi:
            T_new = 0.5 * (lo + hi)
        if T_new == T or abs(T_new - T) <= 2e-16 * T:
            T = T_new
            r = resid(T)
            break
        T = T_new
        r = resid(T)
    else:
        raise SolverError(f"solve_t: no convergence at x={x}", (lo, hi))
    if abs(r) > tol:
        raise SolverError(f"solve_t: residual {r:.3e} exceeds tol {tol:.1e} at x={x}", (lo, hi))
    return T


def solve_g(x: float, params: ModelParams, tol: float = DEFAULT_TOL) -> float:
    """Lower-branch g(x) in (0, 1]; g(0) = 1 exactly."""
    if _p(params) == 0.0 and x >= 0.0:
        return math.exp(-params.rate * x)
    return 1.0 / (1.0 + solve_t(x, params, tol))


def g_derivative(x: float, params: ModelParams) -> float:
    """g'(x) from the ODE identity, g' = -rate * g / T^p."""
    if not x > 0.0:
        raise DomainError(f"g_derivative requires x > 0, got {x!r}")
    T = solve_t(x, params)
    return -params.rate / ((1.0 + T) * T ** _p(params))


def value(x: float, params: ModelParams, tol: float = VALUE_TOL) -> float:
    """V(x) = int_x^M g(u) du, the minimal expected time to reach M.

    The integral is carried out in the T coordinate, where
    g(u) du = T^p / (rate (1+T)^2) dT, so only the two endpoints need a solve.
    """
    _require_value_regime(params)
    M = params.M
    if not 0.0 <= x <= M:
        raise DomainError(f"x = {x} outside [0, M={M}]")
    if x == M:
        return 0.0
    if _p(params) in (0.0, 1.0):
        return _g_integral_log(_log1p_t(x, params), _log1p_t(M, params), params, tol)
    return _g_integral(solve_t(x, params), solve_t(M, params), params, tol)


def _log1p_t(x: float, params: ModelParams) -> float:
    """log(1 + T(x)); exact for p = 0, where T itself overflows once rate*x > 709."""
    if _p(params) == 0.0:
        return params.rate * x
    return math.log1p(solve_t(x, params))


def _g_integral_log(s_lo: float, s_hi: float, params: ModelParams, tol: float) -> float:
    # p in {0, 1}: s = log(1+T) turns the integrand into the bounded expm1(s)^p e^-s
    rate = params.rate
    if _p(params) == 1.0:

        def integrand(s):
            return -math.expm1(-s) / rate

    else:

        def integrand(s):
            return math.exp(-s) / rate

    return adaptive_simpson(integrand, s_lo, s_hi, tol=tol)


def _g_integral(T_lo: float, T_hi: float, params: ModelParams, tol: float) -> float:
    p = _p(params)
    rate = params.rate
    if p == 1.0 or p == 0.0:
        return _g_integral_log(math.log1p(T_lo), math.log1p(T_hi), params, tol)

    e = 4.0 * p + 3.0

    def integrand_w(w):
        w4 = w * w * w * w
        return 4.0 * w**e / (rate * (1.0 + w4) ** 2)

    # the integrand peaks near w = 1 and decays like w^(4p-5); doubling breakpoints
    # keep every panel's initial Simpson samples on the peak
    lo, hi = T_lo**0.25, T_hi**0.25
    cuts = [lo]
    edge = 1.0
    while edge < hi:
        if edge > lo:
            cuts.append(edge)
        edge *= 2.0
    cuts.append(hi)
    share = tol / (len(cuts) - 1)
    return math.fsum(adaptive_simpson(integrand_w, a, b, tol=share) for a, b in zip(cuts, cuts[1:]))


def _require_control_regime(params: ModelParams) -> Regime:
    regime = params.regime()
    if regime is Regime.HALF_CRITICAL:
        raise UnsupportedControlError(
            "the optimal control is undefined at alpha = 1/2 (minimiser exponent 1/(2 alpha - 1) diverges)"
        )
    if regime not in CONTROL_REGIMES:
        _require_value_regime(params)
    return regime


def control(x: float, params: ModelParams) -> float:
    """Optimal investment f0(x) = (1/g - 1) / (1 - 1/(2 alpha)); f0(0) = 0."""
    _require_control_regime(params)
    return solve_t(x, params) / (1.0 - 0.5 / params.alpha)


def control_asymptotic_small(x: float) -> float:
    """Small-fortune approximation f0(x) ~ 2 sqrt(x) (classic regime)."""
    return 2.0 * math.sqrt(x)


def g_approx_large(x: float) -> float:
    """Large-fortune approximation 1 / (1 + x/2 + log(1 + x/2)) (classic regime)."""
    b = 1.0 + 0.5 * x
    return 1.0 / (b + math.log(b))


def f0_approx_large(x: float) -> float:
    return x + 2.0 * math.log1p(0.5 * x)


def submartingale_drift(x: float, f: float, params: ModelParams) -> float:
    """Drift per unit time of Y(t) = V(X(t)) + t when investing ``f`` at fortune ``x``.

    Nonnegative for every f >= 0 and zero at f = f0(x).
    """
    if not 0.0 < x < params.M:
        raise DomainError(f"x = {x} outside (0, M={params.M})")
    if not f >= 0.0:
        raise DomainError(f"f must be nonnegative, got {f!r}")
    g = solve_g(x, params)
    neg_gp = -g_derivative(x, params)
    return -g * (1.0 + f) + 0.5 * params.A**2 * neg_gp * f ** (2.0 * params.alpha) + 1.0


def value_scaling_map(x: float, A: float, M: float, alpha: float = 1.0):
    """(x/A^2, M/A^2, A^2): maps an alpha = 1 problem with scale A onto A = 1."""
    if alpha != 1.0:
        raise UnsupportedRegimeError("the diffusion-scale map only holds for alpha = 1")
    if not A > 0:
        raise DomainError("A must be positive")
    a2 = A * A
    return x / a2, M / a2, a2


# --------------------------------------------------------------------------
# tabulation


def _power_grid(n: int, x_max: float, alpha: float) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n)
    x = x_max * s ** (2.0 * alpha)
    x[-1] = x_max
    return x


@dataclass(frozen=True, eq=False)
class GFunction:
    """Tabulated g on [0, x_max] with cubic Hermite interpolation.

    Abscissae are uniform in ``s = (x/x_max)^(1/(2 alpha))``, which clusters
    points near the cusp at 0 and makes T a smooth function of s. Node slopes
    come from the ODE, so interpolation is fourth order.
    """

    params: ModelParams
    grid: np.ndarray
    values: np.ndarray
    tol: float = DEFAULT_TOL
    _T: np.ndarray = field(init=False, repr=False)
    _s: np.ndarray = field(init=False, repr=False)
    _dTds: np.ndarray = field(init=False, repr=False)
    _uniform: bool = field(init=False, repr=False)

    def __post_init__(self):
        _require_value_regime(self.params)
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise DomainError("grid and values must be 1-d arrays of equal length >= 2")
        if grid[0] != 0.0 or values[0] != 1.0 or np.any(np.diff(grid) <= 0):
            raise DomainError("grid must start at 0 with g(0) = 1 and be strictly increasing")
        if grid[-1] < self.params.M:
            raise DomainError("grid must extend to at least M")
        if np.any(values <= 0) or np.any(values > 1) or np.any(np.diff(values) >= 0):
            raise DomainError("values must be strictly decreasing in (0, 1]")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

        a2 = 2.0 * self.params.alpha
        p = a2 - 1.0
        rate = self.params.rate
        x_max = grid[-1]
        T = 1.0 / values - 1.0
        T[0] = 0.0
        s = (grid / x_max) ** (1.0 / a2)
        with np.errstate(divide="ignore", invalid="ignore"):
            dTdx = rate * (1.0 + T) / T**p
            dxds = a2 * x_max * s ** (a2 - 1.0)
            dTds = dTdx * dxds
        dTds[0] = (a2 * rate * x_max) ** (1.0 / a2)
        n = grid.size
        uniform = bool(np.allclose(s, np.linspace(0.0, 1.0, n), rtol=0, atol=1e-12))
        object.__setattr__(self, "_T", T)
        object.__setattr__(self, "_s", s)
        object.__setattr__(self, "_dTds", dTds)
        object.__setattr__(self, "_uniform", uniform)

    @classmethod
    def build(cls, params: ModelParams, n: int = 2001, x_max: float | None = None, tol: float = DEFAULT_TOL):
        _require_value_regime(params)
        if n < 2:
            raise DomainError("need at least two grid points")
        x_max = params.M if x_max is None else float(x_max)
        grid = _power_grid(n, x_max, params.alpha)
        values = np.array([solve_g(float(x), params, tol) for x in grid])
        if values[-1] < 1e-300:
            raise DomainError(f"g({x_max}) = {values[-1]:.3g} is below double range for a T table; shorten x_max")
        return cls(params, grid, values, tol)

    @property
    def x_max(self) -> float:
        return float(self.grid[-1])

    def T(self, x):
        """Interpolated 1/g - 1; ``x`` is clipped to [0, x_max]."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, self.x_max)
        if self.params.alpha == 1.0:
            s = np.sqrt(x / self.x_max)
        else:
            s = (x / self.x_max) ** (0.5 / self.params.alpha)
        n = self._s.size
        if self._uniform:
            u = s * (n - 1)
            i = np.minimum(u.astype(np.int64), n - 2)
        else:
            i = np.clip(np.searchsorted(self._s, s, side="right") - 1, 0, n - 2)
        s0 = self._s[i]
        h = self._s[i + 1] - s0
        t = (s - s0) / h
        t2 = t * t
        t3 = t2 * t
        out = (
            (2 * t3 - 3 * t2 + 1) * self._T[i]
            + (t3 - 2 * t2 + t) * h * self._dTds[i]
            + (-2 * t3 + 3 * t2) * self._T[i + 1]
            + (t3 - t2) * h * self._dTds[i + 1]
        )
        return out

    def g(self, x):
        return 1.0 / (1.0 + self.T(x))

    def g_prime(self, x):
        T = self.T(x)
        with np.errstate(divide="ignore"):
            return -self.params.rate / ((1.0 + T) * T ** (2.0 * self.params.alpha - 1.0))

    def f0(self, x):
        _require_control_regime(self.params)
        return self.T(x) / (1.0 - 0.5 / self.params.alpha)

    def columns(self, tol: float = VALUE_TOL) -> dict:
        """Node table: x, g, g_prime (ODE), f0 (NaN where undefined), V = int_x^M g."""
        p = 2.0 * self.params.alpha - 1.0
        T = self._T
        with np.errstate(divide="ignore"):
            gp = -self.params.rate / ((1.0 + T) * T**p)
        if self.params.regime() in CONTROL_REGIMES:
            f0 = T / (1.0 - 0.5 / self.params.alpha)
        else:
            f0 = np.full_like(T, np.nan)
        # cumulative panels from the right end, then re-reference to M
        n = T.size
        seg = np.array([_g_integral(T[i], T[i + 1], self.params, tol / n) for i in range(n - 1)])
        tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        T_M = solve_t(self.params.M, self.params, self.tol)
        V = tail - _g_integral(T_M, T[-1], self.params, tol / n)
        if self.x_max == self.params.M:
            V[-1] = 0.0
        return {"x": self.grid.copy(), "g": self.values.copy(), "g_prime": gp, "f0": f0, "V": V}

    # ---- serialisation -------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "params": self.params.as_dict(),
            "regime": self.params.regime().value,
            "tol": self.tol,
            "grid": [float(v) for v in self.grid],
            "values": [float(v) for v in self.values],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> GFunction:
        doc = json.loads(text)
        return cls(ModelParams(**doc["params"]), np.array(doc["grid"]), np.array(doc["values"]), doc["tol"])

    def to_csv(self, columns: dict | None = None) -> str:
        cols = self.columns() if columns is None else columns
        buf = io.StringIO()
        pr = self.params
        buf.write(f"# A={pr.A!r} alpha={pr.alpha!r} M={pr.M!r} tol={self.tol!r}\n")
        buf.write("# g_prime=-inf marks the divergent derivative at x=0; f0=nan where the control is undefined\n")
        w = csv.writer(buf, lineterminator="\n")
        names = ["x", "g", "g_prime", "f0", "V"]
        w.writerow(names)
        for row in zip(*(cols[k] for k in names)):
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> GFunction:
        lines = text.splitlines()
        meta = dict(kv.split("=", 1) for kv in lines[0].lstrip("# ").split())
        params = ModelParams(float(meta["A"]), float(meta["alpha"]), float(meta["M"]))
        rows = list(csv.DictReader(ln for ln in lines if not ln.startswith("#")))
        grid = np.array([float(r["x"]) for r in rows])
        values = np.array([float(r["g"]) for r in rows])
        return cls(params, grid, values, float(meta["tol"]))

    def save(self, directory: str | Path, stem: str = "gfunction") -> tuple[Path, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = d / f"{stem}.csv", d / f"{stem}.json"
        csv_path.write_text(self.to_csv(), encoding="utf-8", newline="\n")
        json_path.write_text(self.to_json(), encoding="utf-8", newline="\n")
        return csv_path, json_path


def _fmt(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    return repr(v)
