"""Euler-Maruyama hitting times of M for dX = (1 + f) dt + A f^alpha dW."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng
from .errors import DegenerateEstimateError, DomainError
from .params import ModelParams
from .strategies import RUIN, SOFT_REFLECT, Strategy

HIT, CENSORED, RUINED = 1, 2, 3
_RUNNING = 0
_CHUNK = 8192
_BLOCK = 32


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``t_max=None`` means 50 * M; ``clamp_policy=None`` takes the strategy's
    default (ruin for constant investment, soft reflection otherwise).
    """

    dt: float = 1e-3
    paths: int = 1000
    seed: int = 0
    t_max: float | None = None
    clamp_policy: str | None = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"dt must be positive, got {self.dt!r}")
        if int(self.paths) != self.paths or self.paths < 1:
            raise DomainError(f"paths must be a positive integer, got {self.paths!r}")
        if self.t_max is not None and not self.t_max > 0:
            raise DomainError(f"t_max must be positive, got {self.t_max!r}")
        if self.clamp_policy not in (None, SOFT_REFLECT, RUIN):
            raise DomainError(f"unknown clamp policy {self.clamp_policy!r}")

    def horizon(self, M: float) -> float:
        return 50.0 * M if self.t_max is None else self.t_max

    def policy_for(self, strategy: Strategy) -> str:
        return self.clamp_policy or strategy.default_clamp


@dataclass(frozen=True)
class Outcome:
    kind: str  # "hit", "censored" or "ruined"
    tau: float | None = None


@dataclass
class SimResult:
    hit_times: list = field(default_factory=list)
    censored: int = 0
    ruined: int = 0
    clamped_steps: int = 0
    total_steps: int = 0
    mean: float = math.nan
    std_error: float = math.nan

    @property
    def paths(self) -> int:
        return len(self.hit_times) + self.censored + self.ruined

    @property
    def expected_time(self) -> float:
        """Objective E[tau_M]: infinite once any path is ruined."""
        return math.inf if self.ruined else self.mean

    @property
    def clamp_fraction(self) -> float:
        return self.clamped_steps / self.total_steps if self.total_steps else 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_json(cls, text: str) -> SimResult:
        return cls(**json.loads(text))

    def hit_times_csv(self) -> str:
        return "".join(f"{t!r}\n" for t in self.hit_times)


def _run_paths(x0, strategy, params, config, path_ids):
    """Vectorised Euler loop over the given path indices.

    Returns per-path (status, tau, clamps, steps) arrays in ``path_ids`` order.
    """
    M, A, alpha = params.M, params.A, params.alpha
    dt = config.dt
    sqdt = math.sqrt(dt)
    n_max = math.ceil(config.horizon(M) / dt - 1e-9)
    soft = config.policy_for(strategy) == SOFT_REFLECT

    n = len(path_ids)
    status = np.full(n, _RUNNING, dtype=np.int8)
    tau = np.full(n, np.nan)
    clamps = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    if x0 >= M:
        status[:] = HIT
        tau[:] = 0.0
        return status, tau, clamps, steps

    live = np.arange(n)
    x = np.full(n, float(x0))
    ids = np.asarray(path_ids, dtype=np.int64)
    step = 0
    while live.size and step < n_max:
        # noise for a block of steps; unused draws are simply discarded
        width = min(_BLOCK, n_max - step)
        if strategy.noiseless:
            # closed-form crossing: x grows by dt per step
            k = np.ceil((M - x[live]) / dt - 1e-12).astype(np.int64)
            k = np.maximum(k, 1)
            done = step + k <= n_max
            h = live[done]
            xa = x[h] + (k[done] - 1) * dt
            tau[h] = (step + k[done] - 1) * dt + (M - xa)
            status[h] = HIT
            steps[h] += k[done]
            steps[live[~done]] += n_max - step
            live = live[~done]
            break
        Z = rng.normals(config.seed, ids[live][:, None], step + np.arange(width)[None, :])
        pos = np.arange(live.size)
        for j in range(width):
            xa = x[live]
            f = strategy.evaluate(xa)
            xn = xa + (1.0 + f) * dt
            noisy = np.flatnonzero(f > 0)
            if noisy.size:
                sig = A * f[noisy] ** alpha
                xn[noisy] += sig * sqdt * Z[pos[noisy], j]
            steps[live] += 1
            hit = xn >= M
            if hit.any():
                h = live[hit]
                tau[h] = step * dt + dt * (M - xa[hit]) / (xn[hit] - xa[hit])
                status[h] = HIT
            neg = (xn < 0.0) & ~hit
            if neg.any():
                if soft:
                    xn[neg] = 0.0
                    clamps[live[neg]] += 1
                else:
                    status[live[neg]] = RUINED
            x[live] = xn
            keep = status[live] == _RUNNING
            live = live[keep]
            pos = pos[keep]
            step += 1
            if not live.size:
                break
    status[live] = CENSORED
    return status, tau, clamps, steps


def _check_start(x0, params):
    if not 0.0 <= x0 <= params.M:
        raise DomainError(f"x0 = {x0} outside [0, M={params.M}]")


def simulate_path(x0: float, strategy: Strategy, params: ModelParams, config: SimConfig, path_index: int):
    """One path; identical to path ``path_index`` of estimate_hitting_time."""
    _check_start(x0, params)
    status, tau, clamps, _ = _run_paths(x0, strategy, params, config, [path_index])
    kind = {HIT: "hit", CENSORED: "censored", RUINED: "ruined"}[int(status[0])]
    return Outcome(kind, float(tau[0]) if kind == "hit" else None), int(clamps[0])


def estimate_hitting_time(x0: float, strategy: Strategy, params: ModelParams, config: SimConfig) -> SimResult:
    """Mean and standard error of tau_M over the paths that hit M."""
    _check_start(x0, params)
    statuses, taus, clamps, steps = [], [], [], []
    for start in range(0, config.paths, _CHUNK):
        ids = np.arange(start, min(start + _CHUNK, config.paths))
        s, t, c, k = _run_paths(x0, strategy, params, config, ids)
        statuses.append(s)
        taus.append(t)
        clamps.append(c)
        steps.append(k)
    status = np.concatenate(statuses)
    tau = np.concatenate(taus)
    hits = tau[status == HIT]
    res = SimResult(
        hit_times=[float(v) for v in hits],
        censored=int(np.sum(status == CENSORED)),
        ruined=int(np.sum(status == RUINED)),
        clamped_steps=int(np.concatenate(clamps).sum()),
        total_steps=int(np.concatenate(steps).sum()),
    )
    if hits.size == 0:
        raise DegenerateEstimateError(
            f"no path reached M={params.M} (censored={res.censored}, ruined={res.ruined})"
        )
    res.mean = float(np.mean(hits))
    res.std_error = float(np.std(hits, ddof=1) / math.sqrt(hits.size)) if hits.size > 1 else math.nan
    return res


# ---------------------------------------------------------------------------
# squared Brownian motion check


@dataclass
class MomentReport:
    t: float
    sde_moments: list  # raw moments E[X^k], k = 1..4
    sde_se: list
    direct_moments: list
    direct_se: list
    reference_moments: list  # t^k (2k-1)!!
    sde_variance: float
    sde_variance_se: float
    direct_variance: float
    direct_variance_se: float


def _moments(sample):
    n = sample.size
    m = [float(np.mean(sample**k)) for k in range(1, 5)]
    se = [float(np.std(sample**k, ddof=1) / math.sqrt(n)) for k in range(1, 5)]
    c = sample - sample.mean()
    var = float(np.mean(c**2)) * n / (n - 1)
    var_se = math.sqrt(max(float(np.mean(c**4)) - var**2, 0.0) / n)
    return m, se, var, var_se


def simulate_sqrt_diffusion(t: float, config: SimConfig, c: float = 2.0) -> np.ndarray:
    """X(t) for dX = dt + c sqrt(max(X, 0)) dW, X(0) = 0 (full truncation, no clamp)."""
    n_steps = round(t / config.dt)
    if n_steps < 1 or not math.isclose(n_steps * config.dt, t, rel_tol=1e-9):
        raise DomainError("t must be a positive multiple of dt")
    out = []
    sqdt = math.sqrt(config.dt)
    for start in range(0, config.paths, _CHUNK):
        ids = np.arange(start, min(start + _CHUNK, config.paths))
        x = np.zeros(ids.size)
        for k in range(n_steps):
            z = rng.normals(config.seed, ids, k)
            x = x + config.dt + c * np.sqrt(np.maximum(x, 0.0)) * sqdt * z
        out.append(x)
    return np.concatenate(out)


def w_squared_consistency(t: float, config: SimConfig) -> MomentReport:
    """Compare X(t) from dX = dt + 2 sqrt(X) dW, X(0)=0, against W(t)^2."""
    if not t > 0:
        raise DomainError("t must be positive")
    x = simulate_sqrt_diffusion(t, config)
    w = math.sqrt(t) * rng.normals(config.seed, np.arange(config.paths), 0, stream=1)
    sm, sse, sv, svse = _moments(x)
    dm, dse, dv, dvse = _moments(w * w)
    ref = [t, 3 * t**2, 15 * t**3, 105 * t**4]
    return MomentReport(t, sm, sse, dm, dse, ref, sv, svse, dv, dvse)
