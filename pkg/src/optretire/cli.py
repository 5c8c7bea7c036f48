"""Command-line entry point: solve, simulate, compare, figures, fast-retire, rerun.

Every command that writes files also writes ``manifest.json``; ``rerun`` on
that manifest reproduces the outputs byte for byte (the manifest keeps its
original timestamp).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import (
    DegenerateEstimateError,
    DomainError,
    SolverError,
    StrategyParseError,
    UnattainableError,
)
from .gsolve import GFunction, control, h_eval, solve_g, value
from .params import CONTROL_REGIMES, ModelParams, Regime
from .sde import SimConfig, estimate_hitting_time
from .strategies import (
    Optimal,
    Threshold,
    Zero,
    expected_time_threshold,
    fast_retirement_params,
    parse_strategy,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_SOLVER = 4
EXIT_DEGENERATE = 5
EXIT_PARSE = 6
EXIT_UNATTAINABLE = 7

DEGENERATE_MSG = "degenerate regime: use fast-retire"

# built-in defaults; a config file overrides these and flags override both
DEFAULTS = {
    "A": 1.0,
    "alpha": 1.0,
    "M": 10.0,
    "x": 0.0,
    "grid": 2001,
    "dt": 1e-3,
    "paths": 1000,
    "seed": 0,
    "tmax": None,
    "clamp": None,
    "strategy": None,
    "target": 0.1,
    "confirm_paths": 0,
    "hit_times": False,
    "out": ".",
}
_TYPES = {
    "A": float,
    "alpha": float,
    "M": float,
    "x": float,
    "grid": int,
    "dt": float,
    "paths": int,
    "seed": int,
    "tmax": float,
    "clamp": str,
    "strategy": str,
    "target": float,
    "confirm_paths": int,
    "hit_times": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    "out": str,
}
# manifest parameter keys per command, in emitted order
_MANIFEST_KEYS = {
    "solve": ("A", "alpha", "M", "grid"),
    "simulate": ("A", "alpha", "M", "x", "grid", "dt", "paths", "seed", "tmax", "clamp", "strategy", "hit_times"),
    "compare": ("A", "alpha", "M", "x", "grid", "dt", "paths", "seed", "tmax", "clamp", "strategy"),
    "figures": ("grid",),
    "fast-retire": ("alpha", "M", "target", "dt", "confirm_paths", "seed", "tmax"),
}


class UsageError(Exception):
    pass


def read_config(path: str | Path) -> dict:
    """Parse a ``key = value`` file; '#' starts a comment."""
    out = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _TYPES:
            raise UsageError(f"{path}:{n}: expected 'key = value' with a known key, got {raw!r}")
        val = val.strip()
        out[key] = None if val.lower() == "none" else _TYPES[key](val)
    return out


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(read_config(args.config))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            settings[key] = v
    return settings


def _params(s: dict) -> ModelParams:
    return ModelParams(s["A"], s["alpha"], s["M"])


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) or math.isnan(v) else ("inf" if v > 0 else "-inf")
    return "" if v is None else str(v)


def manifest_text(command: str, settings: dict, timestamp: str) -> str:
    params = {k: settings[k] for k in _MANIFEST_KEYS[command]}
    doc = {"command": command, "params": params, "version": __version__, "timestamp": timestamp}
    return json.dumps(doc, indent=1) + "\n"


def _sim_config(s: dict) -> SimConfig:
    return SimConfig(dt=s["dt"], paths=s["paths"], seed=s["seed"], t_max=s["tmax"], clamp_policy=s["clamp"])


def _strategy(text: str, params: ModelParams, grid: int):
    if text.strip().lower() == "optimal" and params.regime() not in CONTROL_REGIMES:
        if params.regime() is Regime.DEGENERATE:
            raise DomainError(DEGENERATE_MSG)
        raise DomainError(f"no optimal control in regime {params.regime().value}")
    return parse_strategy(text, params, grid)


def analytic_time(strategy, x: float, params: ModelParams):
    """Closed-form or quadrature expected time where one is available."""
    if isinstance(strategy, Zero):
        return params.M - x
    if isinstance(strategy, Optimal):
        return value(x, params)
    if isinstance(strategy, Threshold) and params.A == 1.0:
        return expected_time_threshold(x, strategy.eps, strategy.c, params.alpha, params.M)
    return None


# ---------------------------------------------------------------------------
# commands; each returns {relative file name: text} plus a printed summary


def cmd_solve(s: dict):
    params = _params(s)
    if params.regime() is Regime.DEGENERATE:
        raise DomainError(DEGENERATE_MSG)
    gf = GFunction.build(params, n=s["grid"])
    cols = gf.columns()
    files = {"gfunction.csv": gf.to_csv(cols), "gfunction.json": gf.to_json()}
    summary = f"regime {params.regime().value}: g({params.M:g}) = {float(cols['g'][-1])!r}, V(0) = {float(cols['V'][0])!r}"
    return files, summary


def cmd_simulate(s: dict):
    params = _params(s)
    if not s["strategy"]:
        raise UsageError("simulate needs --strategy")
    text = s["strategy"] if isinstance(s["strategy"], str) else s["strategy"][0]
    strategy = _strategy(text, params, s["grid"])
    res = estimate_hitting_time(s["x"], strategy, params, _sim_config(s))
    files = {"result.json": res.to_json() + "\n"}
    if s["hit_times"]:
        files["hit_times.csv"] = res.hit_times_csv()
    ref = analytic_time(strategy, s["x"], params)
    summary = (
        f"strategy {strategy.to_text()}: mean {res.mean!r} se {res.std_error!r} "
        f"paths {res.paths} censored {res.censored} ruined {res.ruined}"
    )
    if ref is not None:
        summary += f" analytic {ref!r}"
    return files, summary


COMPARE_HEADER = ["strategy", "mean", "std_error", "expected_time", "analytic", "gap", "ruined_fraction", "censored"]


def cmd_compare(s: dict):
    texts = s["strategy"]
    if isinstance(texts, str):
        texts = [t for t in texts.split(";") if t.strip()]
    if not texts or len(texts) < 2:
        raise UsageError("compare needs at least two --strategy values")
    params = _params(s)
    cfg = _sim_config(s)
    rows = []
    for text in texts:
        strategy = _strategy(text, params, s["grid"])
        res = estimate_hitting_time(s["x"], strategy, params, cfg)
        ref = analytic_time(strategy, s["x"], params)
        gap = res.mean - ref if ref is not None else None
        rows.append(
            [strategy.to_text(), res.mean, res.std_error, res.expected_time, ref, gap, res.ruined / res.paths, res.censored]
        )
    table = _csv_text(COMPARE_HEADER, rows)
    return {"compare.csv": table}, table.rstrip("\n")


def figure_tables(grid: int = 2001) -> dict:
    """CSV text of the four figure datasets (classic model, M = 10)."""
    params = ModelParams(1.0, 1.0, 10.0)
    ys = [k / 100 for k in range(5, 801)]
    xs = [k / 20 for k in range(0, 201)]
    gs = [solve_g(x, params) for x in xs]
    return {
        "fig1.csv": _csv_text(["y", "h"], ((y, h_eval(y)) for y in ys)),
        "fig2.csv": _csv_text(["x", "g"], zip(xs, gs)),
        "fig3.csv": _csv_text(["x", "f0"], ((x, control(x, params)) for x in xs)),
        "fig4.csv": _csv_text(["x", "V"], ((x, value(x, params)) for x in xs)),
    }


def cmd_figures(s: dict):
    files = figure_tables(s["grid"])
    return files, "wrote " + ", ".join(files)


def cmd_fast_retire(s: dict):
    alpha, M, target = s["alpha"], s["M"], s["target"]
    eps, c = fast_retirement_params(alpha, target, M)
    achieved = expected_time_threshold(0.0, eps, c, alpha, M)
    report = {"alpha": alpha, "M": M, "target": target, "eps": eps, "c": c, "expected_time": achieved}
    summary = f"eps {eps!r} c {c!r} expected time at 0: {achieved!r} (target {target!r})"
    if s["confirm_paths"]:
        cfg = SimConfig(dt=s["dt"], paths=s["confirm_paths"], seed=s["seed"], t_max=s["tmax"])
        res = estimate_hitting_time(0.0, Threshold(eps, c), ModelParams(1.0, alpha, M), cfg)
        report["mc_mean"] = res.mean
        report["mc_std_error"] = res.std_error
        summary += f"; MC mean {res.mean!r} se {res.std_error!r}"
    return {"fast_retire.json": json.dumps(report, indent=1) + "\n"}, summary


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "figures": cmd_figures,
    "fast-retire": cmd_fast_retire,
}


def run(command: str, settings: dict, out: str | Path, timestamp: str | None = None) -> str:
    """Execute a command, write its files and manifest into ``out``."""
    files, summary = COMMANDS[command](settings)
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    files["manifest.json"] = manifest_text(command, settings, timestamp)
    out = Path(out)
    for name, text in files.items():
        _write(out / name, text)
    return summary


def rerun(manifest_path: str | Path, out: str | Path) -> str:
    doc = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    command = doc["command"]
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r} in manifest")
    settings = dict(DEFAULTS)
    settings.update(doc["params"])
    return run(command, settings, out, doc["timestamp"])


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value defaults file")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--grid", type=int, help="tabulation points (default 2001)")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--A", type=float, dest="A", help="diffusion scale")
    model.add_argument("--alpha", type=float, help="diffusion exponent")
    model.add_argument("--M", type=float, dest="M", help="retirement target")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--x", type=float, help="starting fortune")
    sim.add_argument("--dt", type=float, help="Euler step")
    sim.add_argument("--paths", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--tmax", type=float, help="censoring horizon (default 50 M)")
    sim.add_argument("--clamp", choices=["soft-reflect", "ruin"], help="policy when a step goes below 0")

    p = argparse.ArgumentParser(prog="optretire", description="Optimal retirement: value function, control and simulation.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", parents=[common, model], help="tabulate g, g', f0 and V")
    ps = sub.add_parser("simulate", parents=[common, model, sim], help="Monte Carlo hitting time of M")
    ps.add_argument("--strategy", help="zero | const:C | threshold:EPS,C | optimal")
    ps.add_argument("--hit-times", action="store_true", default=None, help="also write hit_times.csv")
    pc = sub.add_parser("compare", parents=[common, model, sim], help="Monte Carlo comparison of strategies")
    pc.add_argument("--strategy", action="append", help="repeat for each strategy")
    sub.add_parser("figures", parents=[common], help="write fig1..fig4 CSV data")
    pf = sub.add_parser("fast-retire", parents=[common], help="threshold strategy for alpha < 1/2")
    pf.add_argument("--alpha", type=float, required=True)
    pf.add_argument("--M", type=float, dest="M")
    pf.add_argument("--target", type=float)
    pf.add_argument("--confirm-paths", type=int, help="Monte Carlo paths for a confirmation run")
    pf.add_argument("--dt", type=float)
    pf.add_argument("--seed", type=int)
    pf.add_argument("--tmax", type=float)
    pr = sub.add_parser("rerun", help="re-execute a manifest")
    pr.add_argument("manifest")
    pr.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            summary = rerun(args.manifest, args.out)
        else:
            settings = resolve_settings(args)
            summary = run(args.command, settings, settings["out"])
        print(summary)
        return EXIT_OK
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StrategyParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except UnattainableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNATTAINABLE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except SolverError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DegenerateEstimateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
