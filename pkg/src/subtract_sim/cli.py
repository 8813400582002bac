"""Command-line front end.

Usage::

    subtract-sim evaluate|sweep|optimize|compare --config FILE [--out FILE] [--format json|csv]

The config is a flat JSON object; unknown keys are rejected. Exit codes:
0 success, 1 configuration error, 2 below threshold (gain <= 0), 3
impossible event. ``SUBTRACT_SIM_THREADS`` sets the number of worker
processes used for sweeps and comparisons (default 1); results do not
depend on it.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError, ImpossibleEventError, SubtractSimError
from .evaluate import ROUTES, evaluate
from .model import (ArmTransmissivities, Config, ModeParams, Strategy, TruncationPolicy,
                    mode_coefficients)
from .optimize import DIMS, OBJECTIVES, _free_for, _start_from, maximize_rate

EXIT_OK, EXIT_CONFIG, EXIT_BELOW, EXIT_IMPOSSIBLE = 0, 1, 2, 3
THREADS_ENV = "SUBTRACT_SIM_THREADS"

FRACTION_KEYS = ("lambda", "alpha2", "gamma2", "alpha2_prime", "gamma2_prime")
T_KEYS = tuple(f"T{i}_intensity" for i in range(1, 5))
T_PRIME_KEYS = tuple(f"{k}_prime" for k in T_KEYS)
PARAM_KEYS = FRACTION_KEYS + T_KEYS + T_PRIME_KEYS
TRUNCATION_KEYS = ("k_max", "l_max_rel_tol", "n_max", "tail_tol")
OTHER_KEYS = ("strategy", "threshold", "route", "axes", "free", "bounds", "points", "rounds",
              "objective", "method", "strategies", "optimize", "format", "out")
ALLOWED_KEYS = PARAM_KEYS + TRUNCATION_KEYS + OTHER_KEYS
METRIC_COLUMNS = ("E_N", "gain", "probability", "rate")
OPT_COLUMNS = ("lambda_opt", "alpha2_opt", "alpha2_prime_opt")


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    steps: int

    def values(self):
        # rounded to the printed precision so every row can be re-evaluated exactly
        return [float("%.12g" % v) for v in np.linspace(self.lo, self.hi, self.steps)]


@dataclass
class RunConfig:
    """Parsed and validated contents of a config file."""

    params: dict
    strategy: Strategy
    truncation: TruncationPolicy
    route: str = "auto"
    axes: tuple = ()
    free: Optional[tuple] = None
    bounds: dict = field(default_factory=dict)
    points: int = 64
    rounds: int = 6
    objective: str = "rate"
    method: str = "auto"
    strategies: tuple = ()
    optimize: bool = False
    format: Optional[str] = None
    out: Optional[str] = None


# ---------------------------------------------------------------------------
# config parsing


def _number(raw, key, kind=float):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"field {key!r}: expected a number, got {raw!r}")
    if kind is int:
        if int(raw) != raw:
            raise ConfigError(f"field {key!r}: expected an integer, got {raw!r}")
        return int(raw)
    if not math.isfinite(raw):
        raise ConfigError(f"field {key!r}: must be finite")
    return float(raw)


def _parse_axes(raw):
    if not isinstance(raw, list):
        raise ConfigError("field 'axes': expected a list of {param, min, max, steps} objects")
    axes = []
    for n, item in enumerate(raw):
        where = f"axes[{n}]"
        if not isinstance(item, dict):
            raise ConfigError(f"field {where!r}: expected an object")
        extra = set(item) - {"param", "min", "max", "steps"}
        if extra:
            raise ConfigError(f"field {where!r}: unknown key(s) {sorted(extra)}")
        try:
            name = item["param"]
            lo, hi = _number(item["min"], where + ".min"), _number(item["max"], where + ".max")
            steps = _number(item["steps"], where + ".steps", int)
        except KeyError as exc:
            raise ConfigError(f"field {where!r}: missing {exc.args[0]!r}") from None
        if name not in PARAM_KEYS:
            raise ConfigError(f"field {where!r}: unknown parameter {name!r}")
        if steps < 2 and lo != hi:
            raise ConfigError(f"field {where!r}: steps must be >= 2")
        axes.append(Axis(name, lo, hi, max(steps, 1)))
    names = [a.name for a in axes]
    if len(set(names)) != len(names):
        raise ConfigError("field 'axes': parameter repeated")
    return tuple(axes)


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded config object."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - set(ALLOWED_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    params = {k: _number(data[k], k) for k in PARAM_KEYS if k in data}
    for arm, tkeys, fkeys in ((1, T_KEYS, ("alpha2", "gamma2")),
                              (2, T_PRIME_KEYS, ("alpha2_prime", "gamma2_prime"))):
        if any(k in params for k in tkeys) and any(k in params for k in fkeys):
            raise ConfigError(f"arm {arm}: give either transmissivities or fractions, not both")
    label = data.get("strategy", "pnrd_1_1")
    if not isinstance(label, str):
        raise ConfigError("field 'strategy': expected a label such as 'pnrd_1_1' or 'apd_on_on'")
    strategy = Strategy.parse(label)
    if "threshold" in data:
        if strategy.kind != "apd":
            raise ConfigError("field 'threshold': only valid for APD strategies")
        strategy = Strategy.apd(*strategy.pattern, _number(data["threshold"], "threshold", int))
    trunc = {}
    for k in TRUNCATION_KEYS:
        if k in data:
            trunc[k] = _number(data[k], k, int if k in ("k_max", "n_max") else float)
    truncation = TruncationPolicy(**trunc)
    rc = RunConfig(params, strategy, truncation)
    if "route" in data:
        if data["route"] not in ROUTES:
            raise ConfigError(f"field 'route': must be one of {ROUTES}")
        rc.route = data["route"]
    if "axes" in data:
        rc.axes = _parse_axes(data["axes"])
    if "free" in data:
        free = data["free"]
        if not isinstance(free, list) or any(f not in DIMS for f in free):
            raise ConfigError(f"field 'free': expected a list drawn from {DIMS}")
        rc.free = tuple(free)
    if "bounds" in data:
        b = data["bounds"]
        if not isinstance(b, dict) or any(k not in DIMS for k in b):
            raise ConfigError(f"field 'bounds': expected an object keyed by {DIMS}")
        for k, v in b.items():
            if not isinstance(v, list) or len(v) != 2:
                raise ConfigError(f"field 'bounds.{k}': expected [lo, hi]")
            rc.bounds[k] = (_number(v[0], f"bounds.{k}"), _number(v[1], f"bounds.{k}"))
    for k in ("points", "rounds"):
        if k in data:
            v = _number(data[k], k, int)
            if v < (2 if k == "points" else 0):
                raise ConfigError(f"field {k!r}: out of range")
            setattr(rc, k, v)
    if "objective" in data:
        if data["objective"] not in OBJECTIVES:
            raise ConfigError(f"field 'objective': must be one of {OBJECTIVES}")
        rc.objective = data["objective"]
    if "method" in data:
        if data["method"] not in ("auto", "grid", "local"):
            raise ConfigError("field 'method': must be 'auto', 'grid' or 'local'")
        rc.method = data["method"]
    if "strategies" in data:
        labels = data["strategies"]
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            raise ConfigError("field 'strategies': expected a list of labels")
        rc.strategies = tuple(Strategy.parse(s) for s in labels)
    if "optimize" in data:
        if not isinstance(data["optimize"], bool):
            raise ConfigError("field 'optimize': expected true or false")
        rc.optimize = data["optimize"]
    if "format" in data:
        if data["format"] not in ("json", "csv"):
            raise ConfigError("field 'format': must be 'json' or 'csv'")
        rc.format = data["format"]
    if "out" in data:
        if not isinstance(data["out"], str):
            raise ConfigError("field 'out': expected a path")
        rc.out = data["out"]
    return rc


def load_config(path) -> RunConfig:
    """Read and validate a config file, reporting the position of JSON errors."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_config(data)
    except (ConfigError, DomainError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# building physical configurations


def _arm(params, prime):
    """(alpha2 or None, gamma2) of one arm from fractions or transmissivities."""
    sfx = "_prime" if prime else ""
    tkeys = T_PRIME_KEYS if prime else T_KEYS
    if any(k in params for k in tkeys):
        mp = mode_coefficients(ArmTransmissivities.from_intensities(
            *(params.get(k, 1.0) for k in tkeys)))
        return mp.alpha2, mp.gamma2
    if prime and not any(k in params for k in ("alpha2_prime", "gamma2_prime")):
        return _arm(params, False)
    a2 = params.get("alpha2" + sfx)
    g2 = params.get("gamma2" + sfx, 0.0)
    if a2 is None and prime:
        a2 = _arm(params, False)[0]
    return a2, g2


def build_config(params, strategy, truncation) -> Config:
    if "lambda" not in params:
        raise ConfigError("missing field 'lambda'")
    a2, g2 = _arm(params, False)
    a2p, g2p = _arm(params, True)
    if a2 is None:
        raise ConfigError("missing field 'alpha2' (or T*_intensity)")
    return Config(params["lambda"], ModeParams.from_fractions(a2, g2),
                  ModeParams.from_fractions(a2p, g2p), strategy, truncation)


# ---------------------------------------------------------------------------
# tasks (module level so that worker processes can unpickle them)


def _metric_row(cfg):
    try:
        m = evaluate(cfg)
    except ImpossibleEventError:
        return [math.nan, math.nan, 0.0, math.nan]
    return [m.log_negativity, m.gain, m.probability, m.rate]


def _optimise(rc: RunConfig, params, strategy, start=None):
    """Optimise at one grid cell; returns (OptimizationResult)."""
    _, g2 = _arm(params, False)
    _, g2p = _arm(params, True)
    fixed = {k: params[k] for k in ("lambda", "alpha2", "alpha2_prime") if k in params}
    if rc.free is not None:
        free = rc.free
    else:
        free = _free_for(strategy, g2, g2p)
        if "lambda" in params:
            free = tuple(f for f in free if f != "lambda")
    fixed = {k: v for k, v in fixed.items() if k not in free}
    if strategy.detects_nothing(1) and "alpha2_prime" not in free:
        fixed.pop("alpha2_prime", None)
    kw = dict(free=free, fixed=fixed, bounds=rc.bounds, points=rc.points, rounds=rc.rounds,
              objective=rc.objective, method=rc.method, truncation=rc.truncation)
    if start is not None:
        kw["start"] = [_start_from(s, free) for s in start]
    return maximize_rate(strategy, (g2, g2p), **kw)


def _cell_params(rc, names, values):
    p = dict(rc.params)
    p.update(zip(names, values))
    return p


def _sweep_row_task(args):
    rc, names, rows = args
    out = []
    prev = None
    for values in rows:
        p = _cell_params(rc, names, values)
        if rc.optimize:
            res = _optimise(rc, p, rc.strategy, start=[prev] if prev is not None else None)
            prev = res
            m = res.metrics
            metric = ([math.nan, math.nan, 0.0, math.nan] if m is None else
                      [m.log_negativity, m.gain, m.probability, m.rate])
            out.append(list(values) + metric + [res.lambda_opt, res.alpha2_opt,
                                                res.alpha2_prime_opt])
        else:
            try:
                cfg = build_config(p, rc.strategy, rc.truncation)
            except (DomainError, ConfigError) as exc:
                raise ConfigError(f"grid point {dict(zip(names, values))}: {exc}") from None
            out.append(list(values) + _metric_row(cfg))
    return out


def _compare_row_task(args):
    rc, names, rows = args
    out = []
    prev = {}
    for values in rows:
        p = _cell_params(rc, names, values)
        line = list(values)
        rates = []
        for s in rc.strategies:
            res = _optimise(rc, p, s, start=[prev[s]] if s in prev else None)
            prev[s] = res
            m = res.metrics
            vals = ([math.nan, math.nan, 0.0, math.nan] if m is None else
                    [m.log_negativity, m.gain, m.probability, m.rate])
            line += vals
            rates.append(-math.inf if m is None else m.rate)
        best = max(range(len(rates)), key=lambda k: (rates[k], -k))
        out.append(line + [rc.strategies[best].label])
    return out


def _threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _run_rows(task, rc, axes):
    """Evaluate the grid row by row (first axis outermost), in grid order.

    Each row is one task so that warm starts, and hence results, do not
    depend on the number of workers.
    """
    names = [a.name for a in axes]
    grids = [a.values() for a in axes]
    if len(axes) == 1:
        rows = [[(v,)] for v in grids[0]] if not (rc.optimize or rc.strategies) else \
            [[(v,) for v in grids[0]]]
    else:
        rows = [[(u, v) for v in grids[1]] for u in grids[0]]
    jobs = [(rc, names, r) for r in rows]
    n = _threads()
    if n == 1 or len(jobs) == 1:
        chunks = [task(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(task, jobs))
    return names, [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, str):
        return v
    return "%.12g" % v


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _json(obj):
    return json.dumps(_clean(obj), indent=2) + "\n"


def _records(header, rows):
    return [dict(zip(header, r)) for r in rows]


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_evaluate(rc: RunConfig, fmt):
    cfg = build_config(rc.params, rc.strategy, rc.truncation)
    m = evaluate(cfg, rc.route)
    below = not m.gain > 0.0
    if fmt == "csv":
        text = _csv(METRIC_COLUMNS, [[m.log_negativity, m.gain, m.probability, m.rate]])
    else:
        text = _json({"log_negativity_bits": m.log_negativity, "negativity": m.negativity,
                      "gain": m.gain, "probability": m.probability, "rate": m.rate,
                      "baseline_log_negativity": m.baseline_log_negativity,
                      "strategy": rc.strategy.label, "below_threshold": below})
    return text, EXIT_BELOW if below else EXIT_OK


def _check_axes(rc, lo=1, hi=2):
    if not lo <= len(rc.axes) <= hi:
        raise ConfigError(f"expected {lo} to {hi} sweep axes, got {len(rc.axes)}")


def cmd_sweep(rc: RunConfig, fmt):
    _check_axes(rc)
    names, rows = _run_rows(_sweep_row_task, rc, rc.axes)
    header = names + list(METRIC_COLUMNS) + (list(OPT_COLUMNS) if rc.optimize else [])
    if fmt == "json":
        return _json(_records(header, rows)), EXIT_OK
    return _csv(header, rows), EXIT_OK


def cmd_optimize(rc: RunConfig, fmt):
    res = _optimise(rc, rc.params, rc.strategy)
    code = EXIT_BELOW if res.below_threshold else EXIT_OK
    if fmt == "csv":
        m = res.metrics
        metric = ([math.nan] * 4 if m is None else
                  [m.log_negativity, m.gain, m.probability, m.rate])
        row = [res.lambda_opt, res.alpha2_opt, res.alpha2_prime_opt] + metric + \
              [int(res.below_threshold)]
        return _csv(list(OPT_COLUMNS) + list(METRIC_COLUMNS) + ["below_threshold"], [row]), code
    return _json(res.as_dict()), code


def cmd_compare(rc: RunConfig, fmt):
    if not rc.strategies:
        raise ConfigError("compare needs a non-empty 'strategies' list")
    _check_axes(rc)
    names, rows = _run_rows(_compare_row_task, rc, rc.axes)
    header = list(names)
    for s in rc.strategies:
        header += [f"{s.label}.{c}" for c in METRIC_COLUMNS]
    header.append("best")
    if fmt == "json":
        return _json(_records(header, rows)), EXIT_OK
    return _csv(header, rows), EXIT_OK


COMMANDS = {"evaluate": (cmd_evaluate, "json"), "sweep": (cmd_sweep, "csv"),
            "optimize": (cmd_optimize, "json"), "compare": (cmd_compare, "csv")}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which here means "below threshold"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="subtract-sim",
                description="Entanglement gain of photon-subtracted two-mode squeezed states.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="flat JSON config file")
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"),
                   help="output format (default: json for evaluate/optimize, csv otherwise)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    func, default_fmt = COMMANDS[args.command]
    try:
        rc = load_config(args.config)
        fmt = args.format or rc.format or default_fmt
        text, code = func(rc, fmt)
    except ImpossibleEventError as exc:
        print(f"subtract-sim: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except (ConfigError, DomainError) as exc:
        print(f"subtract-sim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SubtractSimError as exc:
        print(f"subtract-sim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(text, args.out or rc.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
