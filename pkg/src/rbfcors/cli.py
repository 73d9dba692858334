"""Command-line front end.

Three subcommands:

* ``run`` — optimize a built-in or external objective from a JSON config and
  write the evaluation history as CSV.
* ``lhs`` — emit an improved Latin-hypercube design as CSV.
* ``surface`` — refit the response surface from a history CSV and dump it on
  a regular grid for external contour plotting.

External objectives are subprocesses speaking a line protocol: one
whitespace-separated point per line on standard input, one scalar per line
back on standard output.  Every output file is written atomically
(temporary file plus rename), and all floats use their shortest
round-tripping decimal form so identical runs produce byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 objective failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import queue
import re
import subprocess
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .benchmarks import builtin
from .cors import ProposalSettings
from .engine import ObjectiveError, OptimizationConfig, run
from .lhs import diagonal_lh, improve_lh, spread
from .rbf import SingularFitError, compute_space_scaling, fit, refit_with_scaling
from .scaling import BoundedDomain

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OBJECTIVE = 3

_BUILTIN_NAMES = ("multimodal", "valley", "sphere")


class ConfigError(Exception):
    """Invalid configuration or input artifact; maps to exit code 2."""


class ObjectiveLaunchError(Exception):
    """External objective command could not be started; exit code 3."""


# Allowed config keys and the JSON types accepted for each.  None in a type
# tuple permits JSON null (key treated as absent).
_CONFIG_KEYS = {
    "objective": (str, list),
    "lower": (list,),
    "upper": (list,),
    "history_out": (str,),
    "n_init": (int,),
    "n_iter": (int,),
    "initial_density": (int, float),
    "decay_exponent": (int, float),
    "keep_fraction": (int, float),
    "lh_attempts": (int,),
    "cloud_size": (int,),
    "best_fraction": (int, float),
    "workers": (int,),
    "batch_size": (int, None),
    "seed": (int, None),
    "use_space_rescaling": (bool,),
    "maximize": (bool,),
    "proposal": (dict,),
}
_PROPOSAL_KEYS = {
    "uniform_per_dim": (int,),
    "local_candidates": (int,),
    "pattern_steps": (int,),
    "initial_step": (int, float),
    "min_step": (int, float),
}
_REQUIRED_KEYS = ("objective", "n_init", "n_iter")


def _key_line(raw: str, key: str) -> int | None:
    """1-based line of the first occurrence of "key": in the raw JSON text."""
    pattern = re.compile(r'"' + re.escape(key) + r'"\s*:')
    for number, line in enumerate(raw.splitlines(), start=1):
        if pattern.search(line):
            return number
    return None


def _located(raw: str, key: str | None, message: str) -> ConfigError:
    line = _key_line(raw, key) if key else None
    if line is not None:
        return ConfigError(f"line {line}: {message}")
    return ConfigError(message)


def _check_type(raw: str, key: str, value, allowed) -> bool:
    """Validate a config value's JSON type; returns True if the key should be
    treated as absent (JSON null where permitted)."""
    if value is None:
        if None in allowed:
            return True
        raise _located(raw, key, f"key {key!r} must not be null")
    types = tuple(t for t in allowed if t is not None)
    # bool is an int subclass; only accept it where bool is listed.
    if isinstance(value, bool) and bool not in types:
        raise _located(raw, key, f"key {key!r} must not be a boolean")
    if not isinstance(value, types):
        names = " or ".join(t.__name__ for t in types)
        raise _located(raw, key, f"key {key!r} must be {names}")
    return False


@dataclass
class RunSpec:
    """Everything cmd_run needs, resolved from the config file."""

    config: OptimizationConfig
    domain: BoundedDomain
    objective_name: str | None
    objective_command: list[str] | None
    history_out: str


def load_run_config(path: str) -> RunSpec:
    try:
        with open(path, encoding="utf-8") as handle:
            raw = handle.read()
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}")
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    values: dict = {}
    for key, value in doc.items():
        if key not in _CONFIG_KEYS:
            raise _located(raw, key, f"unknown key {key!r}")
        if not _check_type(raw, key, value, _CONFIG_KEYS[key]):
            values[key] = value
    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")

    proposal = ProposalSettings()
    if "proposal" in values:
        fields: dict = {}
        for key, value in values["proposal"].items():
            if key not in _PROPOSAL_KEYS:
                raise _located(raw, key, f"unknown proposal key {key!r}")
            _check_type(raw, key, value, _PROPOSAL_KEYS[key])
            fields[key] = value
        proposal = ProposalSettings(**fields)

    objective = values["objective"]
    objective_name: str | None = None
    objective_command: list[str] | None = None
    if isinstance(objective, str):
        if objective not in _BUILTIN_NAMES:
            raise _located(
                raw,
                "objective",
                f"unknown objective {objective!r}; built-ins are "
                f"{', '.join(_BUILTIN_NAMES)} (use a JSON array for an "
                f"external command)",
            )
        objective_name = objective
    else:
        if not objective or not all(isinstance(part, str) for part in objective):
            raise _located(
                raw, "objective", "external objective must be a non-empty array of strings"
            )
        objective_command = list(objective)

    domain = _resolve_domain(raw, values, objective_name)
    config = OptimizationConfig(
        n_init=values["n_init"],
        n_iter=values["n_iter"],
        initial_density=float(values.get("initial_density", 0.75)),
        decay_exponent=float(values.get("decay_exponent", 1.0)),
        keep_fraction=float(values.get("keep_fraction", 0.75)),
        lh_attempts=values.get("lh_attempts", 1000),
        cloud_size=values.get("cloud_size", 10000),
        best_fraction=float(values.get("best_fraction", 0.05)),
        workers=values.get("workers", 1),
        batch_size=values.get("batch_size"),
        seed=values.get("seed"),
        use_space_rescaling=values.get("use_space_rescaling", True),
        maximize=values.get("maximize", False),
        proposal=proposal,
    )
    _validate_config(raw, config, domain.dim)
    return RunSpec(
        config=config,
        domain=domain,
        objective_name=objective_name,
        objective_command=objective_command,
        history_out=values.get("history_out", "history.csv"),
    )


def _resolve_domain(raw: str, values: dict, objective_name: str | None) -> BoundedDomain:
    has_bounds = "lower" in values or "upper" in values
    if has_bounds and not ("lower" in values and "upper" in values):
        raise _located(raw, "lower", "lower and upper must be given together")
    if objective_name is None and not has_bounds:
        raise ConfigError("external objectives require explicit lower and upper bounds")

    if has_bounds:
        try:
            lower = np.asarray(values["lower"], dtype=float)
            upper = np.asarray(values["upper"], dtype=float)
        except (TypeError, ValueError):
            raise _located(raw, "lower", "bounds must be arrays of numbers")
        try:
            domain = BoundedDomain(lower, upper)
        except ValueError as err:
            raise _located(raw, "lower", str(err))
    else:
        domain = None

    if objective_name is not None:
        obj = builtin(objective_name, dim=domain.dim if domain is not None else 2)
        if domain is None:
            return BoundedDomain(obj.lower, obj.upper)
        if domain.dim != obj.dim:
            raise _located(
                raw,
                "lower",
                f"objective {objective_name!r} is {obj.dim}-dimensional, "
                f"bounds have {domain.dim} entries",
            )
        if np.any(domain.lower < obj.lower) or np.any(domain.upper > obj.upper):
            raise _located(
                raw,
                "lower",
                f"bounds must lie within the {objective_name!r} domain "
                f"[{obj.lower.tolist()}, {obj.upper.tolist()}]",
            )
    return domain


def _validate_config(raw: str, config: OptimizationConfig, dim: int) -> None:
    try:
        config.validate(dim)
        if not 0.0 < config.initial_density <= 1.0:
            raise ValueError(
                f"initial_density must be in (0, 1], got {config.initial_density}"
            )
        if config.decay_exponent <= 0.0:
            raise ValueError(
                f"decay_exponent must be positive, got {config.decay_exponent}"
            )
        if not 0.0 < config.keep_fraction <= 1.0:
            raise ValueError(
                f"keep_fraction must be in (0, 1], got {config.keep_fraction}"
            )
        if config.lh_attempts < 0:
            raise ValueError(f"lh_attempts must be non-negative, got {config.lh_attempts}")
        if config.cloud_size < 100:
            raise ValueError(f"cloud_size must be at least 100, got {config.cloud_size}")
        if not 0.0 < config.best_fraction <= 0.5:
            raise ValueError(
                f"best_fraction must be in (0, 0.5], got {config.best_fraction}"
            )
    except ValueError as err:
        message = str(err)
        key = next((k for k in _CONFIG_KEYS if k in message), None)
        raise _located(raw, key, message)


class CommandObjective:
    """External objective: one reusable subprocess per worker slot.

    A call borrows a subprocess from the pool, sends the point as a single
    whitespace-separated line, and reads one scalar line back, so up to
    `slots` evaluations can be in flight at once.
    """

    def __init__(self, argv: list[str], slots: int):
        self._procs: list[subprocess.Popen] = []
        self._pool: queue.SimpleQueue = queue.SimpleQueue()
        try:
            for _ in range(max(1, slots)):
                proc = subprocess.Popen(
                    argv,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                )
                self._procs.append(proc)
                self._pool.put(proc)
        except OSError as err:
            self.close()
            raise ObjectiveLaunchError(f"cannot start objective command {argv}: {err}")

    def __call__(self, x) -> float:
        proc = self._pool.get()
        try:
            point = " ".join(repr(float(c)) for c in np.asarray(x, dtype=float))
            proc.stdin.write(point + "\n")
            proc.stdin.flush()
            reply = proc.stdout.readline()
            if reply == "":
                try:
                    status = proc.wait(timeout=5.0)
                except subprocess.TimeoutExpired:
                    status = proc.poll()
                raise RuntimeError(f"objective command exited with status {status}")
            return float(reply)
        finally:
            self._pool.put(proc)

    def close(self) -> None:
        for proc in self._procs:
            if proc.stdin is not None:
                try:
                    proc.stdin.close()
                except OSError:
                    pass
        for proc in self._procs:
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False


def format_float(value) -> str:
    """Shortest decimal form that round-trips to the same float."""
    return repr(float(value))


def _atomic_write(path: str, text: str) -> None:
    """Write text to path via a temporary file so readers never see a
    half-written file and failures leave any existing file untouched."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def history_to_csv(history, dim: int) -> str:
    columns = (
        ["stage", "index"]
        + [f"x_{i + 1}" for i in range(dim)]
        + ["f_raw", "f_scaled", "radius", "fallback"]
    )
    lines = [",".join(columns)]
    for rec in history:
        row = [rec.stage, str(rec.index)]
        row.extend(format_float(c) for c in rec.x_unit)
        row.append(format_float(rec.f_raw))
        row.append("" if rec.f_scaled is None else format_float(rec.f_scaled))
        row.append("" if rec.radius_used is None else format_float(rec.radius_used))
        row.append("1" if rec.fallback else "0")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def parse_history(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a history CSV back as (unit points, raw values, scaled values)."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as err:
        raise ConfigError(f"cannot read history file: {err}")
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        raise ConfigError("history file is empty")
    header = rows[0]
    x_cols = [i for i, name in enumerate(header) if re.fullmatch(r"x_\d+", name)]
    expected = ["stage", "index"] + [f"x_{i + 1}" for i in range(len(x_cols))] + [
        "f_raw",
        "f_scaled",
        "radius",
        "fallback",
    ]
    if not x_cols or header != expected:
        raise ConfigError(
            "history header must be stage,index,x_1..x_d,f_raw,f_scaled,radius,fallback"
        )
    d = len(x_cols)
    points, raw, scaled = [], [], []
    for number, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ConfigError(f"history line {number}: expected {len(header)} fields")
        try:
            points.append([float(row[2 + i]) for i in range(d)])
            raw.append(float(row[2 + d]))
            value = row[3 + d]
            scaled.append(float(value) if value else float("nan"))
        except ValueError:
            raise ConfigError(f"history line {number}: malformed number")
    return np.asarray(points), np.asarray(raw), np.asarray(scaled)


def cmd_run(args) -> int:
    try:
        spec = load_run_config(args.config)
        if args.seed is not None:
            spec.config.seed = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError(f"workers must be at least 1, got {args.workers}")
            spec.config.workers = args.workers
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else spec.history_out

    pool: CommandObjective | None = None
    try:
        if spec.objective_command is not None:
            pool = CommandObjective(spec.objective_command, spec.config.workers)
            objective = pool
        else:
            objective = builtin(spec.objective_name, dim=spec.domain.dim).evaluate
        result = run(objective, spec.domain, spec.config, progress=True)
    except ObjectiveLaunchError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_OBJECTIVE
    except ObjectiveError as err:
        _atomic_write(out, history_to_csv(err.history, spec.domain.dim))
        print(f"error: {err}", file=sys.stderr)
        return EXIT_OBJECTIVE
    except (ValueError, SingularFitError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if pool is not None:
            pool.close()

    _atomic_write(out, history_to_csv(result.history, spec.domain.dim))
    best_x = ",".join(format_float(v) for v in result.best_x)
    print(f"best_x={best_x} best_f={format_float(result.best_f)}")
    return EXIT_OK


def cmd_lhs(args) -> int:
    try:
        if args.n < 2:
            raise ConfigError(f"n must be at least 2, got {args.n}")
        if args.d < 1:
            raise ConfigError(f"d must be at least 1, got {args.d}")
        if args.attempts < 0:
            raise ConfigError(f"attempts must be non-negative, got {args.attempts}")
        base = diagonal_lh(args.n, args.d)
        initial_spread = spread(base.unit_points())
        improved = improve_lh(base, args.attempts, np.random.default_rng(args.seed))
        final_spread = spread(improved.unit_points())
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    lines = [",".join(f"x_{i + 1}" for i in range(args.d))]
    for row in improved.unit_points():
        lines.append(",".join(format_float(c) for c in row))
    lines.append(f"# spread={format_float(initial_spread)} -> {format_float(final_spread)}")
    _atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_surface(args) -> int:
    try:
        points, raw_values, _ = parse_history(args.history)
        d = points.shape[1]
        if d != 2:
            raise ConfigError(f"surface grid requires a 2-dimensional history, got d={d}")
        if points.shape[0] < d + 2:
            raise ConfigError(
                f"history must contain at least d+2 = {d + 2} evaluations, "
                f"got {points.shape[0]}"
            )
        if args.resolution < 2:
            raise ConfigError(f"resolution must be at least 2, got {args.resolution}")
        model = fit(points, raw_values)
        if args.scaled:
            scaling = compute_space_scaling(model, rng=np.random.default_rng(args.seed))
            model = refit_with_scaling(points, raw_values, scaling)
    except (ConfigError, ValueError, SingularFitError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    axis = np.linspace(0.0, 1.0, args.resolution)
    first, second = np.meshgrid(axis, axis, indexing="ij")
    grid = np.stack([first.ravel(), second.ravel()], axis=1)
    values = model.evaluate_many(grid).reshape(args.resolution, args.resolution)
    lines = [
        f"# response surface on the unit square; rows: x_1 from 0 to 1, "
        f"columns: x_2 from 0 to 1, resolution={args.resolution}"
    ]
    for row in values:
        lines.append(",".join(format_float(v) for v in row))
    _atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbfcors",
        description="Global optimization of expensive black-box functions "
        "with a cubic RBF response surface.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an optimization from a JSON config")
    p_run.add_argument("--config", required=True, help="JSON config file")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument(
        "--workers", type=int, default=None, help="override parallel evaluation slots"
    )
    p_run.add_argument(
        "--out", default=None, help="history CSV path (overrides config history_out)"
    )
    p_run.set_defaults(func=cmd_run)

    p_lhs = sub.add_parser("lhs", help="emit an improved Latin-hypercube design")
    p_lhs.add_argument("--n", type=int, required=True, help="number of points (>= 2)")
    p_lhs.add_argument("--d", type=int, required=True, help="dimension (>= 1)")
    p_lhs.add_argument("--attempts", type=int, default=1000, help="swap attempts")
    p_lhs.add_argument("--seed", type=int, default=None, help="RNG seed")
    p_lhs.add_argument("--out", default="lhs.csv", help="output CSV path")
    p_lhs.set_defaults(func=cmd_lhs)

    p_surface = sub.add_parser(
        "surface", help="dump the refitted response surface on a grid"
    )
    p_surface.add_argument("--history", required=True, help="history CSV from `run`")
    p_surface.add_argument(
        "--resolution", type=int, default=101, help="grid nodes per axis"
    )
    group = p_surface.add_mutually_exclusive_group()
    group.add_argument(
        "--scaled",
        dest="scaled",
        action="store_true",
        help="apply covariance-based space rescaling before refitting",
    )
    group.add_argument(
        "--unscaled",
        dest="scaled",
        action="store_false",
        help="plain fit without space rescaling (default)",
    )
    p_surface.add_argument(
        "--seed", type=int, default=0, help="seed for the rescaling point cloud"
    )
    p_surface.add_argument("--out", default="surface.csv", help="output CSV path")
    p_surface.set_defaults(func=cmd_surface, scaled=False)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
