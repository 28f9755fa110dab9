"""Command-line interface: ``dpbayes {calibrate,tune,test,power,selfcheck}``.

Settings come from an optional INI file (``--config``) and from flags;
flags win. Within the file, keys in ``[defaults]`` apply to every command
and keys in a section named after the command override them. Keys use the
flag names with dashes replaced by underscores, e.g. ``grid_m = 2-10``.

Exit codes: 0 success, 2 invalid input, 3 runtime or numerical failure,
4 self-check failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import oracle, specfun
from .bayesfactor import ScalePolicy, log_ratio, truncated_bf
from .calibration import (
    CalibrationSpec,
    DataSource,
    PrivatePipeline,
    quantile_cutoff,
    simulate_statistics,
    tune_hyperparams,
)
from .experiments import ContingencyChi2, get_experiment, power_rows_to_csv, run_power_curve
from .mechanism import Mechanism, PrivacyConfig, decide, partition_evidence, privatize
from .statistics import DegenerateSampleError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3
EXIT_SELFCHECK = 4

_DEFAULTS = {
    "experiment": "t",
    "seed": 0,
    "alpha": 0.05,
    "epsilon": 1.0,
    "mechanism": "laplace",
    "n": 100,
    "m": 5,
    "a": 3.0,
    "n_mc": 1000,
    "effect_size": 0.3,
    "grid_m": "2-10",
    "grid_a": "1-5",
    "out": ".",
    "jobs": 1,
    "n_list": None,
    "fixed": None,
}


class CliError(Exception):
    """Invalid user input; reported with exit code 2."""


# --- value parsing --------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if sep:
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(text: str) -> list[float]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if sep and lo:
            out.extend(float(v) for v in range(int(lo), int(hi) + 1))
        else:
            out.append(float(part))
    return out


def _convert(key, value):
    try:
        if key in ("seed", "n", "m", "n_mc", "jobs"):
            return int(value)
        if key in ("alpha", "epsilon", "a", "effect_size"):
            return float(value)
        if key == "grid_m":
            grid = _int_list(value)
        elif key == "grid_a":
            grid = _float_list(value)
        elif key == "n_list":
            return None if value is None else _int_list(value)
        elif key == "fixed":
            if value is None:
                return None
            m, a = str(value).split(",")
            return int(m), float(a)
        else:
            return value
    except ValueError as exc:
        raise CliError(f"invalid value for {key}: {value!r} ({exc})") from None
    if not grid:
        raise CliError(f"{key} must not be empty")
    return grid


def _settings(args) -> dict:
    values = dict(_DEFAULTS)
    if args.command == "power":
        values["experiment"] = "all"
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise CliError(f"cannot parse config {path}: {exc}") from None
        for section in ("defaults", args.command):
            if parser.has_section(section):
                for key, value in parser.items(section):
                    if key not in _DEFAULTS:
                        raise CliError(f"unknown key {key!r} in section [{section}] of {path}")
                    values[key] = value
    for key in _DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    out = {k: _convert(k, v) for k, v in values.items()}
    _validate(out)
    return out


def _validate(s):
    if not 0 < s["alpha"] < 1:
        raise CliError(f"alpha must lie in (0, 1), got {s['alpha']}")
    if not (s["epsilon"] > 0 and math.isfinite(s["epsilon"])):
        raise CliError(f"epsilon must be positive, got {s['epsilon']}")
    if s["mechanism"] not in ("laplace", "gaussian"):
        raise CliError(f"mechanism must be laplace or gaussian, got {s['mechanism']!r}")
    if s["n_mc"] < 100:
        raise CliError(f"n_mc must be at least 100, got {s['n_mc']}")
    if s["n"] < 1 or s["m"] < 1 or not s["a"] > 0:
        raise CliError("n, m and a must be positive")
    if not 0 <= s["seed"] < 2**64:
        raise CliError("seed must lie in [0, 2**64)")
    if any(m < 1 for m in s["grid_m"]) or any(not a > 0 for a in s["grid_a"]):
        raise CliError("grid entries must be positive")
    if not s["effect_size"] > 0:
        raise CliError("effect_size must be positive")


def _out_dir(s) -> Path:
    path = Path(s["out"])
    if not path.is_dir():
        raise CliError(f"output directory does not exist: {path}")
    return path


def _num(x: float) -> str:
    """Shortest round-trip rendering."""
    return repr(float(x))


def _spec(s) -> CalibrationSpec:
    return CalibrationSpec(s["alpha"], s["n_mc"], s["seed"])


# --- data files ----------------------------------------------------------------------


def _parse_number(token, path, lineno):
    try:
        value = float(token)
    except ValueError:
        raise CliError(f"{path}:{lineno}: not a number: {token!r}") from None
    if not math.isfinite(value):
        raise CliError(f"{path}:{lineno}: non-finite value {token!r}")
    return value


def _data_lines(path):
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def read_dataset(experiment_name: str, path):
    """Parse a data file for the given experiment.

    ``t``/``z``: one number per line. ``chi2``: one row of four cell counts
    ``n00 n01 n10 n11`` (comma or space separated). ``f``: CSV with header
    ``y,x1,...,xp``.
    """
    path = Path(path)
    if not path.is_file():
        raise CliError(f"data file not found: {path}")
    if experiment_name in ("t", "z"):
        values = [_parse_number(line, path, lineno) for lineno, line in _data_lines(path)]
        if not values:
            raise CliError(f"{path}: no observations")
        return np.array(values)
    if experiment_name == "chi2":
        rows = list(_data_lines(path))
        if len(rows) != 1:
            raise CliError(f"{path}: expected exactly one row of four counts, got {len(rows)} rows")
        lineno, line = rows[0]
        tokens = line.replace(",", " ").split()
        if len(tokens) != 4:
            raise CliError(f"{path}:{lineno}: expected four counts, got {len(tokens)}")
        counts = [_parse_number(t, path, lineno) for t in tokens]
        if any(c < 0 or c != int(c) for c in counts):
            raise CliError(f"{path}:{lineno}: counts must be non-negative integers")
        return ContingencyChi2.records_from_counts([int(c) for c in counts])
    rows = list(_data_lines(path))
    if not rows:
        raise CliError(f"{path}: empty file")
    header = [h.strip() for h in rows[0][1].split(",")]
    p = len(header) - 1
    if p < 1 or header != ["y"] + [f"x{i}" for i in range(1, p + 1)]:
        raise CliError(f"{path}:{rows[0][0]}: header must be y,x1,...,xp")
    y, X = [], []
    for lineno, line in rows[1:]:
        tokens = next(csv.reader(io.StringIO(line)))
        if len(tokens) != p + 1:
            raise CliError(f"{path}:{lineno}: expected {p + 1} fields, got {len(tokens)}")
        vals = [_parse_number(t.strip(), path, lineno) for t in tokens]
        y.append(vals[0])
        X.append(vals[1:])
    if not y:
        raise CliError(f"{path}: no observations")
    return np.array(X), np.array(y)


def _experiment(s, p=2):
    name = s["experiment"]
    if name == "f":
        return get_experiment(name, p=p)
    return get_experiment(name)


# --- commands ------------------------------------------------------------------------


def cmd_calibrate(s, stdout) -> int:
    out = _out_dir(s)
    exp = _experiment(s)
    spec = _spec(s)
    pipeline = PrivatePipeline(exp, s["n"], s["m"], s["a"], s["epsilon"], s["mechanism"], ScalePolicy(s["effect_size"]))
    h = simulate_statistics(DataSource.null(exp, s["n"]), pipeline, spec)
    cutoff = quantile_cutoff(h, spec.alpha)
    with open(out / "calibration_samples.csv", "w", newline="") as fh:
        fh.write("replicate,H\n")
        fh.writelines(f"{r},{_num(v)}\n" for r, v in enumerate(h))
    with open(out / "cutoff.csv", "w", newline="") as fh:
        fh.write("experiment,n,M,a,epsilon,mechanism,alpha,n_mc,seed,cutoff\n")
        fh.write(
            f"{exp.name},{s['n']},{s['m']},{_num(s['a'])},{_num(s['epsilon'])},{s['mechanism']},"
            f"{_num(s['alpha'])},{s['n_mc']},{s['seed']},{_num(cutoff)}\n"
        )
    print(f"cutoff {_num(cutoff)}", file=stdout)
    return EXIT_OK


def cmd_tune(s, stdout) -> int:
    out = _out_dir(s)
    exp = _experiment(s)
    result = tune_hyperparams(
        exp,
        s["n"],
        s["grid_m"],
        s["grid_a"],
        s["epsilon"],
        _spec(s),
        mechanism=s["mechanism"],
        policy=ScalePolicy(s["effect_size"]),
        n_jobs=s["jobs"],
    )
    with open(out / "surface.csv", "w", newline="") as fh:
        fh.write("M,a,cutoff,power,mc_se\n")
        for m, a, cutoff, power, se in result.surface.rows():
            fh.write(f"{m},{_num(a)},{_num(cutoff)},{_num(power)},{_num(se)}\n")
    print(f"M {result.n_partitions}", file=stdout)
    print(f"a {_num(result.a_bound)}", file=stdout)
    return EXIT_OK


def cmd_test(s, data_path, stdout) -> int:
    """Run the private test. Only ``H``, the cutoff and the decision leave this function."""
    out = _out_dir(s)
    data = read_dataset(s["experiment"], data_path)
    exp = _experiment(s, p=data[0].shape[1] if s["experiment"] == "f" else 2)
    n = exp.n_obs(data)
    policy = ScalePolicy(s["effect_size"])
    pipeline = PrivatePipeline(exp, n, s["m"], s["a"], s["epsilon"], s["mechanism"], policy)
    spec = _spec(s)
    cutoff = quantile_cutoff(simulate_statistics(DataSource.null(exp, n), pipeline, spec), spec.alpha)
    try:
        f = partition_evidence(data, exp, pipeline.trunc, policy, s["seed"])
    except DegenerateSampleError as exc:
        raise CliError(f"{data_path}: {exc}") from None
    outcome = privatize(f, pipeline.trunc, PrivacyConfig(s["epsilon"], s["mechanism"], s["seed"]))
    reject = decide(outcome.privatized, cutoff)
    record = {
        "experiment": exp.name,
        "n": n,
        "M": s["m"],
        "a": s["a"],
        "epsilon": s["epsilon"],
        "mechanism": s["mechanism"],
        "alpha": s["alpha"],
        "seed": s["seed"],
        "H": outcome.privatized,
        "cutoff": cutoff,
        "decision": "REJECT" if reject else "ACCEPT",
    }
    (out / "test_result.json").write_text(json.dumps(record, indent=2) + "\n")
    print(f"H {_num(outcome.privatized)}", file=stdout)
    print(f"cutoff {_num(cutoff)}", file=stdout)
    print(record["decision"], file=stdout)
    return EXIT_OK


def cmd_power(s, stdout) -> int:
    out = _out_dir(s)
    names = ["t", "chi2", "f"] if s["experiment"] == "all" else [s["experiment"]]
    for name in names:
        exp = get_experiment(name)
        rows = run_power_curve(
            exp,
            _spec(s),
            n_list=s["n_list"],
            epsilon=s["epsilon"],
            fixed=s["fixed"],
            m_grid=s["grid_m"],
            a_grid=s["grid_a"],
            effect_settings={"grid": exp.effect_grid, "mid": [exp.mid_effect]},
            mechanism=s["mechanism"],
            policy=ScalePolicy(s["effect_size"]),
            n_jobs=s["jobs"],
        )
        target = out / f"power_{name}.csv"
        target.write_text(power_rows_to_csv(rows))
        print(f"wrote {target}", file=stdout)
    return EXIT_OK


def _identity_checks():
    """``(name, worst relative error, tolerance)`` for the special-function identities."""
    checks = []
    xs = np.linspace(0.01, 50.0, 200)
    err = np.max(np.abs(specfun.hyp1f1(1.0, 2.0, xs) * xs / np.expm1(xs) - 1.0))
    checks.append(("1F1(1,2;x) x = e^x - 1", float(err), 1e-10))
    worst = 0.0
    for a in (0.5, 1.0, 2.0, 5.0):
        x = np.linspace(0.0, 0.9, 91)
        worst = max(worst, float(np.max(np.abs(specfun.hyp2f1(a, 3.0, 3.0, x) * (1.0 - x) ** a - 1.0))))
    checks.append(("2F1(a,b;b;x) = (1-x)^-a", worst, 1e-10))
    rng = np.random.default_rng(0)
    r = 10.0 ** rng.uniform(-12, 12, 10_000)
    w = rng.uniform(0.001, 0.499, 10_000)
    g = truncated_bf(r, w)
    lo, hi = w / (1 - w), (1 - w) / w
    viol = float(np.max(np.maximum(lo - g, g - hi)))
    checks.append(("truncated BF bounds", max(viol, 0.0), 1e-12))
    return checks


def cmd_selfcheck(fixtures, regen: bool, stdout) -> int:
    path = Path(fixtures) if fixtures else oracle.FIXTURE_PATH
    if regen:
        print(f"regenerating {path}", file=stdout)
        oracle.regenerate_fixtures(path)
    elif not path.is_file():
        raise CliError(f"fixture file not found: {path} (use --regen-fixtures)")
    try:
        rows = oracle.read_fixtures(path)
    except ValueError as exc:
        raise CliError(str(exc)) from None

    ok = True
    worst = {}
    expected = {(fam, tuple(float(p) for p in params), float(t2)) for fam, grid in oracle.GRIDS.items() for params, t2 in grid}
    present = {(r.family, r.params, r.tau2) for r in rows}
    for key in sorted(expected - present):
        ok = False
        print(f"FAIL missing grid point {key[0]}{key[1]} tau2={key[2]:g}", file=stdout)
    for row in rows:
        closed = math.exp(log_ratio(row.family, row.params[0], *row.params[1:], tau2=row.tau2))
        rel = abs(closed - row.value) / abs(closed)
        if rel > worst.get(row.family, (-1.0,))[0]:
            worst[row.family] = (rel, row)
        if not rel <= row.accuracy:
            ok = False
            print(f"FAIL {row.label()}: closed form {_num(closed)} vs oracle {_num(row.value)} (rel {rel:.3g})", file=stdout)
    for family, (rel, row) in sorted(worst.items()):
        print(f"{family}: worst relative error {rel:.3g} at {row.label()}", file=stdout)
    for name, err, tol in _identity_checks():
        status = "ok" if err <= tol else "FAIL"
        ok &= err <= tol
        print(f"{name}: max error {err:.3g} [{status}]", file=stdout)
    print("PASS" if ok else "FAIL", file=stdout)
    return EXIT_OK if ok else EXIT_SELFCHECK


# --- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [defaults] and per-command sections")
    common.add_argument("--seed", help="master seed (unsigned 64-bit)")
    common.add_argument("--alpha", help="size of the test")
    common.add_argument("--epsilon", help="privacy budget")
    common.add_argument("--mechanism", choices=[m.value for m in Mechanism])
    common.add_argument("--experiment", help="t, z, chi2 or f (power also accepts all)")
    common.add_argument("--n", help="sample size")
    common.add_argument("--m", "-M", dest="m", help="number of partitions")
    common.add_argument("--a", dest="a", help="truncation bound")
    common.add_argument("--n-mc", dest="n_mc", help="Monte Carlo replicates")
    common.add_argument("--effect-size", dest="effect_size", help="standardized effect setting the prior scale")
    common.add_argument("--grid-m", dest="grid_m", help="partition grid, e.g. 2-10 or 2,4,8")
    common.add_argument("--grid-a", dest="grid_a", help="truncation grid, e.g. 1-5 or 0.5,1,2")
    common.add_argument("--out", help="existing output directory")
    common.add_argument("--jobs", help="worker threads (results do not depend on it)")

    parser = argparse.ArgumentParser(prog="dpbayes", description="Differentially private Bayes factor tests.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="Monte Carlo cutoff under the null")
    sub.add_parser("tune", parents=[common], help="power-maximizing (M, a)")
    p_test = sub.add_parser("test", parents=[common], help="run the private test on a data file")
    p_test.add_argument("data", help="data file")
    p_power = sub.add_parser("power", parents=[common], help="private and non-private power curves")
    p_power.add_argument("--n-list", dest="n_list", help="sample sizes, e.g. 25,50,100")
    p_power.add_argument("--fixed", help="use this M,a at every n instead of tuning")
    p_self = sub.add_parser("selfcheck", help="closed forms against frozen oracle values")
    p_self.add_argument("--fixtures", help="fixture file (default: the packaged one)")
    p_self.add_argument("--regen-fixtures", action="store_true", help="recompute fixtures by quadrature first")
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "selfcheck":
            return cmd_selfcheck(args.fixtures, args.regen_fixtures, stdout)
        s = _settings(args)
        if args.command == "calibrate":
            return cmd_calibrate(s, stdout)
        if args.command == "tune":
            return cmd_tune(s, stdout)
        if args.command == "test":
            return cmd_test(s, args.data, stdout)
        return cmd_power(s, stdout)
    except (CliError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    except (ArithmeticError, RuntimeError, oracle.OracleError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
