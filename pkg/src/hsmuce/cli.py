"""Command-line interface: ``hsmuce fit | simulate-critvals | bounds | benchmark``.

Errors exit with a distinct code and a single ``error[<code>]: <reason>`` line
on stderr: 2 parse error, 3 invalid configuration, 4 cache version mismatch,
5 non-finite input, 6 other cache or I/O failure.
"""

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import theory
from .critical_values import (
    DEFAULT_M,
    DEFAULT_SEED,
    RNG_ID,
    balance,
    cache_path,
    equal_weights,
    get_cache,
    simulate_statistics,
    store_cache,
)
from .errors import CacheError, CacheVersionError, DomainError, NumericInputError, ScenarioError
from .estimator import fit
from .intervals import build, canonical_kind, dyadic_depth
from .simulation import HSmuceMethod, read_config, run_experiment, scenario_dict

EXIT_PARSE, EXIT_CONFIG, EXIT_VERSION, EXIT_NUMERIC, EXIT_IO = 2, 3, 4, 5, 6


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _json_value(x):
    if isinstance(x, dict):
        return {str(k): _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_json_value(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return x


def _dump_json(obj):
    return json.dumps(_json_value(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def read_observations(path, column=None):
    """Numeric column from a UTF-8 CSV/TSV file with an optional header row."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror}") from None
    rows = [r for r in csv.reader(io.StringIO(text), delimiter="\t" if "\t" in text else ",") if r]
    if not rows:
        raise CliError(EXIT_PARSE, f"{path}: no data")

    def numeric(cell):
        try:
            float(cell)
            return True
        except ValueError:
            return False

    header = None
    if not all(numeric(c) for c in rows[0]):
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    if column is None:
        col = 0
    elif column.isdigit():
        col = int(column) - 1
    elif header is not None and column in header:
        col = header.index(column)
    else:
        raise CliError(EXIT_CONFIG, f"column {column!r} not found")
    values = []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if col >= len(row):
            raise CliError(EXIT_PARSE, f"{path}:{lineno}: missing column {col + 1}")
        try:
            values.append(float(row[col]))
        except ValueError:
            raise CliError(EXIT_PARSE, f"{path}:{lineno}: not a number: {row[col]!r}") from None
    y = np.asarray(values)
    if len(y) < 2:
        raise CliError(EXIT_CONFIG, "need at least two observations")
    if not np.all(np.isfinite(y)):
        raise CliError(EXIT_NUMERIC, f"{path}: input contains NaN or infinite values")
    return y


def _parse_weights(text):
    try:
        return np.array([float(w) for w in text.split(",")])
    except ValueError:
        raise CliError(EXIT_PARSE, f"cannot parse weights {text!r}") from None


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise CliError(EXIT_CONFIG, f"alpha must lie in (0, 1), got {alpha}")


def cmd_fit(args):
    _check_alpha(args.alpha)
    y = read_observations(args.input, args.column)
    n = len(y)
    kind = canonical_kind(args.system)
    system = build(n, kind)
    if args.weights and args.equal_weights:
        raise CliError(EXIT_CONFIG, "--weights and --equal-weights are exclusive")
    weights = _parse_weights(args.weights) if args.weights else equal_weights(system.d)
    cache = get_cache(n, kind, args.M, args.seed, args.cache_dir)
    cv = balance(cache, args.alpha, weights, labels=system.labels)
    start = time.perf_counter()
    res = fit(y, system, cv)
    runtime = time.perf_counter() - start
    step = res.fit.sample()
    if args.format == "csv":
        _write(band_csv(res, step), args.out)
    else:
        report = {
            "inputs": {
                "n": n,
                "alpha": args.alpha,
                "weights": list(cv.weights),
                "system": kind,
                "M": cv.M,
                "seed": cv.seed,
                "rng": cv.rng_id,
                "n_sim": cv.n_sim,
                "critical_values": list(cv.q),
                "cache_id": cache_path(".", kind, cv.n_sim, cv.M, cv.seed).name,
            },
            "k_hat": res.k_hat,
            "change_indices": list(res.change_indices),
            "change_locations": list(res.fit.taus),
            "segment_values": list(res.fit.values),
            "confidence_interval_indices": [[int(a), int(b)] for a, b in zip(res.limits.left, res.limits.right)],
            "confidence_intervals": [list(ci) for ci in res.cis],
            "band": [[lo, hi] for lo, hi in zip(res.band_lower, res.band_upper)],
            "cost": res.cost,
            "worst_margin": res.worst_margin,
            "runtime_seconds": runtime,
        }
        _write(_dump_json(report), args.out)
        if args.band_out:
            _write(band_csv(res, step), args.band_out)
    return 0


def band_csv(res, step):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "x", "y_fit", "band_lo", "band_hi"])
    n = res.n
    for i in range(n):
        w.writerow([i + 1, repr((i + 1) / n), repr(float(step[i])),
                    repr(float(res.band_lower[i])), repr(float(res.band_upper[i]))])
    return buf.getvalue()


def cmd_simulate(args):
    if args.M < 2 or args.n < 2:
        raise CliError(EXIT_CONFIG, "need --n >= 2 and --M >= 2")
    cache = simulate_statistics(args.n, args.system, args.M, args.seed, n_jobs=args.jobs)
    out = args.out
    if out is None:
        if args.cache_dir is None:
            raise CliError(EXIT_CONFIG, "give --out or --cache-dir")
        out = cache_path(args.cache_dir, cache.kind, cache.n_sim, cache.M, cache.seed)
    path = store_cache(cache, out)
    summary = {"path": str(path), "n_sim": cache.n_sim, "M": cache.M, "seed": cache.seed,
               "kind": cache.kind, "rng": RNG_ID, "labels": list(cache.labels)}
    sys.stdout.write(_dump_json(summary))
    return 0


def _marker(value):
    return {"condition_not_met": value.reason} if isinstance(value, theory.Unmet) else value


def cmd_bounds(args):
    _check_alpha(args.alpha)
    d = dyadic_depth(args.n)
    weights = _parse_weights(args.weights) if args.weights else equal_weights(d)
    if len(weights) != d:
        raise CliError(EXIT_CONFIG, f"expected {d} weights for n={args.n}")
    out = {
        "overestimation": {f"P(K_hat > K + {2 * k})": theory.overestimation_bound(k, args.alpha) for k in range(4)},
        "overestimation_expectation": theory.overestimation_expectation(args.alpha),
        "critical_value_bounds": {
            str(k): _marker(theory.critval_upper_bound(args.n, k, args.alpha, weights[k - 1]))
            for k in range(1, d + 1)
        },
    }
    if args.delta is not None and args.lam is not None and args.K is not None:
        sb_scale = math.floor(math.log2(args.n * args.lam / 4)) if args.n * args.lam >= 4 else 0
        beta = weights[sb_scale - 1] if 1 <= sb_scale <= d else 0.0
        sb = theory.ScenarioBounds(args.n, args.delta, args.lam, args.K, args.alpha, beta)
        eta = theory.underestimation_eta(sb)
        out["underestimation"] = _marker(
            {"eta": eta.eta, "P(K_hat < K)": eta.prob_bound, "E[(K - K_hat)_+]": eta.expectation_bound}
            if eta else eta)
        out["detection_scale"] = sb_scale
    _write(_dump_json(out), args.out)
    return 0


def cmd_benchmark(args):
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.config}: {exc.strerror}") from None
    try:
        scenario, method = read_config(text)
    except (ValueError, TypeError, KeyError) as exc:
        raise CliError(EXIT_CONFIG, f"invalid config: {exc}") from None
    rows = []
    for alpha in method["alphas"]:
        _check_alpha(alpha)
        m = HSmuceMethod(alpha, method["weights"], method["system"], method["M"], method["cv_seed"],
                         args.cache_dir)
        start = time.perf_counter()
        report = run_experiment(scenario, m, method["reps"])
        row = {"method": m.name, **report.summary(), "seconds": time.perf_counter() - start}
        rows.append(row)
    if args.format == "csv":
        diffs = sorted({int(k) for r in rows for k in r["k_diff"]})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["method", "reps"] + [f"K_hat-K={d}" for d in diffs] + [
            "mean_abs_k_diff", "FPSLE", "FNSLE", "MISE", "MIAE"]
        w.writerow(head)
        for r in rows:
            w.writerow([r["method"], r["reps"]] + [r["k_diff"].get(str(d), 0.0) for d in diffs]
                       + [r["mean_abs_k_diff"], r["FPSLE"], r["FNSLE"], r["MISE"], r["MIAE"]])
        _write(buf.getvalue(), args.out)
    else:
        _write(_dump_json({"scenario": scenario_dict(scenario), "results": rows}), args.out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="hsmuce", description="Heterogeneous multiscale change-point estimation")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--system", default="dyadic", choices=["dyadic", "dyadic-length", "all"])
        sp.add_argument("--M", type=int, default=DEFAULT_M, help="Monte-Carlo repetitions")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED, help="simulation seed")
        sp.add_argument("--cache-dir", default=None)
        sp.add_argument("--out", default=None)

    f = sub.add_parser("fit", help="fit a step function to a data column")
    f.add_argument("input")
    f.add_argument("--column", default=None, help="1-based index or header name")
    f.add_argument("--alpha", type=float, default=0.1)
    f.add_argument("--weights", default=None, help="comma-separated, one per scale")
    f.add_argument("--equal-weights", action="store_true")
    f.add_argument("--format", choices=["json", "csv"], default="json")
    f.add_argument("--band-out", default=None, help="also write the band CSV here")
    common(f)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate-critvals", help="simulate and store the null statistics")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--jobs", type=int, default=1)
    common(s)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", help="finite-sample guarantees for a signal class")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--alpha", type=float, default=0.1)
    b.add_argument("--delta", type=float, default=None)
    b.add_argument("--lam", type=float, default=None)
    b.add_argument("--K", type=int, default=None)
    b.add_argument("--weights", default=None)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bounds)

    e = sub.add_parser("benchmark", help="run a simulation experiment from a config file")
    e.add_argument("--config", required=True)
    e.add_argument("--cache-dir", default=None)
    e.add_argument("--out", default=None)
    e.add_argument("--format", choices=["json", "csv"], default="json")
    e.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        code, msg = exc.code, str(exc)
    except CacheVersionError as exc:
        code, msg = EXIT_VERSION, str(exc)
    except CacheError as exc:
        code, msg = EXIT_IO, str(exc)
    except NumericInputError as exc:
        code, msg = EXIT_NUMERIC, str(exc)
    except (DomainError, ScenarioError) as exc:
        code, msg = EXIT_CONFIG, str(exc)
    sys.stderr.write(f"error[{code}]: {msg}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
