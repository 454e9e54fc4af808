"""Command-line entry point.

Every run writes a flat ``key=value`` report whose ``config.*`` entries list
every parameter after defaults are resolved; ``pairmmd replay`` feeds them
back.  Exit status: 0 on success, 2 for invalid input, 1 for internal errors.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as pio
from .cluster import cluster_pairs
from .data import midpoint_grid
from .errors import PairMMDError
from .kernel import METRICS, KernelSpec
from .metric import empirical_quantile, kde_density
from .missingness import estimate_weights
from .simgen import (ALT_AGES, NULL_AGES, TABLE1_RHOS, ScenarioConfig, generate,
                     replication_streams, rows_to_table, run_study)
from .testing import MarConfig, McarConfig, mar_test, mcar_test

INTERFACE_VERSION = "1.0"
FULL_SIZES = dict(n1=150, n2=150, n3=150, n=300, reps=2000, bootstrap=2000)
DESK_SIZES = dict(n1=50, n2=50, n3=50, n=100, reps=500, bootstrap=300)

# flags that are switches; echoed as true/false
SWITCHES = {"plus-one", "self-normalize", "table1"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _floats_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _range(text):
    vals = _floats_list(text)
    if len(vals) != 2 or vals[0] > vals[1]:
        raise argparse.ArgumentTypeError(f"expected lo,hi with lo <= hi, got {text!r}")
    return tuple(vals)


def _auto_float(text):
    if text == "auto":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                   help="worker cap; never changes results")
    p.add_argument("--report", help="write the key=value report here instead of stdout")


def _test_flags(p):
    p.add_argument("--input", required=True)
    p.add_argument("--covariates")
    p.add_argument("--bootstrap", type=_positive_int, default=2000)
    p.add_argument("--l-param", type=_auto_float, default=None,
                   help="wild-bootstrap dependence length (default sqrt(n1))")
    p.add_argument("--bandwidth", type=_auto_float, default=None,
                   help="kernel sigma^2 (default median heuristic)")
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--plus-one", action="store_true")
    _common(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pairmmd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"pairmmd {__version__} (interface {INTERFACE_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test-mcar", help="kernel test with data missing completely at random")
    _test_flags(p)
    p.add_argument("--alpha", type=_auto_float, default=None,
                   help="weight of the paired statistic (default n1/n)")

    p = sub.add_parser("test-mar", help="inverse-probability-weighted test under MAR")
    _test_flags(p)
    _weight_flags(p)

    p = sub.add_parser("cluster", help="weighted kernel clustering of complete pairs")
    p.add_argument("--input", required=True)
    p.add_argument("--covariates")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--max-sweeps", type=_positive_int, default=100)
    p.add_argument("--restarts", type=_positive_int, default=5)
    p.add_argument("--bandwidth", type=_auto_float, default=None)
    _weight_flags(p)
    p.add_argument("--out", required=True, help="id,cluster CSV")
    p.add_argument("--curves", help="per-cluster mean curves CSV (default <out>.curves.csv)")
    _common(p)

    p = sub.add_parser("simulate", help="rejection-rate study on synthetic quantile data")
    p.add_argument("--scenario", choices=("mcar", "mar", "both"))
    p.add_argument("--rho", type=_floats_list)
    for name in ("n1", "n2", "n3", "n", "reps", "bootstrap"):
        p.add_argument(f"--{name}", type=_positive_int)
    p.add_argument("--z1", type=_range, default=NULL_AGES)
    p.add_argument("--z2", type=_range, default=NULL_AGES)
    p.add_argument("--l-param", type=_auto_float, default=None)
    p.add_argument("--alpha", type=_auto_float, default=None)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--table1", action="store_true",
                   help="every scenario, rho and hypothesis cell of the study table")
    p.add_argument("--full-scale", action="store_true",
                   help="--table1 at 150 per block / n=300, 2000 replications, B=2000")
    p.add_argument("--desk", action="store_true",
                   help="smaller default sizes: 50 per block / n=100, 500 replications, B=300")
    p.add_argument("--out", default="table.csv")
    p.add_argument("--emit-dataset", help="write replication 0 of the first cell as CSV")
    p.add_argument("--emit-covariates", help="covariates of the emitted dataset (MAR only)")
    _common(p)

    p = sub.add_parser("kde", help="density and quantile function of a sample")
    p.add_argument("--input", required=True, help="one-column CSV, optional header")
    p.add_argument("--bandwidth", type=_auto_float, default=None,
                   help="smoothing bandwidth (default Silverman's rule)")
    p.add_argument("--grid-size", type=_positive_int, default=512)
    p.add_argument("--quantile-size", type=_positive_int, default=100)
    p.add_argument("--out", help="y,density CSV (default stdout)")
    p.add_argument("--quantiles", help="t,quantile CSV on the midpoint grid")
    _common(p, seed=False)

    p = sub.add_parser("replay", help="rerun the configuration recorded in a report")
    p.add_argument("source", help="report written by an earlier run")
    p.add_argument("extra", nargs=argparse.REMAINDER,
                   help="further flags, e.g. output paths or --report")
    return parser


def _weight_flags(p):
    p.add_argument("--pi-floor", type=float, default=0.01)
    p.add_argument("--ridge", type=float, default=1e-6)
    p.add_argument("--self-normalize", action="store_true")


def _check_metric(ds, metric):
    if metric is not None and metric != ds.metric:
        raise PairMMDError(f"{ds.kind} observations need --metric {ds.metric}, got {metric}")


def _spec(ds, bandwidth):
    return None if bandwidth is None else KernelSpec(bandwidth, ds.metric)


def _replicas_path(report):
    return None if report is None else f"{report}.replicas.csv"


def _cmd_test_mcar(a):
    ds = pio.read_dataset(a.input, a.covariates)
    _check_metric(ds, a.metric)
    res = mcar_test(ds, McarConfig(alpha=a.alpha, n_bootstrap=a.bootstrap, l_param=a.l_param,
                                   seed=a.seed, plus_one=a.plus_one, threads=a.threads),
                    _spec(ds, a.bandwidth))
    config = [("input", a.input), ("covariates", a.covariates), ("alpha", res.alpha),
              ("bootstrap", res.n_bootstrap), ("l-param", res.l_param), ("seed", res.seed),
              ("bandwidth", res.bandwidth), ("metric", res.metric), ("plus-one", res.plus_one)]
    results = _test_results(res)
    results += [("paired_statistic", res.extras["paired_statistic"]),
                ("unpaired_statistic", res.extras["unpaired_statistic"])]
    return config, results, res.replicas


def _cmd_test_mar(a):
    ds = pio.read_dataset(a.input, a.covariates)
    _check_metric(ds, a.metric)
    mode = "self-normalized" if a.self_normalize else "raw"
    res = mar_test(ds, MarConfig(n_bootstrap=a.bootstrap, l_param=a.l_param, seed=a.seed,
                                 normalization=mode, pi_floor=a.pi_floor, ridge=a.ridge,
                                 plus_one=a.plus_one, threads=a.threads),
                   _spec(ds, a.bandwidth))
    config = [("input", a.input), ("covariates", a.covariates),
              ("bootstrap", res.n_bootstrap), ("l-param", res.l_param), ("seed", res.seed),
              ("bandwidth", res.bandwidth), ("metric", res.metric),
              ("pi-floor", a.pi_floor), ("ridge", a.ridge),
              ("self-normalize", a.self_normalize), ("plus-one", res.plus_one)]
    results = _test_results(res)
    results.append(("weight_total", res.extras["weight_total"]))
    coef = res.extras.get("logistic_coef")
    results.append(("logistic_features", "none" if coef is None else
                    ";".join(ds.covariate_names) if ds.covariates is not None
                    else "summaries"))
    results.append(("logistic_coef", "" if coef is None else ";".join(map(pio.fmt, coef))))
    results.append(("logistic_iterations", res.extras.get("logistic_iterations", 0)))
    return config, results, res.replicas


def _test_results(res):
    n1, n2, n3 = res.counts
    return [("statistic", res.statistic), ("p_value", res.p_value),
            ("n1", n1), ("n2", n2), ("n3", n3)]


def _cmd_cluster(a):
    ds = pio.read_dataset(a.input, a.covariates)
    mode = "self-normalized" if a.self_normalize else "raw"
    weights, _ = estimate_weights(ds, a.pi_floor, a.ridge, mode)
    fit = cluster_pairs(ds, weights.weights, a.k, a.max_sweeps, a.seed, a.restarts,
                        a.bandwidth, a.threads)
    pio.write_table(a.out, ["id", "cluster"],
                    [(rid, "unassigned" if lab is None else lab)
                     for rid, lab in zip(fit.ids, fit.labels)])
    curves = a.curves or f"{a.out}.curves.csv"
    if ds.kind == "quantile":
        cols = [pio.fmt(t) for t in ds.grid]
    else:
        cols = [f"x{i}" for i in range(ds.dim)]
    rows = []
    for c, (m1, m2) in enumerate(fit.mean_curves(ds.x1_complete, ds.x2_complete)):
        if m1 is None:
            continue
        rows.append([c, 1, *m1])
        rows.append([c, 2, *m2])
    pio.write_table(curves, ["cluster", "timepoint", *cols], rows)

    st = fit.state
    sizes = np.bincount(st.assignment, minlength=st.k)
    config = [("input", a.input), ("covariates", a.covariates), ("k", a.k),
              ("max-sweeps", a.max_sweeps), ("restarts", a.restarts), ("seed", a.seed),
              ("bandwidth", fit.bandwidth), ("pi-floor", a.pi_floor), ("ridge", a.ridge),
              ("self-normalize", a.self_normalize)]
    results = [("objective", st.objective), ("sweeps", st.sweeps),
               ("converged", st.converged), ("best_restart", st.restart),
               ("moves", len(st.moves)),
               ("cluster_sizes", ";".join(str(int(s)) for s in sizes)),
               ("unassigned", sum(lab is None for lab in fit.labels)),
               ("assignments", a.out), ("curves", curves)]
    return config, results, None


def _simulation_configs(a):
    sizes = dict(DESK_SIZES if a.desk and not a.full_scale else FULL_SIZES)
    if not a.full_scale:
        for key in sizes:
            if getattr(a, key) is not None:
                sizes[key] = getattr(a, key)
    table = a.table1 or a.full_scale
    scenario = a.scenario or ("both" if table else "mcar")
    scenarios = ("mcar", "mar") if scenario == "both" else (scenario,)
    rhos = tuple(a.rho) if a.rho is not None else (TABLE1_RHOS if table else (0.0,))
    hyps = (tuple(a.z2), ALT_AGES) if table else (tuple(a.z2),)
    hyps = tuple(dict.fromkeys(hyps))
    cells = []
    for scen in scenarios:
        for z2 in hyps:
            for rho in rhos:
                cells.append(ScenarioConfig(
                    scenario=scen, n1=sizes["n1"], n2=sizes["n2"], n3=sizes["n3"],
                    n=sizes["n"], rho=rho, z1=tuple(a.z1), z2=z2, reps=sizes["reps"],
                    n_bootstrap=sizes["bootstrap"], seed=a.seed, l_param=a.l_param,
                    alpha=a.alpha))
    config = [("scenario", scenario), ("rho", ",".join(map(pio.fmt, rhos))),
              *[(k, v) for k, v in sizes.items()],
              ("z1", ",".join(map(pio.fmt, a.z1))), ("z2", ",".join(map(pio.fmt, a.z2))),
              ("l-param", "auto" if a.l_param is None else a.l_param),
              ("alpha", "auto" if a.alpha is None else a.alpha),
              ("level", a.level), ("seed", a.seed), ("table1", table), ("out", a.out)]
    return cells, config


def _cmd_simulate(a):
    cells, config = _simulation_configs(a)
    if a.emit_dataset:
        ds = generate(cells[0], replication_streams(cells[0].seed, 0)[0])
        pio.write_dataset(ds, a.emit_dataset)
        if a.emit_covariates:
            pio.write_covariates(ds, a.emit_covariates)
    elif a.emit_covariates:
        raise PairMMDError("--emit-covariates needs --emit-dataset")
    rows = run_study(cells, level=a.level, threads=a.threads)
    table = rows_to_table(rows)
    header = list(table[0].keys())
    pio.write_table(a.out, header, [[d[h] for h in header] for d in table])
    results = []
    for i, d in enumerate(table):
        results += [(f"cell{i}.{h}", d[h]) for h in
                    ("scenario", "hypothesis", "rho", "z1", "z2", "rejection_rate",
                     "mean_n1", "mean_n2", "mean_n3")]
    results.append(("table", a.out))
    if a.emit_dataset:
        config.append(("emit-dataset", a.emit_dataset))
        config.append(("emit-covariates", a.emit_covariates))
    return config, results, None


def _read_sample(path):
    rows = pio._read_rows(path)
    start = 0
    if not pio._is_float(rows[0][1][0]):
        start = 1
    vals = []
    for lineno, row in rows[start:]:
        vals.append(pio._floats(path, lineno, row[:1])[0])
    if not vals:
        raise pio.InputError(f"{path}: no data rows")
    return np.array(vals)


def _cmd_kde(a):
    x = _read_sample(a.input)
    est = kde_density(x, a.bandwidth)
    grid = np.linspace(est.grid[0], est.grid[-1], a.grid_size)
    est = kde_density(x, est.bandwidth, grid)
    if a.out:
        pio.write_table(a.out, ["y", "density"], zip(est.grid, est.density))
    q = empirical_quantile(x, midpoint_grid(a.quantile_size))
    if a.quantiles:
        pio.write_table(a.quantiles, ["t", "quantile"], zip(q.grid, q.values))
    config = [("input", a.input), ("bandwidth", est.bandwidth), ("grid-size", a.grid_size),
              ("quantile-size", a.quantile_size), ("out", a.out), ("quantiles", a.quantiles)]
    results = [("n", x.size), ("integral", est.integral()), ("mean", float(x.mean())),
               ("median_quantile", float(np.interp(0.5, q.grid, q.values)))]
    if not a.out:
        sys.stdout.write("y,density\n" + "".join(
            f"{pio.fmt(y)},{pio.fmt(f)}\n" for y, f in zip(est.grid, est.density)))
    return config, results, None


COMMANDS = {"test-mcar": _cmd_test_mcar, "test-mar": _cmd_test_mar,
            "cluster": _cmd_cluster, "simulate": _cmd_simulate, "kde": _cmd_kde}


def replay_argv(report_text: str) -> list:
    """argv reproducing the run recorded in a report."""
    entries = pio.parse_report(report_text)
    command = entries.get("command")
    if command not in COMMANDS:
        raise pio.InputError(f"report names no known command ({command!r})")
    argv = [command]
    for key, value in entries.items():
        if not key.startswith("config."):
            continue
        flag = key[len("config."):]
        if flag in SWITCHES:
            if value == "true":
                argv.append(f"--{flag}")
        elif value != "":
            argv += [f"--{flag}", value]
    return argv


def _run(a):
    if a.command == "replay":
        try:
            text = Path(a.source).read_text()
        except OSError:
            raise pio.InputError(f"{a.source}: cannot read report") from None
        b = build_parser().parse_args(replay_argv(text) + list(a.extra))
        return _run(b)
    start = time.perf_counter()
    config, results, replicas = COMMANDS[a.command](a)
    items = [("command", a.command), ("version", __version__)]
    items += [(f"config.{k}", v) for k, v in config]
    items += [(f"result.{k}", v) for k, v in results]
    text = pio.format_report(items)
    if a.report:
        Path(a.report).write_text(text)
        if replicas is not None:
            pio.write_table(_replicas_path(a.report), ["b", "replica"], enumerate(replicas))
        Path(f"{a.report}.timing").write_text(
            f"wall_seconds={time.perf_counter() - start:.6f}\n")
    elif a.command != "kde" or a.out:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _run(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except PairMMDError as exc:
        print(f"pairmmd: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"pairmmd: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
