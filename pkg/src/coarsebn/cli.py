"""Command-line harness: data generation, learning, evaluation, likelihood
reports, and the seeded batch experiment.

Exit codes: 0 success, 1 usage, 2 data/format problem, 3 numerical failure.
Machine-readable CSV columns carry 17 significant digits; the console gets
6-digit summaries.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import aim as aim_mod
from . import em as em_mod
from .coarsen import CoarseningSpec, build_coarsening_network, generate_dataset
from .conservative import conservative_ensemble
from .data import read_dataset, write_dataset
from .errors import CoarseBNError, FormatError, NumericalError
from .evaluate import evaluate, kl_decomposed, kl_enumerate, mse, same_structure
from .likelihoods import (
    car_profile_loglik,
    exact_sat_profile_loglik,
    face_value_loglik,
    lr_statistic,
)
from .netformat import read_network, write_network
from .network import (
    Network,
    randomize_parameters,
    smooth,
    uniform_cpts,
    validate_network,
)
from .util import fmt17, stable_child_seed

EXPERIMENT_HEADER = [
    "run",
    "pct_missing",
    "ce_final_em",
    "ce_final_aim",
    "ce_diff",
    "mse_diff",
    "score",
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _load_net(path: str) -> Network:
    net = read_network(path)
    diags = validate_network(net)
    if diags:
        raise FormatError(f"{path}: " + "; ".join(diags))
    return net


# ----------------------------------------------------------------------
# experiment


@dataclass
class ExperimentConfig:
    net: Network
    coarsening: CoarseningSpec | None
    n: int
    z: int
    runs: int
    seed: int
    mechanism: Network | None = None   # fixed mechanism instead of random ones
    em_opts: em_mod.EmOptions | None = None


def run_experiment(cfg: ExperimentConfig) -> tuple[list[dict], list[str]]:
    """Generate, fit, and score `runs` incomplete datasets.

    Per run: derive a child seed; build a coarsening mechanism (or use the
    fixed one); sample n cases; fit EM from uniform rows; fit the adjusting
    imputation procedure initialized at the EM estimate; evaluate both
    smoothed estimates against the truth.  Failures are recorded and the
    remaining runs continue.
    """
    if cfg.coarsening is None and cfg.mechanism is None:
        raise FormatError("need a coarsening spec or a fixed mechanism")
    rows = []
    failures = []
    for r in range(cfg.runs):
        rng = np.random.default_rng(stable_child_seed(cfg.seed, r))
        try:
            mech = (
                cfg.mechanism
                if cfg.mechanism is not None
                else build_coarsening_network(cfg.net, cfg.coarsening, rng)
            )
            data, pct_missing = generate_dataset(mech, cfg.n, rng)
            em_res = em_mod.em_fit(
                cfg.net, data, cfg.em_opts or em_mod.EmOptions(init="uniform")
            )
            aim_res = aim_mod.aim_fit(
                cfg.net,
                em_res.network,
                data,
                aim_mod.AimOptions(z=cfg.z, seed=stable_child_seed(cfg.seed, r, "aim")),
            )
            rep_em = evaluate(cfg.net, em_res.network, em_res.row_counts, "em")
            rep_aim = evaluate(cfg.net, aim_res.network, aim_res.row_counts, "aim")
            rows.append(
                {
                    "run": r,
                    "pct_missing": pct_missing,
                    "ce_final_em": rep_em.ce,
                    "ce_final_aim": rep_aim.ce,
                    "ce_diff": rep_aim.ce - rep_em.ce,
                    "mse_diff": rep_aim.mse - rep_em.mse,
                    "score": aim_res.score,
                }
            )
        except CoarseBNError as exc:
            failures.append(f"run {r}: {exc}")
    return rows, failures


def _summary_cells(rows: list[dict]) -> dict[str, str]:
    cells = {"run": "summary"}
    for col in EXPERIMENT_HEADER[1:]:
        vals = [row[col] for row in rows if math.isfinite(row[col])]
        if not vals:
            cells[col] = ""
            continue
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        cells[col] = f"{mean:.6g}±{std:.6g}"
    return cells


def write_experiment_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EXPERIMENT_HEADER)
        for row in rows:
            writer.writerow(
                [row["run"]] + [fmt17(row[c]) for c in EXPERIMENT_HEADER[1:]]
            )
        if rows:
            summary = _summary_cells(rows)
            writer.writerow([summary[c] for c in EXPERIMENT_HEADER])


# ----------------------------------------------------------------------
# subcommands


def _cmd_gen_data(args) -> int:
    net = _load_net(args.net)
    spec = CoarseningSpec.parse(args.coarsening)
    rng = np.random.default_rng(args.seed)
    mech = build_coarsening_network(net, spec, rng)
    data, frac = generate_dataset(mech, args.n, rng)
    write_dataset(data, args.out)
    if args.emit_mechanism:
        write_network(mech, args.emit_mechanism)
    print(f"cases {args.n}")
    print(f"missing_fraction {frac:.6g}")
    return 0


def _cmd_randomize(args) -> int:
    net = _load_net(args.net)
    rng = np.random.default_rng(args.seed)
    write_network(randomize_parameters(net, rng), args.out)
    return 0


def _write_trace(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [row[0]] + [fmt17(v) for v in row[1:]]
            )


def _write_counts(path: str, net: Network, row_counts) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "row", "count"])
        for spec, counts in zip(net.nodes, row_counts):
            for r, k in enumerate(counts):
                writer.writerow([spec.name, r, fmt17(k)])


def _read_counts(path: str, net: Network) -> list[np.ndarray]:
    by_node = {spec.name: np.zeros(net.cpts[i].shape[0]) for i, spec in enumerate(net.nodes)}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["node", "row", "count"]:
            raise FormatError(f"{path}: expected header node,row,count")
        for cells in reader:
            if not cells:
                continue
            name, row, count = cells
            if name not in by_node:
                raise FormatError(f"{path}: unknown node {name!r}")
            by_node[name][int(row)] = float(count)
    return [by_node[spec.name] for spec in net.nodes]


def _cmd_learn(args) -> int:
    structure = _load_net(args.net_structure)
    data = read_dataset(args.data)

    if args.method == "em":
        if args.init == "em":
            raise UsageError("--init em is only meaningful for --method aim")
        init = args.init if not args.init.startswith("net:") else _load_net(args.init[4:])
        res = em_mod.em_fit(
            structure,
            data,
            em_mod.EmOptions(
                tol=args.tol, max_iters=args.max_iters, init=init, seed=args.seed
            ),
        )
        out_net = res.network if args.unsmoothed else res.smoothed
        write_network(out_net, args.out)
        if args.trace:
            _write_trace(
                args.trace, ["iteration", "loglik_per_unit", "excluded_weight"], res.trace
            )
        if args.counts_out:
            _write_counts(args.counts_out, res.network, res.row_counts)
        print(f"method em iterations {len(res.trace)} "
              f"loglik_per_unit {res.loglik_per_unit:.6g}")
        return 0

    if args.method == "aim":
        if args.init == "em":
            em_res = em_mod.em_fit(structure, data, em_mod.EmOptions(init="uniform"))
            theta0 = em_res.network
        elif args.init == "uniform":
            theta0 = uniform_cpts(structure)
        elif args.init.startswith("net:"):
            theta0 = _load_net(args.init[4:])
        else:
            raise UsageError(f"unknown --init {args.init!r}")
        res = aim_mod.aim_fit(
            structure,
            theta0,
            data,
            aim_mod.AimOptions(
                z=args.z, tol=args.tol, max_iters=args.max_iters, seed=args.seed
            ),
        )
        out_net = res.network if args.unsmoothed else res.smoothed
        write_network(out_net, args.out)
        if args.trace:
            _write_trace(
                args.trace, ["iteration", "score", "sat_lower_bound"], res.trace
            )
        if args.counts_out:
            _write_counts(args.counts_out, res.network, res.row_counts)
        print(f"method aim iterations {len(res.trace)} score {res.score:.6g}")
        return 0

    if args.method == "conservative":
        res = conservative_ensemble(structure, data, args.restarts, args.seed)
        # Midpoints of the envelope, renormalized into valid rows (exact
        # already for binary rows).
        cpts = []
        for mid in res.midpoint:
            cpts.append(mid / mid.sum(axis=1, keepdims=True))
        write_network(structure.with_cpts(cpts), args.out)
        if args.trace:
            with open(args.trace, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["node", "row", "state", "low", "mid", "high"])
                for i, spec in enumerate(structure.nodes):
                    for r in range(res.lower[i].shape[0]):
                        for s, label in enumerate(spec.states):
                            writer.writerow(
                                [
                                    spec.name,
                                    r,
                                    label,
                                    fmt17(res.lower[i][r, s]),
                                    fmt17(res.midpoint[i][r, s]),
                                    fmt17(res.upper[i][r, s]),
                                ]
                            )
        print(f"method conservative completions {args.restarts}")
        return 0

    raise UsageError(f"unknown method {args.method!r}")


def _cmd_eval(args) -> int:
    truth = _load_net(args.truth)
    estimate = read_network(args.estimate)
    if args.counts:
        counts = _read_counts(args.counts, estimate)
        estimate = smooth(estimate, counts)
    mode = args.mode
    if mode is None:
        mode = "decomposed" if same_structure(truth, estimate) else "enumerate"
    if mode == "decomposed":
        ce = kl_decomposed(truth, estimate)
    else:
        ce = kl_enumerate(truth, estimate)
    mse_val = mse(truth, estimate) if same_structure(truth, estimate) else float("nan")
    pct = ""
    if args.data:
        data = read_dataset(args.data)
        holes = sum(
            w * sum(1 for v in pattern if v is None) / len(pattern)
            for pattern, w in data.cases
        )
        pct = holes / data.total_weight
    print(f"ce {ce:.6g}")
    print(f"mse {mse_val:.6g}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["method", "ce", "mse", "pct_missing"])
            writer.writerow(
                [
                    args.method_tag,
                    fmt17(ce),
                    fmt17(mse_val),
                    fmt17(pct) if pct != "" else "",
                ]
            )
    return 0


def _cmd_lik(args) -> int:
    net = _load_net(args.net)
    data = read_dataset(args.data)
    if args.which == "fv":
        rep = face_value_loglik(net, data)
    elif args.which == "sat":
        rep = exact_sat_profile_loglik(net, data, tol=args.tol)
    elif args.which == "car":
        rep = car_profile_loglik(net, data)
    elif args.which == "lr":
        other = _load_net(args.net_car) if args.net_car else net
        stat = lr_statistic(net, other, data)
        print(f"lr_statistic {stat:.6g}")
        return 0
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown --which {args.which!r}")
    print(f"kind {rep.kind}")
    print(f"per_case_average {rep.per_case_average:.6g}")
    print(f"total {rep.total:.6g}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["kind", "per_case_average", "total"])
            writer.writerow([rep.kind, fmt17(rep.per_case_average), fmt17(rep.total)])
    return 0


def _cmd_experiment(args) -> int:
    net = _load_net(args.net)
    if args.coarsening is None and args.mechanism is None:
        raise UsageError("provide --coarsening mp:mu:sigma or --mechanism M.net")
    cfg = ExperimentConfig(
        net=net,
        coarsening=CoarseningSpec.parse(args.coarsening) if args.coarsening else None,
        n=args.n,
        z=args.z,
        runs=args.runs,
        seed=args.seed,
        mechanism=_load_net(args.mechanism) if args.mechanism else None,
    )
    rows, failures = run_experiment(cfg)
    write_experiment_csv(args.out, rows)
    if rows:
        summary = _summary_cells(rows)
        for col in EXPERIMENT_HEADER[1:]:
            print(f"{col} {summary[col]}")
    print(f"runs {len(rows)} failed {len(failures)}")
    for f in failures:
        print(f, file=sys.stderr)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="coarsebn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample an incomplete dataset")
    p.add_argument("--net", required=True)
    p.add_argument("--coarsening", required=True, help="mp:mu:sigma")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-mechanism")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("learn", help="fit parameters from incomplete data")
    p.add_argument("--net-structure", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True, choices=["aim", "em", "conservative"])
    p.add_argument("--init", default=None, help="em | uniform | random | net:G")
    p.add_argument("--z", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.add_argument("--counts-out")
    p.add_argument("--unsmoothed", action="store_true",
                   help="write the raw estimate instead of the smoothed one")
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("eval", help="score an estimate against the truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--counts", help="row counts CSV; smooth before scoring")
    p.add_argument("--mode", choices=["enumerate", "decomposed"])
    p.add_argument("--method-tag", default="estimate")
    p.add_argument("--data", help="dataset for the pct_missing column")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("lik", help="likelihood reports")
    p.add_argument("--net", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--which", required=True, choices=["fv", "sat", "car", "lr"])
    p.add_argument("--net-car", help="car-side candidate for --which lr")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_lik)

    p = sub.add_parser("experiment", help="seeded batch comparison")
    p.add_argument("--net", required=True)
    p.add_argument("--coarsening", help="mp:mu:sigma")
    p.add_argument("--mechanism", help="fixed mechanism network file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--z", type=int, required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("randomize", help="replace all CPT rows by random ones")
    p.add_argument("--net", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_randomize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        # Per-method default init: aim starts from the EM estimate.
        if getattr(args, "init", None) is None and getattr(args, "method", None):
            args.init = "em" if args.method == "aim" else "uniform"
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (FormatError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except CoarseBNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())
