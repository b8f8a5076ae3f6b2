"""Command-line runner for reproducible, file-backed experiments.

Every subcommand validates its configuration before computing anything
(exit 2 with the violated constraint named), writes a JSON report and a CSV
row, prints one PASS/FAIL line per check, and exits 0 only if all checks
pass.  I/O failures exit 3.  Any long option can also be supplied through
an environment variable with the RELUQUERY_ prefix (e.g. RELUQUERY_SEED).

Report files contain only replay-stable fields, so identical configuration
and seed produce byte-identical files; wall-clock timing goes to stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import gadgets, mlp, transformer
from .harness import (
    CSV_COLUMNS,
    ExperimentReport,
    address_task_sampler,
    address_witness,
    path_task_sampler,
    path_witness,
    sweep_worst_case,
    value_task_sampler,
    verify_witness,
    write_csv,
)
from .learners import make_address_agent, make_path_agent, make_value_agent
from .tasks import HardFunction, default_delta, fixed_query_points


class ConfigError(ValueError):
    """Invalid configuration; the message names the violated constraint."""


def _require(ok: bool, constraint: str):
    if not ok:
        raise ConfigError(constraint)


def _env_default(name: str, fallback):
    raw = os.environ.get("RELUQUERY_" + name.upper().replace("-", "_"))
    if raw is None:
        return fallback
    return type(fallback)(raw) if fallback is not None else raw


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=_env_default("seed", 0))
    parser.add_argument("--grid", type=int, default=_env_default("grid", 10_000))
    parser.add_argument("--n-tasks", type=int, default=_env_default("n-tasks", 50))
    parser.add_argument("--out", default=_env_default("out", "report"),
                        help="output path prefix; writes <out>.json and <out>.csv")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="reluquery", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="experiment", required=True)

    p = sub.add_parser("path-exp", help="exact cubical-path reconstruction sweep")
    p.add_argument("--d", type=int, default=_env_default("d", 1))
    p.add_argument("--L", type=int, default=_env_default("l", 3))
    p.add_argument("--eta", type=float, default=_env_default("eta", 0.25))
    p.add_argument("--realizable", action="store_true")
    _add_common(p)

    p = sub.add_parser("value-exp", help="pointed-value agent error sweep")
    p.add_argument("--N", type=int, default=_env_default("n", 5))
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--eps", type=float, default=_env_default("eps", 0.01))
    p.add_argument("--exact-product", action="store_true")
    _add_common(p)

    p = sub.add_parser("addr-exp", help="address-spike agent exactness sweep")
    p.add_argument("--N", type=int, default=_env_default("n", 5))
    p.add_argument("--delta", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("gadget-test", help="sup-error and weight-count audit of every gadget")
    p.add_argument("--eps", type=float, default=_env_default("eps", 0.01))
    _add_common(p)

    p = sub.add_parser("convert-transformer", help="embed an MLP JSON file as a transformer")
    p.add_argument("--input", required=True, help="MLP network JSON file")
    p.add_argument("--output", default=_env_default("out", "transformer.json"))
    p.add_argument("--grid", type=int, default=_env_default("grid", 1000),
                   help="random input count for the defect estimate")
    p.add_argument("--seed", type=int, default=_env_default("seed", 0))

    p = sub.add_parser("witness", help="indistinguishable task pair construction")
    p.add_argument("--family", choices=("path", "addr"), required=True)
    p.add_argument("--d", type=int, default=_env_default("d", 1))
    p.add_argument("--L", type=int, default=_env_default("l", 4))
    p.add_argument("--N", type=int, default=_env_default("n", 7))
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--eta", type=float, default=_env_default("eta", 0.25))
    _add_common(p)
    return top


def _validate(args: argparse.Namespace):
    exp = args.experiment
    if exp in ("path-exp",) or (exp == "witness" and args.family == "path"):
        _require(args.d >= 1, "d >= 1")
        _require(args.L >= 1, "L >= 1")
        _require(0 < args.eta < 0.5, "eta in (0, 1/2)")
    if exp in ("value-exp", "addr-exp") or (exp == "witness" and args.family == "addr"):
        _require(args.N >= 3, "N >= 3")
        delta = args.delta if args.delta is not None else default_delta(args.N)
        _require(0 < delta < 1.0 / (6.0 * args.N), "delta in (0, 1/(6N))")
        args.delta = delta
    if exp in ("value-exp", "gadget-test"):
        _require(0 < args.eps < 1, "eps in (0, 1)")
    if hasattr(args, "grid"):
        _require(args.grid >= 2, "grid >= 2")
    if hasattr(args, "n_tasks"):
        _require(args.n_tasks >= 1, "n_tasks >= 1")


def _emit(checks: dict) -> bool:
    all_ok = True
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        all_ok &= bool(ok)
    return all_ok


def _write_report(report: ExperimentReport, out: str):
    stamped = report.wall_time_ms
    report.wall_time_ms = 0.0  # keep report files byte-identical across runs
    with open(out + ".json", "w") as fh:
        fh.write(report.to_json() + "\n")
    write_csv(out + ".csv", [report])
    print(f"wrote {out}.json, {out}.csv ({stamped:.0f} ms)")


def _run_path(args) -> bool:
    agent = make_path_agent(args.d, args.L, eta=args.eta, realizable=args.realizable)
    report = sweep_worst_case(
        agent, path_task_sampler(args.d, args.L, args.eta), args.grid, args.n_tasks,
        seed=args.seed, experiment="path-exp",
        parameters={"d": args.d, "L": args.L, "eta": args.eta, "realizable": args.realizable},
    )
    report.checks = {
        "worst error <= 1e-9": report.worst_error <= 1e-9,
        f"query count == {2**args.d * args.L}": report.n_queries == 2**args.d * args.L,
    }
    _write_report(report, args.out)
    return _emit(report.checks)


def _run_value(args) -> bool:
    agent = make_value_agent(args.N, eps=args.eps, exact_product=args.exact_product)
    report = sweep_worst_case(
        agent, value_task_sampler(args.N, args.delta), args.grid, args.n_tasks,
        seed=args.seed, experiment="value-exp",
        parameters={"N": args.N, "delta": args.delta, "eps": args.eps,
                    "exact_product": args.exact_product},
    )
    bound = 1e-9 if args.exact_product else args.N * args.eps
    report.checks = {f"worst error <= {bound:g}": report.worst_error <= bound}
    _write_report(report, args.out)
    return _emit(report.checks)


def _run_addr(args) -> bool:
    address_fn = HardFunction("invertible-address", input_dim=args.N - 1, codomain=(2 / 3, 1))
    agent = make_address_agent(args.N, address_fn=address_fn)
    report = sweep_worst_case(
        agent, address_task_sampler(args.N, args.delta, address_fn), args.grid, args.n_tasks,
        seed=args.seed, experiment="addr-exp",
        parameters={"N": args.N, "delta": args.delta},
    )
    report.checks = {"worst error <= 1e-9": report.worst_error <= 1e-9}
    _write_report(report, args.out)
    return _emit(report.checks)


def _gadget_rows(eps: float, grid: int, seed: int):
    rng = np.random.default_rng(seed)
    rows = []

    def kinked(points, breaks):
        return np.union1d(points, breaks)

    xs = kinked(np.linspace(-2, 2, grid), [0.0])
    net = gadgets.abs_gadget()
    rows.append(("abs", "", float(np.max(np.abs(mlp.evaluate_scalar(net, xs[:, None]) - np.abs(xs)))),
                 mlp.count_weights(net)))
    for d in (2, 4, 8):
        pts = rng.uniform(-1, 1, (grid, d))
        eq = rng.uniform(-1, 1, grid // 10)  # ties sit on max kinks
        pts = np.vstack([pts, np.repeat(eq[:, None], d, axis=1)])
        net = gadgets.max_gadget(d)
        err = float(np.max(np.abs(mlp.evaluate_scalar(net, pts) - pts.max(axis=1))))
        rows.append(("max", f"d={d}", err, mlp.count_weights(net)))
    spec = gadgets.HatSpec(0.5, 0.1)
    net = gadgets.hat_gadget(spec)
    xs = kinked(np.linspace(0, 1, grid), [0.4, 0.5, 0.6])
    rows.append(("hat", "a=0.5 delta=0.1",
                 float(np.max(np.abs(mlp.evaluate_scalar(net, xs[:, None]) - spec.reference(xs)))),
                 mlp.count_weights(net)))
    net = gadgets.selector_gadget()
    xs = kinked(np.linspace(-1, 2, grid), [0.0, 1.0])
    ref = np.clip(xs, 0.0, 1.0)
    rows.append(("selector", "", float(np.max(np.abs(mlp.evaluate_scalar(net, xs[:, None]) - ref))),
                 mlp.count_weights(net)))
    for d in (1, 2):
        bspec = gadgets.BumpSpec((0.25,) * d, 0.5, 0.25)
        net = gadgets.bump_gadget(bspec)
        side = max(2, round(grid ** (1 / d)))
        axes = [kinked(np.linspace(0, 1, side), [0.0, 0.125, 0.25, 0.375, 0.5])] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        err = float(np.max(np.abs(mlp.evaluate_scalar(net, pts) - gadgets.bump_reference(bspec, pts))))
        rows.append(("bump", f"d={d}", err, mlp.count_weights(net)))
    net = gadgets.mult_eps(eps)
    side = max(2, int(np.sqrt(grid)))
    a, b = np.meshgrid(np.linspace(0, 1, side), np.linspace(0, 1, side), indexing="ij")
    pts = np.stack([a.ravel(), b.ravel()], axis=1)
    err = float(np.max(np.abs(mlp.evaluate_scalar(net, pts) - pts[:, 0] * pts[:, 1])))
    rows.append(("mult", f"eps={eps:g}", err, mlp.count_weights(net)))
    return rows


def _run_gadget_test(args) -> bool:
    import csv

    t0 = time.perf_counter()
    rows = _gadget_rows(args.eps, args.grid, args.seed)
    with open(args.out + ".csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gadget", "parameter", "sup_error", "weight_count"])
        writer.writerows(rows)
    checks = {}
    for name, param, err, _count in rows:
        tol = args.eps if name == "mult" else 1e-9
        label = f"{name} {param}".strip()
        checks[f"{label} sup error <= {tol:g}"] = err <= tol
    report = ExperimentReport(
        experiment="gadget-test",
        parameters={"eps": args.eps, "grid": args.grid},
        seed=args.seed,
        per_task_errors=[r[2] for r in rows],
        checks={k: bool(v) for k, v in checks.items()},
        max_weights=max(r[3] for r in rows),
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
    )
    # the CSV slot holds the per-gadget table, so only the JSON report is written
    report.wall_time_ms = 0.0
    with open(args.out + ".json", "w") as fh:
        fh.write(report.to_json() + "\n")
    print(f"wrote {args.out}.json, {args.out}.csv")
    return _emit(checks)


def _run_convert(args) -> bool:
    with open(args.input) as fh:
        net = mlp.deserialize(fh.read())
    tnet = transformer.mlp_to_transformer(net)
    with open(args.output, "w") as fh:
        fh.write(transformer.serialize(tnet) + "\n")
    xs = np.random.default_rng(args.seed).uniform(-1, 1, (args.grid, net.in_dim))
    defect = transformer.conversion_defect(net, tnet, xs, temperatures=(0.1, 1.0, 10.0))
    print(f"max conversion defect over {args.grid} inputs: {defect:.3e}")
    checks = {"conversion defect <= 1e-12": defect <= 1e-12,
              "one head per layer, depth preserved": len(tnet.layers) == net.depth}
    print(f"wrote {args.output}")
    return _emit(checks)


def _run_witness(args) -> bool:
    t0 = time.perf_counter()
    if args.family == "path":
        _require(args.N < 2 ** (args.d * (args.L - 1)), "N < 2^(d(L-1))")
        rng = np.random.default_rng(args.seed)
        queries = rng.uniform(0, 1, (args.N, args.d))
        pair = path_witness(queries, args.d, args.L, eta=args.eta)
        params = {"family": "path", "d": args.d, "L": args.L, "N": args.N, "eta": args.eta}
    else:
        pair = address_witness(fixed_query_points(args.N), args.N, delta=args.delta)
        params = {"family": "addr", "N": args.N, "delta": args.delta}
    audit = verify_witness(pair)
    report = ExperimentReport(
        experiment="witness", parameters=params, seed=args.seed,
        witnesses=[pair.to_json_dict()],
        checks={"contexts identical": audit["context_gap"] <= 1e-12,
                "separation == 1": abs(audit["separation"] - 1.0) <= 1e-12},
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
    )
    _write_report(report, args.out)
    return _emit(report.checks)


_RUNNERS = {
    "path-exp": _run_path,
    "value-exp": _run_value,
    "addr-exp": _run_addr,
    "gadget-test": _run_gadget_test,
    "convert-transformer": _run_convert,
    "witness": _run_witness,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _validate(args)
    except ConfigError as exc:
        print(f"invalid config: violated constraint {exc}", file=sys.stderr)
        return 2
    try:
        ok = _RUNNERS[args.experiment](args)
    except ConfigError as exc:
        print(f"invalid config: violated constraint {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return 3
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
