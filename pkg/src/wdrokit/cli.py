"""Command-line surface: model/data generation, certification, attacks,
evaluation, the convergence experiment, the 1-D oracle, and a selftest.

Exit codes: 0 success, 1 usage error, 2 numeric/infeasibility error.
Diagnostics go to stderr; results go to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import harness
from .attack import AdvDistribution, AttackConfig, evaluate, wda
from .certify import certificate_report
from .errors import ToolkitError
from .harness import (DataSpec, ModelSpec, gen_data, gen_model, load_data,
                      remark1_oracle, run_convergence, write_json,
                      write_per_mask_csv)
from .linalg import NormKind
from .losses import LossKind
from .network import ActivationKind, load_model, save_model

OUTDIR_ENV = "WDROKIT_OUTDIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _out_path(value: str | None, default_name: str | None = None) -> Path | None:
    if value is not None:
        return Path(value)
    if default_name is None:
        return None
    return Path(os.environ.get(OUTDIR_ENV, ".")) / default_name


def _add_model_data_flags(p: _Parser) -> None:
    p.add_argument("--model", required=True, help="model file (wdro-mlp format)")
    p.add_argument("--data", required=True, help="dataset CSV")


def build_parser() -> _Parser:
    parser = _Parser(prog="wdrokit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-model", help="generate a seeded random MLP")
    p.add_argument("--n", type=int, required=True, help="input dimension")
    p.add_argument("--k", type=int, required=True, help="class count")
    p.add_argument("--widths", default="8", help="comma-separated hidden widths")
    p.add_argument("--activation", default="relu", help="relu|gelu|silu")
    p.add_argument("--init-range", type=float, default=1.0)
    p.add_argument("--box-lo", type=float, default=-1.0)
    p.add_argument("--box-hi", type=float, default=1.0)
    p.add_argument("--monotone", action="store_true",
                   help="force nonnegative weights")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output model file")

    p = sub.add_parser("gen-data", help="generate a seeded toy dataset")
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--spread", type=float, default=0.3)
    p.add_argument("--box-lo", type=float, default=-1.0)
    p.add_argument("--box-hi", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output CSV file")

    p = sub.add_parser("certify", help="compute the certificate sandwich")
    _add_model_data_flags(p)
    p.add_argument("--r", required=True, help="cost norm: 1|2|inf")
    p.add_argument("--probes", type=int, default=0)
    p.add_argument("--exhaustive-cap", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="report JSON (default stdout)")
    p.add_argument("--per-mask-csv", default=None)

    p = sub.add_parser("attack", help="run the distributional attack")
    _add_model_data_flags(p)
    p.add_argument("--eps", type=float, required=True, help="budget epsilon")
    p.add_argument("--kappa", type=float, default=2.0)
    p.add_argument("--r", required=True, help="cost norm: 1|2|inf")
    p.add_argument("--alpha", type=float, required=True, help="step size")
    p.add_argument("--prob", type=int, default=10, help="probing iterations")
    p.add_argument("--maxiter", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="parallel per-sample attacks")
    p.add_argument("--out", default=None, help="attack JSON (default stdout)")

    p = sub.add_parser("eval", help="evaluate an attack distribution")
    _add_model_data_flags(p)
    p.add_argument("--dist", required=True, help="attack JSON file")
    p.add_argument("--loss", default="ce", help="ce|dlr")
    p.add_argument("--out", default=None)

    p = sub.add_parser("convergence", help="mask-convergence experiment")
    _add_model_data_flags(p)
    p.add_argument("--r", required=True)
    p.add_argument("--probes", type=int, default=0)
    p.add_argument("--exhaustive-cap", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--pgd-step", type=float, default=0.05)
    p.add_argument("--pgd-iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="series CSV (default stdout)")

    p = sub.add_parser("remark1", help="1-D brute-force DRO oracle")
    p.add_argument("--eps", type=float, action="append", required=True,
                   help="budget (repeatable)")
    p.add_argument("--grid", type=int, default=2000)
    p.add_argument("--out", default=None)

    p = sub.add_parser("selftest", help="run the built-in invariant battery")
    p.add_argument("--seed", type=int, default=0)

    return parser


def _cmd_gen_model(args) -> int:
    widths = tuple(int(w) for w in str(args.widths).split(",") if w.strip())
    spec = ModelSpec(args.n, args.k, widths, ActivationKind.parse(args.activation),
                     args.init_range, args.box_lo, args.box_hi, args.monotone)
    net = gen_model(spec, args.seed)
    out = _out_path(args.out, "model.txt")
    save_model(net, out)
    print(f"wrote {out}", file=sys.stderr)
    return 0


def _cmd_gen_data(args) -> int:
    spec = DataSpec(args.n_samples, args.classes, args.dim, args.spread,
                    args.box_lo, args.box_hi)
    data = gen_data(spec, args.seed)
    out = _out_path(args.out, "data.csv")
    harness.save_data(data, out)
    print(f"wrote {out}", file=sys.stderr)
    return 0


def _cmd_certify(args) -> int:
    net = load_model(args.model)
    data = load_data(args.data)
    r = NormKind.parse(args.r)
    report = certificate_report(net, data, r, r.dual(), probes=args.probes,
                                exhaustive_cap=args.exhaustive_cap,
                                seed=args.seed)
    if not report.exhaustive:
        print("warning: inventory not exhaustive; upper bound is an estimate",
              file=sys.stderr)
    write_json(report.to_json_dict(), _out_path(args.out))
    if args.per_mask_csv:
        write_per_mask_csv(report, args.per_mask_csv)
    return 0


def _cmd_attack(args) -> int:
    net = load_model(args.model)
    data = load_data(args.data)
    cfg = AttackConfig(epsilon=args.eps, kappa=args.kappa,
                       r=NormKind.parse(args.r), alpha=args.alpha,
                       prob=args.prob, maxiter=args.maxiter, seed=args.seed,
                       workers=args.workers)
    dist = wda(net, data, cfg)
    write_json(dist.to_json_dict(), _out_path(args.out))
    return 0


def _cmd_eval(args) -> int:
    net = load_model(args.model)
    data = load_data(args.data)
    payload = json.loads(Path(args.dist).read_text())
    dist = AdvDistribution.from_json_dict(payload, data)
    result = evaluate(net, dist, LossKind.parse(args.loss))
    write_json(result.to_json_dict(), _out_path(args.out))
    return 0


def _cmd_convergence(args) -> int:
    net = load_model(args.model)
    data = load_data(args.data)
    r = NormKind.parse(args.r)
    series = run_convergence(net, data, r, r.dual(), probes=args.probes,
                             exhaustive_cap=args.exhaustive_cap,
                             seed=args.seed, epsilon=args.eps,
                             pgd_step=args.pgd_step, pgd_iters=args.pgd_iters)
    if args.out is None:
        for row in series.rows():
            print(",".join(str(v) for v in row))
    else:
        series.write_csv(args.out)
    return 0


def _cmd_remark1(args) -> int:
    values = {repr(eps): remark1_oracle(eps, grid=args.grid) for eps in args.eps}
    write_json({"schema": "wdrokit-remark1-v1", "sup_values": values},
               _out_path(args.out))
    return 0


def _cmd_selftest(args) -> int:
    from . import selftest
    failures = selftest.run(seed=args.seed, stream=sys.stderr)
    return 0 if failures == 0 else 2


_COMMANDS = {
    "gen-model": _cmd_gen_model,
    "gen-data": _cmd_gen_data,
    "certify": _cmd_certify,
    "attack": _cmd_attack,
    "eval": _cmd_eval,
    "convergence": _cmd_convergence,
    "remark1": _cmd_remark1,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
