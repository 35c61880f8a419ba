"""Command-line entry points: generate, run, report, verify, serve."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import ConfigError, PoolParseError


def _cmd_generate(args) -> int:
    from .pool import generate_synthetic, save_pool

    try:
        counts = tuple(int(c) for c in args.counts.split(","))
    except ValueError:
        raise ConfigError(f"--counts must be comma-separated integers, got {args.counts!r}")
    pool = generate_synthetic(args.num_classes, counts, args.dim, args.separation, args.seed)
    save_pool(pool, args.output)
    print(f"wrote {pool.size} examples across {args.num_classes} classes to {args.output}")
    return 0


def _cmd_run(args) -> int:
    from .harness import build_pool, load_spec, run_experiment

    spec = load_spec(args.config)
    if args.output:
        spec = replace(spec, output=args.output)
    if spec.output is None:
        raise ConfigError("no output path: set 'output' in the config or pass --output")
    log = run_experiment(build_pool(spec), spec)
    log.write(spec.output)
    last = log.rows[-1]
    print(
        f"wrote {spec.output}: {len(log.rows)} rounds, {last['labels_total']} labels, "
        f"final bal_acc {last['bal_acc']:.4f}, minority_frac {last['minority_frac']:.4f}"
    )
    return 0


def _cmd_report(args) -> int:
    from .harness import aggregate_reports, write_report_csv

    rows = aggregate_reports(args.logs)
    write_report_csv(rows, args.output)
    print(f"wrote {args.output}: {len(rows)} rounds aggregated over {len(args.logs)} logs")
    return 0


def _cmd_verify(args) -> int:
    from .harness import gradient_fuzz, lemma_fuzz, theorem_mc_grid

    trials = args.trials
    binary, multi, grads = 1000, 200, 50
    if args.quick:
        binary, multi, grads = 200, 50, 10
        if trials == 10000:
            trials = 500

    ok = True
    failures = lemma_fuzz(binary_trials=binary, multi_trials=multi, seed=args.seed)
    status = "PASS" if failures == 0 else "FAIL"
    ok &= failures == 0
    print(f"[{status}] loss/discrepancy equivalence: {binary} binary + {multi} multiclass "
          f"sequences, {failures} failures")

    failures, worst = gradient_fuzz(instances=grads, seed=args.seed)
    status = "PASS" if failures == 0 else "FAIL"
    ok &= failures == 0
    print(f"[{status}] gradient finite-difference check: {grads} instances, "
          f"max rel err {worst:.2e}")

    for row in theorem_mc_grid(trials=trials, seed=args.seed):
        status = "PASS" if row["ok"] else "FAIL"
        ok &= row["ok"]
        print(f"[{status}] extra-cut rate eta={row['eta']} b={row['b']}: "
              f"observed {row['observed']:.4f} vs bound {row['bound']:.4f} "
              f"(slack 3*sigma = {3 * row['sigma']:.4f}, {row['trials']} trials)")
    return 0 if ok else 1


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(args.data_dir), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="direct-al",
        description="Active learning for class-imbalanced pools via "
                    "separation-threshold search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic pool file")
    gen.add_argument("--num-classes", type=int, required=True)
    gen.add_argument("--counts", required=True, help="comma-separated per-class sizes")
    gen.add_argument("--dim", type=int, default=2)
    gen.add_argument("--separation", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--output", required=True)
    gen.set_defaults(func=_cmd_generate)

    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--output", help="override the config's output path")
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="aggregate metric curves across seed logs")
    rep.add_argument("logs", nargs="+", help="log CSVs from `run`")
    rep.add_argument("--output", required=True)
    rep.set_defaults(func=_cmd_report)

    ver = sub.add_parser("verify", help="run the built-in correctness checks")
    ver.add_argument("--trials", type=int, default=10000,
                     help="Monte Carlo trials per grid cell (default 10000)")
    ver.add_argument("--quick", action="store_true", help="smaller, faster check sizes")
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(func=_cmd_verify)

    srv = sub.add_parser("serve", help="start the annotation HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--data-dir", default="sessions",
                     help="directory holding per-session state")
    srv.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PoolParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
