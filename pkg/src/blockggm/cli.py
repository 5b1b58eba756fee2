"""Command-line entry point: ``blockggm {select,infer,simulate,bench,version}``.

Exit codes
----------
0  success
2  bad command line or configuration
3  file could not be read or written
4  invalid input data
5  constant column in the input
6  structure selection impossible (degenerate candidate set)
7  network inference failed in a way that left no usable result
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .covariance import read_csv, write_csv
from .errors import (
    BlockGGMError,
    ConstantColumn,
    DegeneratePath,
    EmptyCandidateSet,
    InputError,
    InsufficientComplexModels,
    NotConverged,
    SingularInput,
)
from .partition import Partition
from .pipeline import (
    RunConfig,
    detect_structure,
    infer_networks,
    prepare,
    write_json,
    write_network,
    write_structure,
)
from .simulate import (
    STRATEGIES,
    SimConfig,
    benchmark_csv,
    make_block_cov,
    make_generator,
    run_benchmark,
    sample_mvn,
    summary_json,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_CONSTANT = 5
EXIT_SELECTION = 6
EXIT_SOLVER = 7

log = logging.getLogger("blockggm")


class UsageError(Exception):
    pass


def _config_overrides(args) -> dict:
    keys = ("method", "penalty", "c", "shrr_quantile", "tol", "max_iter",
            "grid_size", "out", "seed", "threads")
    overrides = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "no_standardize", False):
        overrides["standardize"] = False
    if getattr(args, "input", None):
        overrides["input"] = args.input
    return overrides


def _load_config(args) -> RunConfig:
    try:
        return RunConfig.load(args.config, _config_overrides(args))
    except InputError as exc:
        raise UsageError(str(exc)) from None
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_select(args) -> int:
    config = _load_config(args)
    x = prepare(read_csv(config.input), config)
    report = detect_structure(x, config)
    out = _outdir(config.out)
    write_structure(report, out)
    sel = report.selected.selected
    print(f"selected {sel.partition.k} blocks, dimension {sel.dimension} "
          f"({report.selected.method}, kappa_opt={report.selected.kappa_opt:.6g}, "
          f"{report.excluded} candidates excluded)")
    return EXIT_OK


def cmd_infer(args) -> int:
    config = _load_config(args)
    x = prepare(read_csv(config.input), config)
    out = _outdir(config.out)
    if args.partition:
        partition = Partition.from_json(Path(args.partition).read_text(encoding="utf-8"))
    else:
        report = detect_structure(x, config)
        write_structure(report, out)
        partition = report.selected.selected.partition
    networks = infer_networks(x, partition, config)
    write_network(networks, partition, out, x.names)
    failed = [b.index for b in networks if b.error is not None]
    n_edges = sum(len(b.edges) for b in networks)
    print(f"{partition.k} blocks, {n_edges} edges" + (f"; incomplete blocks: {failed}" if failed else ""))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = SimConfig(p=args.p, n=args.n, k=args.k, seed=args.seed, eigen_floor=args.eigen_floor,
                    design=args.design, within=args.within)
    rng = make_generator(cfg.seed)
    truth = make_block_cov(cfg, rng)
    x = sample_mvn(truth, cfg.n, rng)
    out = _outdir(args.out)
    write_csv(x, out / "data.csv")
    write_json(
        {
            "config": {"p": cfg.p, "n": cfg.n, "k": cfg.k, "seed": cfg.seed,
                       "eigen_floor": cfg.eigen_floor, "design": cfg.design,
                       "within": cfg.within},
            "partition": truth.partition.to_dict(),
            "edges": sorted([list(e) for e in truth.edges]),
            "sigma": truth.sigma.tolist(),
        },
        out / "truth.json",
    )
    print(f"wrote {cfg.n} x {cfg.p} sample with {cfg.k} true blocks to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_config(args)
    cfg = SimConfig(p=args.p, n=args.n, k=args.k, seed=config.seed, eigen_floor=args.eigen_floor,
                    design=args.design, within=args.within)
    strategies = tuple(args.strategies.split(",")) if args.strategies else STRATEGIES
    rows = run_benchmark(
        cfg, args.reps, strategies=strategies, threads=config.threads,
        grid_size=config.grid_size, tol=config.tol, max_iter=config.max_iter,
        shrr_quantile=config.shrr_quantile, timing=args.timing,
    )
    out = _outdir(config.out)
    (out / "bench.csv").write_text(benchmark_csv(rows), encoding="utf-8")
    (out / "summary.json").write_text(summary_json(rows) + "\n", encoding="utf-8")
    print(f"{args.reps} replicates x {len(strategies)} strategies written to {out}")
    return EXIT_OK


def cmd_version(args) -> int:
    print(__version__)
    return EXIT_OK


def _add_run_options(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--config", help="flat JSON file of run options (flags override it)")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--threads", type=int, help="worker threads (default: $BLOCKGGM_THREADS or 1)")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, help="glasso relative tolerance (default 1e-4)")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="glasso sweep limit")
    p.add_argument("--grid-size", dest="grid_size", type=int, help="rho grid length (default 50)")
    p.add_argument("--shrr-quantile", dest="shrr_quantile", type=float,
                   help="dimension quantile defining complex models for SHRR (default 0.5)")
    if data:
        p.add_argument("input", help="CSV file: header of variable names, one observation per row")
        p.add_argument("--no-standardize", action="store_true",
                       help="use the columns as given (they are still centered)")
        p.add_argument("--method", choices=("shdj", "shrr"), help="slope-heuristic calibration")
        p.add_argument("--penalty", choices=("simple", "full"), help="penalty shape")
        p.add_argument("--c", type=float, help="constant of the full penalty shape")


def _add_sim_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=int, default=100, help="number of variables")
    p.add_argument("--n", type=int, default=70, help="sample size")
    p.add_argument("--k", type=int, default=15, help="number of true blocks")
    p.add_argument("--eigen-floor", dest="eigen_floor", type=float, default=0.1)
    p.add_argument("--design", choices=("random", "equicorrelated"), default="random",
                   help="block covariance generator (default: random T T' + D)")
    p.add_argument("--within", type=float, default=0.5,
                   help="within-block correlation for the equicorrelated design")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockggm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="detect the block-diagonal covariance structure")
    _add_run_options(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("infer", help="infer per-block networks with the graphical lasso")
    _add_run_options(p)
    p.add_argument("--partition", help="partition JSON to use instead of running selection")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("simulate", help="draw one synthetic block-diagonal dataset")
    _add_sim_options(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="compare inference strategies on replicated datasets")
    _add_run_options(p, data=False)
    _add_sim_options(p)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--strategies", help=f"comma-separated subset of {','.join(STRATEGIES)}")
    p.add_argument("--timing", action="store_true",
                   help="record wall time per strategy (makes the CSV non-reproducible)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("version", help="print the package version")
    p.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"blockggm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"blockggm: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConstantColumn as exc:
        print(f"blockggm: {exc}", file=sys.stderr)
        return EXIT_CONSTANT
    except (InputError, json.JSONDecodeError) as exc:
        print(f"blockggm: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegeneratePath, InsufficientComplexModels, EmptyCandidateSet) as exc:
        print(f"blockggm: selection failed: {exc}", file=sys.stderr)
        return EXIT_SELECTION
    except (NotConverged, SingularInput) as exc:
        print(f"blockggm: inference failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except BlockGGMError as exc:
        print(f"blockggm: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
