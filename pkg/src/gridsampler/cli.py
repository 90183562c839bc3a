"""Command-line pipeline: grid -> data -> PCM -> samples -> power flow -> coverage."""
import argparse
import json
import os
import sys

from . import dataio
from ._validation import SEED_ENV_VAR
from .copula import GaussianCopulaSampler
from .grid import build_synthetic_feeder, load_grid, save_grid
from .metrics import CoverageReport, PqCloud, coverage, pcm_fidelity
from .powerflow import DEFAULT_MAX_ITER, DEFAULT_TOL, batch_pf
from .sampling import (STRATEGIES, CorrelationSampler, SRSSampler, ThayerSampler,
                       UniformSampler)
from .stats import pcm, pcm_reduced


class CliError(Exception):
    pass


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR, "").strip()
    return int(env) if env else 0


def _pairs(items, flag):
    out = {}
    for item in items or []:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise CliError(f"{flag} expects NAME=PATH, got {item!r}")
        out[name] = path
    return out


def cmd_make_grid(args):
    save_grid(build_synthetic_feeder(args.n_loads, args.n_sgens, _seed(args)), args.out)


def cmd_make_data(args):
    grid = load_grid(args.grid)
    ts = dataio.generate_synthetic_dataset(grid, args.steps, _seed(args))
    dataio.save_timeseries(ts, args.out)


def cmd_pcm(args):
    ts = dataio.load_timeseries(args.data)
    result = pcm_reduced(ts, args.rows, _seed(args)) if args.rows else pcm(ts)
    dataio.save_pcm(result, args.out)
    if args.long_out:
        dataio.save_pcm_long(result, args.long_out)


def cmd_sample(args):
    seed = _seed(args)
    strategy = args.strategy
    if strategy in ("copula", "correlation"):
        if not args.data:
            raise CliError(f"strategy {strategy!r} requires --data: "
                           "a time series is the PCM/marginal source")
        ts = dataio.load_timeseries(args.data)
        if strategy == "copula":
            sampler = GaussianCopulaSampler(random_state=seed).fit(ts)
        else:
            sampler = CorrelationSampler(
                threshold=args.threshold, noise_std=args.noise,
                interval_extension=args.extension, dirichlet_alpha=args.alpha,
                n_rows=args.rows, random_state=seed, n_jobs=args.jobs,
            ).fit(ts)
    else:
        if not args.grid:
            raise CliError(f"strategy {strategy!r} requires --grid")
        grid = load_grid(args.grid)
        sampler = {
            "uniform": lambda: UniformSampler(random_state=seed),
            "srs": lambda: SRSSampler(delta=args.delta, random_state=seed),
            "thayer": lambda: ThayerSampler(random_state=seed),
        }[strategy]().fit(grid)
    dataio.save_samples(sampler.sample(args.n), args.out)


def cmd_powerflow(args):
    grid = load_grid(args.grid)
    matrix = dataio.load_matrix(args.samples)
    result = batch_pf(grid, matrix, args.tol, args.max_iter, args.jobs)
    dataio.save_pq(result, args.out)


def cmd_coverage(args):
    ref_name, ref_path = next(iter(_pairs([args.reference], "--reference").items()))
    reference = PqCloud.from_batch(dataio.load_pq(ref_path), ref_name)
    candidates = _pairs(args.candidate, "--candidate")
    sample_files = _pairs(args.samples, "--samples")
    source = dataio.load_timeseries(args.data) if args.data else None
    source_pcm = pcm(source) if source is not None else None

    def fidelity(matrix):
        if source_pcm is None or matrix is None:
            return float("nan")
        try:
            return pcm_fidelity(matrix, source_pcm)
        except ValueError:
            return float("nan")

    reports = [CoverageReport(ref_name, *_self_coverage(reference),
                              reference.feasibility, fidelity(source))]
    clouds = [reference]
    for name, path in candidates.items():
        cloud = PqCloud.from_batch(dataio.load_pq(path), name)
        clouds.append(cloud)
        rep = coverage(cloud, reference)
        matrix = dataio.load_samples(sample_files[name]) if name in sample_files else None
        reports.append(CoverageReport(name, rep.hull_area, rep.containment,
                                      rep.overlap_ratio, rep.feasibility, fidelity(matrix)))
    dataio.save_comparison(reports, args.out)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([r.to_dict() for r in reports], fh, indent=2)
            fh.write("\n")
    if args.emit_plot_data:
        dataio.save_plot_data(clouds, args.emit_plot_data)
    for r in reports:
        print(f"{r.strategy:>12s}  area={r.hull_area:.4g}  containment={r.containment:.3f}  "
              f"overlap={r.overlap_ratio:.3f}  feasible={r.feasibility:.3f}  "
              f"pcm_fidelity={r.pcm_fidelity:.3f}")


def _self_coverage(cloud):
    rep = coverage(cloud, cloud)
    return rep.hull_area, rep.containment, rep.overlap_ratio


def build_parser():
    parser = argparse.ArgumentParser(prog="gridsampler", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def seeded(p):
        p.add_argument("--seed", type=int, default=None,
                       help=f"RNG seed (fallback: ${SEED_ENV_VAR}, then 0)")
        return p

    p = seeded(sub.add_parser("make-grid", help="build a synthetic radial LV feeder"))
    p.add_argument("--n-loads", type=int, default=14)
    p.add_argument("--n-sgens", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_grid)

    p = seeded(sub.add_parser("make-data", help="generate a synthetic time series"))
    p.add_argument("--grid", required=True)
    p.add_argument("--steps", type=int, default=dataio.DEFAULT_T_STEPS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_data)

    p = seeded(sub.add_parser("pcm", help="partial-correlation matrix of a time series"))
    p.add_argument("--data", required=True)
    p.add_argument("--rows", type=int, default=None, help="random row subset size")
    p.add_argument("--out", required=True)
    p.add_argument("--long-out", default=None, help="long-form heat-map CSV")
    p.set_defaults(func=cmd_pcm)

    p = seeded(sub.add_parser("sample", help="draw samples with one strategy"))
    p.add_argument("--strategy", required=True, choices=STRATEGIES)
    p.add_argument("--grid", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--threshold", type=float, default=0.85)
    p.add_argument("--noise", type=float, default=0.10)
    p.add_argument("--extension", type=float, default=0.20)
    p.add_argument("--alpha", type=float, default=0.1, help="Dirichlet concentration")
    p.add_argument("--rows", type=int, default=None,
                   help="fit correlation sampling on a random row subset")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("powerflow", help="slack P-Q for every sample or time step")
    p.add_argument("--grid", required=True)
    p.add_argument("--samples", required=True, help="sample CSV or time-series CSV")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_powerflow)

    p = sub.add_parser("coverage", help="compare P-Q clouds against the original data")
    p.add_argument("--reference", required=True, help="NAME=PQ_CSV of the original data")
    p.add_argument("--candidate", action="append", default=[], help="NAME=PQ_CSV")
    p.add_argument("--samples", action="append", default=[],
                   help="NAME=SAMPLE_CSV for PCM fidelity")
    p.add_argument("--data", default=None, help="source time series for PCM fidelity")
    p.add_argument("--out", required=True)
    p.add_argument("--json", default=None)
    p.add_argument("--emit-plot-data", default=None, help="long-form P-Q scatter CSV")
    p.set_defaults(func=cmd_coverage)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"gridsampler {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
