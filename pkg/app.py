"""Command-line entry point for covariate SBM estimation and bound verification."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from config.settings import (APP_DESCRIPTION, APP_PROG, APP_VERSION, DEFAULT_DELTA, DEFAULT_TAU,
                             KMEANS_RESTARTS)
from core.bounds import BoundEngine, BoundInputs, optimal_k
from core.errors import CovariateSBMError
from core.knn_neighborhoods import neighborhood
from core.montecarlo_harness import run_plan, run_sweep
from core.pipeline import estimate_pair
from core.report_generator import ReportGenerator, bound_report_markdown
from core.sbm_core import generate_network
from core.spectral_clustering import ClusteringConfig
from utils.file_handlers import FileHandler
from utils.helpers import configure_logging, parse_point, to_jsonable

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_ERROR = 2


def _tau(text: str):
    return text if text == 'mean-degree' else float(text)


def _k(text: str):
    return text if text == 'optimal' else int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_PROG, description=APP_DESCRIPTION)
    parser.add_argument('--version', action='version', version=f'%(prog)s {APP_VERSION}')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('generate', help='sample a network from model.json')
    gen.add_argument('--model', required=True, type=Path)
    gen.add_argument('--n', required=True, type=int)
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--replication', type=int, default=0)
    gen.add_argument('--noiseless', action='store_true', help='round B instead of sampling edges')
    gen.add_argument('--out', required=True, type=Path)

    est = sub.add_parser('estimate', help='estimate B(x, xp) and pi(x) from network files')
    est.add_argument('--edges', required=True, type=Path)
    est.add_argument('--covariates', required=True, type=Path)
    est.add_argument('--labels', type=Path, help='optional labels.csv (reported, not used)')
    est.add_argument('--x', required=True)
    est.add_argument('--xp', required=True)
    est.add_argument('--k', required=True, type=int)
    est.add_argument('--tau', type=_tau, default=DEFAULT_TAU)
    est.add_argument('--groups', required=True, type=int)
    est.add_argument('--restarts', type=int, default=KMEANS_RESTARTS)
    est.add_argument('--seed', type=int, default=0)
    est.add_argument('--kmeans-workers', type=int, default=1, help='threads for K-means restarts')
    est.add_argument('--mode', choices=['exclude-self', 'literal'], default='exclude-self')
    est.add_argument('--alignment', choices=['none', 'assortative', 'disassortative', 'pi-order'],
                     default='none')
    est.add_argument('--dump-laplacian', type=Path, help='directory for A_eta.csv and L.csv')
    est.add_argument('--out', required=True, type=Path)

    nb = sub.add_parser('neighborhood', help='k-NN radius and members of a query point')
    nb.add_argument('--covariates', required=True, type=Path)
    nb.add_argument('--edges', required=True, type=Path)
    nb.add_argument('--labels', type=Path)
    nb.add_argument('--x', required=True)
    nb.add_argument('--k', required=True, type=int)
    nb.add_argument('--out', type=Path)

    bd = sub.add_parser('bounds', help='evaluate every bound and condition for a model')
    bd.add_argument('--model', required=True, type=Path)
    bd.add_argument('--n', required=True, type=int)
    bd.add_argument('--k', type=_k, default='optimal')
    bd.add_argument('--delta', type=float, default=DEFAULT_DELTA)
    bd.add_argument('--tau', type=float, default=0.0)
    bd.add_argument('--x', required=True)
    bd.add_argument('--xp', required=True)
    bd.add_argument('--n-h', help='community sizes "N_1,...,N_G"; default uses pi_min N / 2')
    bd.add_argument('--d-min', type=float)
    bd.add_argument('--sup-radius', type=float)
    bd.add_argument('--out', required=True, type=Path)

    ver = sub.add_parser('verify', help='Monte Carlo coverage of the bounds')
    ver.add_argument('--plan', required=True, type=Path)
    ver.add_argument('--out', required=True, type=Path)
    ver.add_argument('--seed', type=int)
    ver.add_argument('--workers', type=int)
    ver.add_argument('--replications', type=int)

    sw = sub.add_parser('sweep', help='log-log rate slope over the plan N grid')
    sw.add_argument('--plan', required=True, type=Path)
    sw.add_argument('--metric', required=True)
    sw.add_argument('--out', required=True, type=Path)
    sw.add_argument('--tolerance', type=float, default=0.15,
                    help='allowed distance between slope and -1/(d+2)')
    sw.add_argument('--seed', type=int)
    sw.add_argument('--workers', type=int)
    sw.add_argument('--replications', type=int)
    return parser


def _plan_with_overrides(handler: FileHandler, args):
    plan = handler.load_plan(args.plan)
    updates = {name: getattr(args, name) for name in ('seed', 'workers', 'replications')
               if getattr(args, name) is not None}
    return plan.model_validate({**plan.model_dump(), **updates}) if updates else plan


def cmd_generate(args, handler: FileHandler) -> int:
    config = handler.load_model_config(args.model)
    spec = config.build()
    network = generate_network(spec, args.n, args.seed, args.replication, noiseless=args.noiseless)
    handler.save_network(network, args.out, model=config)
    return EXIT_OK


def cmd_estimate(args, handler: FileHandler) -> int:
    network = handler.load_network(args.edges, args.covariates, args.labels, G=args.groups)
    config = ClusteringConfig(G=args.groups, restarts=args.restarts, seed=args.seed,
                              workers=args.kmeans_workers)
    result = estimate_pair(network, parse_point(args.x), parse_point(args.xp), args.k, args.groups,
                           tau=args.tau, clustering_config=config, mode=args.mode, alignment=args.alignment)
    handler.save_estimation(result, args.out)
    if args.dump_laplacian:
        handler.save_laplacian_dump(result, args.dump_laplacian)
    logger.info("B_hat = %s", result.B_hat.tolist())
    return EXIT_OK


def cmd_neighborhood(args, handler: FileHandler) -> int:
    network = handler.load_network(args.edges, args.covariates, args.labels)
    labels = network.g if network.labels_known else None
    result = neighborhood(network.X, parse_point(args.x), args.k, labels, network.G)
    if args.out:
        handler.write_json(result.as_dict(), args.out)
    else:
        print(json.dumps(to_jsonable(result.as_dict())))
    return EXIT_OK


def cmd_bounds(args, handler: FileHandler) -> int:
    spec = handler.load_model_config(args.model).build()
    k = args.k
    if k == 'optimal':
        k = optimal_k(args.n, spec.d, spec.rho if spec.rho > 0 else 1.0).k
    N_h = [float(v) for v in args.n_h.split(',')] if args.n_h else None
    inputs = BoundInputs.from_spec(spec, args.n, k, args.delta, args.tau, parse_point(args.x),
                                   parse_point(args.xp), N_h=N_h, d_min=args.d_min,
                                   sup_radius=args.sup_radius)
    report = BoundEngine().evaluate(inputs)
    handler.save_bound_report(report, args.out)
    handler.write_text(bound_report_markdown(report), Path(args.out).with_suffix('.md'))
    return EXIT_OK


def cmd_verify(args, handler: FileHandler) -> int:
    plan = _plan_with_overrides(handler, args)
    experiment = run_plan(plan)
    handler.save_experiment(experiment, args.out, ReportGenerator(experiment))
    for check in experiment.acceptance:
        logger.info("%s %s %s", check.status, check.name, check.detail)
    return EXIT_OK if experiment.all_passed else EXIT_ACCEPTANCE


def cmd_sweep(args, handler: FileHandler) -> int:
    plan = _plan_with_overrides(handler, args)
    sweep = run_sweep(plan, args.metric)
    handler.save_sweep(sweep, args.out, ReportGenerator(sweep.experiment, sweep))
    gap = abs(sweep.slope.slope - sweep.expected_exponent)
    logger.info("slope %.4f (expected %.4f, gap %.4f)", sweep.slope.slope, sweep.expected_exponent, gap)
    return EXIT_OK if gap <= args.tolerance else EXIT_ACCEPTANCE


COMMANDS = {
    'generate': cmd_generate,
    'estimate': cmd_estimate,
    'neighborhood': cmd_neighborhood,
    'bounds': cmd_bounds,
    'verify': cmd_verify,
    'sweep': cmd_sweep,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main application function."""
    args = build_parser().parse_args(argv)
    configure_logging('DEBUG' if args.verbose else None)
    handler = FileHandler()
    try:
        return COMMANDS[args.command](args, handler)
    except (CovariateSBMError, ValueError, OSError) as exc:
        print(f"{APP_PROG} {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
