""" Module for the offtab command line """
import sys
import json
import logging
import argparse

import numpy as np

from .errors import OfftabError, ValidationError, AcceptanceError
from .absorbing import verify_singleton_identity, verify_all_states, singleton_gap
from .acceptance import run_acceptance
from .instances import generate_instance, FAMILIES
from .io import (load_mdp, dump_mdp, load_policy, dump_policy, load_dataset, dump_dataset,
                 dump_model, output_format, write_report, rows_to_csv, read_rows)
from .mdp_core import Policy, plan_optimal, minimal_occupancy
from .multitask import task_agnostic_learn, parse_reward_source
from .plugin import fit_plugin, l1_row_error, unvisited_pairs, to_mdp
from .run import SweepConfig, load_config, run_sweep, run_h_sweep, fit_rate, save_rows
from .trajectory import RngStream, roll_episodes
from .uniform_ope import (PolicyClassSpec, global_uniform_error, sample_local_class,
                          local_uniform_error, lower_bound_demo, empirical_optimal,
                          learning_suboptimality, local_bound_reference, DEFAULT_CAP)
from .metric_types import log

VERSION = 'offtab 0.1.0'


def _emit_rows(rows, path):
    if path:
        save_rows(rows, path)
    else:
        sys.stdout.write(rows_to_csv(rows))


## Subcommands ##

def _generate(args):
    spec = {'family': args.family, 'S': args.S, 'A': args.A, 'H': args.H, 'seed': args.seed}
    mdp, mu = generate_instance(spec)
    if args.policy_out:
        dump_policy(mu, args.policy_out)
    if args.out:
        dump_mdp(mdp, args.out)
        return None
    return {'S': mdp.S, 'A': mdp.A, 'H': mdp.H, 'P': mdp.P.tolist(), 'r': mdp.r.tolist(),
            'd1': mdp.d1.tolist()}


def _behavior(args, mdp):
    if getattr(args, 'policy', None):
        return load_policy(args.policy, mdp)
    return Policy.uniform(mdp.H, mdp.S, mdp.A)


def _roll(args):
    mdp = load_mdp(args.mdp)
    data = roll_episodes(mdp, _behavior(args, mdp), args.n, RngStream(args.seed, args.stream))
    if not args.out:
        raise ValidationError('--out', "roll writes a dataset file; pass --out <path>")
    dump_dataset(data, args.out)
    return None


def _fit(args):
    mdp = load_mdp(args.mdp)
    model = fit_plugin(load_dataset(args.dataset), mdp)
    if args.dump_model:
        dump_model(model, args.dump_model)
    errors = l1_row_error(model, mdp)
    return {'n': model.n, 'unvisited_pairs': unvisited_pairs(model),
            'max_l1_row_error': float(errors.max()), 'l1_row_error': errors.tolist(),
            'd1_hat': model.d1_hat.tolist()}


def _plan(args):
    mdp = load_mdp(args.mdp)
    if args.dataset:
        pi, values = empirical_optimal(fit_plugin(load_dataset(args.dataset), mdp))
        report = {'empirical_V1': values.V[0].tolist(),
                  'suboptimality': learning_suboptimality(mdp, pi).tolist()}
    else:
        values, pi = plan_optimal(mdp)
        report = {'V1': values.V[0].tolist()}
    if args.policy_out:
        dump_policy(pi, args.policy_out)
    report['actions'] = pi.actions().tolist()
    if getattr(args, 'policy', None):
        report['behavior'] = minimal_occupancy(mdp, load_policy(args.policy, mdp))
    return report


def _ope(args):
    truth = load_mdp(args.mdp)
    model = fit_plugin(load_dataset(args.dataset), truth)
    rng = RngStream(args.seed)
    if args.which == 'global':
        kind = 'global_sampled' if args.sampled else 'global_exhaustive'
        spec = PolicyClassSpec(kind, samples=args.samples, enumeration_cap=args.cap)
        return global_uniform_error(truth, model, spec, rng=rng, keep_errors=args.keep).to_dict()
    if args.which == 'local':
        sample = sample_local_class(model, args.eps_opt, args.samples, rng)
        report = local_uniform_error(truth, model, sample.policies, args.eps_opt).to_dict()
        report.update(exhausted=sample.exhausted, acceptance_rate=sample.acceptance_rate)
        d_m = minimal_occupancy(truth, _behavior(args, truth))['d_m']
        report['reference_bound'] = local_bound_reference(model.n, d_m, truth.H, truth.S, truth.A)
        if not args.keep:
            report['per_policy_errors'] = None
        return report
    return lower_bound_demo(truth, model, cap=args.cap)


def _absorbing(args):
    mdp = load_mdp(args.mdp)
    target = mdp
    if args.dataset:
        target = to_mdp(fit_plugin(load_dataset(args.dataset), mdp))
    if args.all_states:
        reports = verify_all_states(target)
    elif args.state is not None:
        reports = [verify_singleton_identity(target, args.state)]
    else:
        raise ValidationError('--state', "pass --state <s> or --all-states")
    if args.dataset:
        model = fit_plugin(load_dataset(args.dataset), mdp)
        for report in reports:
            report['diagnostic'] = singleton_gap(mdp, model, report['state'])
    result = {'passed': all(r['passed'] for r in reports), 'reports': reports}
    if not result['passed']:
        write_report(result, args.out, output_format(args.format))
        raise AcceptanceError("singleton-absorbing identity failed")
    return result


def _multitask(args):
    truth = load_mdp(args.mdp)
    rewards = parse_reward_source(args.rewards, truth.S, truth.A)
    results = task_agnostic_learn(load_dataset(args.dataset), rewards, truth)
    rows = [{'label': res['label'], 'max_suboptimality': float(res['suboptimality'].max()),
             'mean_suboptimality': float(res['suboptimality'].mean())} for res in results]
    return rows


def _anchor(args):
    cfg = _sweep_config(args)
    cfg.metrics = ['anchor']
    if args.instance:
        cfg.anchor = {'file': args.instance}
    if args.N_grid:
        cfg.n_grid = args.N_grid
    if args.replicates:
        cfg.replicates = args.replicates
    _emit_rows(run_sweep(cfg, print_logs=args.verbose), args.out)


def _sweep(args):
    cfg = _sweep_config(args)
    if args.h_grid:
        _emit_rows(run_h_sweep(cfg, args.h_grid, print_logs=args.verbose), args.out)
        return None
    _emit_rows(run_sweep(cfg, print_logs=args.verbose), args.out)


def _rate(args):
    fit = fit_rate(read_rows(args.rows), args.metric, min_replicates=args.min_replicates)
    report = fit.to_dict()
    if args.expect_slope is not None:
        low, high = args.expect_slope
        report['passed'] = bool(low <= fit.slope <= high and fit.r_squared >= args.min_r2)
        if not report['passed']:
            write_report(report, args.out, output_format(args.format))
            raise AcceptanceError(f"slope {fit.slope:.4f} (r^2 {fit.r_squared:.4f}) is outside "
                                  f"[{low}, {high}] or below r^2 {args.min_r2}")
    return report


def _accept(args):
    try:
        return run_acceptance(args.criteria, quick=args.quick, base_seed=args.seed,
                              threads=args.threads)
    except AcceptanceError as err:
        write_report(err.results, args.out, output_format(args.format))
        raise


def _sweep_config(args):
    cfg = load_config(args.config) if args.config else SweepConfig()
    if args.seed_given:
        cfg.base_seed = args.seed
    if args.threads_given:
        cfg.threads = args.threads
    cfg.validate()
    return cfg


## Parser ##

class _Parser(argparse.ArgumentParser):
    """ Usage errors exit with status 1 like every other failure. """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _global_flags(suppress):
    """ The flags accepted both before and after the subcommand. """
    def default(value):
        return argparse.SUPPRESS if suppress else value
    parser = _Parser(add_help=False)
    parser.add_argument('--format', dest='format', choices=['json', 'csv', 'yaml'],
            default=default(None),
            help='the report format (can also be set using the environment variable'
                 + ' OFFTAB_OUTPUT_FORMAT)')
    parser.add_argument('--seed', type=int, default=default(None), help='the base seed')
    parser.add_argument('--threads', type=int, default=default(None), help='worker processes')
    parser.add_argument('--out', default=default(None),
                        help='output file (default: standard output)')
    parser.add_argument('--config', default=default(None),
                        help='sweep config file (JSON or YAML)')
    parser.add_argument('--verbose', action='store_true', default=default(False),
                        help='print INFO logs')
    return parser


def build_parser():
    superparser = _Parser(prog="offtab", parents=[_global_flags(False)],
                    description='Model-based offline RL for tabular finite-horizon MDPs')
    superparser.add_argument('--version', action='version', version=VERSION)
    subparsers = superparser.add_subparsers(title="commands", dest='command', required=True)
    common = [_global_flags(True)]

    parser = subparsers.add_parser('generate', parents=common,
                                   help='generate a seeded MDP instance')
    parser.add_argument('--family', choices=FAMILIES, default='dirichlet_random')
    parser.add_argument('--S', type=int, required=True)
    parser.add_argument('--A', type=int, required=True)
    parser.add_argument('--H', type=int, required=True)
    parser.add_argument('--policy-out', dest='policy_out', help='write the behavior policy')
    parser.set_defaults(func=_generate)

    parser = subparsers.add_parser('roll', parents=common,
                                   help='roll an episode dataset')
    parser.add_argument('--mdp', required=True)
    parser.add_argument('--policy', help='behavior policy file (default: uniform)')
    parser.add_argument('--n', type=int, required=True)
    parser.add_argument('--stream', type=int, default=0, help='stream index')
    parser.set_defaults(func=_roll)

    parser = subparsers.add_parser('fit', parents=common,
                                   help='fit the plug-in model')
    parser.add_argument('--mdp', required=True)
    parser.add_argument('--dataset', required=True)
    parser.add_argument('--dump-model', dest='dump_model')
    parser.set_defaults(func=_fit)

    parser = subparsers.add_parser('plan', parents=common,
                                   help='plan on the MDP or on the empirical MDP')
    parser.add_argument('--mdp', required=True)
    parser.add_argument('--dataset')
    parser.add_argument('--policy', help='behavior policy whose coverage d_m is reported')
    parser.add_argument('--policy-out', dest='policy_out')
    parser.set_defaults(func=_plan)

    parser = subparsers.add_parser('ope', parents=common,
                                   help='uniform offline policy evaluation')
    parser.add_argument('which', choices=['global', 'local', 'lower-bound-demo'])
    parser.add_argument('--mdp', required=True)
    parser.add_argument('--dataset', required=True)
    parser.add_argument('--eps-opt', dest='eps_opt', type=float, default=0.0)
    parser.add_argument('--samples', type=int, default=200)
    parser.add_argument('--cap', type=int, default=DEFAULT_CAP)
    parser.add_argument('--sampled', action='store_true', help='sample the global class')
    parser.add_argument('--keep', action='store_true', help='report per-policy errors')
    parser.add_argument('--policy',
                        help='behavior policy for the reference bound (default: uniform)')
    parser.set_defaults(func=_ope)

    parser = subparsers.add_parser('absorbing', parents=common,
                                   help='singleton-absorbing identities')
    parser.add_argument('action', choices=['verify'])
    parser.add_argument('--mdp', required=True)
    parser.add_argument('--dataset', help='verify the empirical MDP and report Delta_s')
    parser.add_argument('--state', type=int)
    parser.add_argument('--all-states', dest='all_states', action='store_true')
    parser.set_defaults(func=_absorbing)

    parser = subparsers.add_parser('multitask', parents=common,
                                   help='offline task-agnostic learning')
    parser.add_argument('--mdp', required=True)
    parser.add_argument('--dataset', required=True)
    parser.add_argument('--rewards', required=True, help='reward file or random:K:seed')
    parser.set_defaults(func=_multitask, default_format='csv')

    parser = subparsers.add_parser('anchor', parents=common,
                                   help='anchor linear MDP sweeps')
    parser.add_argument('action', choices=['sweep'])
    parser.add_argument('--instance', help='anchor instance file (default: generated)')
    parser.add_argument('--N-grid', dest='N_grid', type=int, nargs='+')
    parser.add_argument('--replicates', type=int)
    parser.set_defaults(func=_anchor)

    parser = subparsers.add_parser('sweep', parents=common,
                                   help='run a Monte Carlo sweep')
    parser.add_argument('--h-grid', dest='h_grid', type=int, nargs='+',
                        help='repeat the sweep per horizon, for inspection only')
    parser.set_defaults(func=_sweep)

    parser = subparsers.add_parser('rate', parents=common,
                                   help='fit a log-log rate to sweep rows')
    parser.add_argument('--rows', required=True)
    parser.add_argument('--metric', required=True)
    parser.add_argument('--expect-slope', dest='expect_slope', type=float, nargs=2)
    parser.add_argument('--min-r2', dest='min_r2', type=float, default=0.95)
    parser.add_argument('--min-replicates', dest='min_replicates', type=int, default=10)
    parser.set_defaults(func=_rate)

    parser = subparsers.add_parser('accept', parents=common,
                                   help='run the acceptance suite')
    parser.add_argument('--criteria', type=int, nargs='+')
    parser.add_argument('--quick', action='store_true')
    parser.set_defaults(func=_accept)
    return superparser


def main(argv=None):
    """ Run one command and return the process exit code. """
    args = build_parser().parse_args(argv)
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    args.seed_given = args.seed is not None
    args.threads_given = args.threads is not None
    args.seed = args.seed if args.seed is not None else 0
    args.threads = args.threads if args.threads is not None else 1
    try:
        _result = args.func(args)
        if _result is not None:
            _format = output_format(args.format, getattr(args, 'default_format', 'json'))
            write_report(_result, args.out, _format)
    except OfftabError as err:
        sys.stderr.write(json.dumps(err.to_dict(), default=_jsonable) + '\n')
        return err.exit_code
    return 0


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


def _main():
    sys.exit(main())
