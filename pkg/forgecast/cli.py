import argparse
import logging
import logging.config
import os
import sys

from forgecast import evaluation, harness, synthgen

log = logging.getLogger(__name__)

DEFAULT_FORMAT = '%(asctime)s %(levelname)-5.5s [%(name)s] %(message)s'


def setup_logging(log_config=None, verbose=False):
    if log_config:
        if not os.path.exists(log_config):
            raise ConfigError('Logging config {0} does not exist'.format(log_config))
        logging.config.fileConfig(log_config, disable_existing_loggers=False)
    else:
        logging.basicConfig(level=logging.INFO, format=DEFAULT_FORMAT)
    if verbose:
        logging.getLogger('forgecast').setLevel(logging.DEBUG)


def _run(args):
    if not os.path.exists(args.config):
        raise ConfigError('Config file {0} does not exist'.format(args.config))
    config = harness.load_config(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    report = harness.run(config)
    sys.stdout.write(report.table.to_text())
    return 0


def _gen(args):
    spec = synthgen.DgpSpec(kind=args.kind, length=args.length, noise_sd=args.noise_sd)
    synthgen.dump_series(spec, args.seed, args.out)
    return 0


def _table(args):
    table = evaluation.build_table(evaluation.read_runs(args.runs), alpha=args.alpha)
    if args.out:
        evaluation.write_table(table, args.out, os.path.splitext(args.out)[0] + '.txt')
    sys.stdout.write(table.to_text())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog='forgecast',
                                     description='Forecasting under distribution shift with learned forgetting')
    parser.add_argument('--log-config', dest='log_config', help='logging ini file')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging for forgecast')
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    run = sub.add_parser('run', help='run an experiment from a JSON config')
    run.add_argument('--config', required=True, help='JSON experiment config')
    run.add_argument('--output-dir', dest='output_dir', help='overrides output_dir in the config')
    run.set_defaults(func=_run)

    gen = sub.add_parser('gen', help='write one synthetic series as CSV')
    gen.add_argument('--kind', required=True, choices=[k.value for k in synthgen.DgpKind])
    gen.add_argument('--seed', type=int, required=True)
    gen.add_argument('--out', required=True)
    gen.add_argument('--length', type=int, default=synthgen.LENGTH)
    gen.add_argument('--noise-sd', dest='noise_sd', type=float, default=synthgen.NOISE_SD)
    gen.set_defaults(func=_gen)

    table = sub.add_parser('table', help='rebuild the result table from runs.csv')
    table.add_argument('--runs', required=True)
    table.add_argument('--alpha', type=float, default=evaluation.SIGNIFICANCE)
    table.add_argument('--out', help='CSV path for the table; a .txt rendering is written beside it')
    table.set_defaults(func=_table)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        setup_logging(args.log_config, args.verbose)
        return args.func(args)
    except (ValueError, ArithmeticError, RuntimeError, OSError) as e:
        log.error('{0}: {1}'.format(type(e).__name__, e))
        return 1


class ConfigError(ValueError):
    pass


if __name__ == '__main__':
    sys.exit(main())
