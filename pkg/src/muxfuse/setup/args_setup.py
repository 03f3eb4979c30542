from argparse import ArgumentParser, Namespace
import sys

import logging

from muxfuse.constants import EXIT_USAGE

logger = logging.getLogger(__name__)

class args(Namespace):
    command: str
    config: str | None
    verbose: bool
    dataset_dir: str
    knn: int | None
    config_file: str
    grid_file: str
    seed: int | None
    parallel: int | None
    out: str | None
    force: bool

class MuxfuseParser(ArgumentParser):
    """Argument parser whose usage errors exit with the usage code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")

def init_parser() -> ArgumentParser:
    """Initializes and configures the command-line interface argument parser.

    Returns:
        ArgumentParser: The configured argument parser instance.
    """
    parser = MuxfuseParser(prog='muxfuse', description='Multiplex graph representation learning and fusion experiments')
    parser.add_argument('--config',
                        type=str,
                        metavar='CONFIG FILE',
                        help='Application config YAML (overrides the user and packaged config)')
    parser.add_argument('-v', '--verbose',
                        action='store_true',
                        help='Log at DEBUG level on the console')

    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=MuxfuseParser)

    prepare = subparsers.add_parser('prepare', help='Add a KNN feature-similarity layer to a dataset')
    prepare.add_argument('dataset_dir', help='Dataset directory holding manifest.json')
    prepare.add_argument('-k', '--knn',
                         type=int,
                         help='Neighbors per node of the KNN layer (default from config)')
    prepare.add_argument('-o', '--out',
                         type=str,
                         metavar='OUTPUT DIR',
                         help='Directory of the augmented dataset (default: in place)')

    run = subparsers.add_parser('run', help='Train and evaluate one method on one dataset')
    run.add_argument('config_file', help='Run config YAML')
    run.add_argument('-s', '--seed',
                     type=int,
                     help='Run seed, overrides MUXFUSE_SEED and the config file')
    run.add_argument('-o', '--out',
                     type=str,
                     metavar='OUTPUT DIR',
                     help='Directory of the report JSON and metrics.csv')
    run.add_argument('-f', '--force',
                     action='store_true',
                     help='Rerun even if a report with the same config hash exists')

    grid = subparsers.add_parser('grid', help='Run a grid of methods x seeds and aggregate the results')
    grid.add_argument('grid_file', help='Grid YAML with seeds and runs')
    grid.add_argument('-p', '--parallel',
                      type=int,
                      help='Worker processes (default from config)')
    grid.add_argument('-o', '--out',
                      type=str,
                      metavar='OUTPUT DIR',
                      help='Directory of reports and aggregated tables')
    grid.add_argument('-f', '--force',
                      action='store_true',
                      help='Rerun cells whose report already exists')

    subparsers.add_parser('methods', help='List the fusion taxonomy of method ids')
    return parser
