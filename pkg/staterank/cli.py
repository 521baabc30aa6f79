"""Command line interface: one subcommand per stage plus ``pipeline``.

Errors raised by the library are reported on stderr and turned into the
process exit status through their ``code``.
"""

import logging

import click

from staterank.__version__ import __version__
from staterank.config import PipelineConfig
from staterank.exceptions import StateRankError
from staterank.stages import STAGES, create_pipeline

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class StateRankGroup(click.Group):

    def invoke(self, ctx):
        try:
            return super(StateRankGroup, self).invoke(ctx)
        except StateRankError as e:
            click.echo('Error: %s' % e, err=True)
            ctx.exit(e.code)


def configure_logging(verbose, quiet):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger('staterank').setLevel(level)
    # font discovery is chatty at DEBUG
    logging.getLogger('matplotlib').setLevel(max(level, logging.INFO))


@click.group(cls=StateRankGroup)
@click.option('--config', 'config_path', type=click.Path(dir_okay=False),
              help='JSON configuration file.')
@click.option('--seed', type=int, help='Master seed (overrides SEED).')
@click.option('--out-dir', type=click.Path(file_okay=False),
              help='Directory artifacts are written to (overrides OUT_DIR).')
@click.option('-v', '--verbose', is_flag=True, help='Log debug diagnostics.')
@click.option('-q', '--quiet', is_flag=True, help='Only log warnings and errors.')
@click.version_option(__version__, prog_name='staterank')
@click.pass_context
def cli(ctx, config_path, seed, out_dir, verbose, quiet):
    """Latent behavioural states and PageRank fingerprints from home sensor events."""
    configure_logging(verbose, quiet)
    config = PipelineConfig.load(config_path, {'SEED': seed, 'OUT_DIR': out_dir})
    ctx.obj = create_pipeline(config)


def _stage_command(name, stage):
    @click.pass_obj
    def command(pipeline):
        pipeline.dispatch(name)

    summary = (stage.__doc__ or '').strip().splitlines()
    return click.command(name, help=summary[0] if summary else None)(command)


for _name, _stage in STAGES:
    cli.add_command(_stage_command(_name, _stage))


@cli.command('pipeline')
@click.pass_obj
def run_pipeline(pipeline):
    """Run every stage in order."""
    pipeline.run_all()


def main():
    cli(prog_name='staterank')


if __name__ == '__main__':
    main()
