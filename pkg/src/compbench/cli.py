"""Command-line driver.

Every subcommand is configured by a YAML file (plus the --desk-scale preset)
and writes into a run directory. Exit codes: 0 success, 2 config error,
3 missing upstream artifact, 4 data-integrity error.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from . import pipeline
from .config import load_config
from .errors import (
    CompbenchError,
    ConfigError,
    DataIntegrityError,
    FormatError,
    MissingArtifactError,
)

EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_INTEGRITY = 4


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, MissingArtifactError):
        return EXIT_MISSING
    if isinstance(exc, (DataIntegrityError, FormatError)):
        return EXIT_INTEGRITY
    return 1


def common_options(fn):
    @click.option("--config", "config_path", type=click.Path(), default=None,
                  help="YAML run configuration.")
    @click.option("--out", "out_dir", type=click.Path(), default=None,
                  help="Run directory (defaults to the config's out_root).")
    @click.option("--encoder", "encoders", multiple=True,
                  help="Restrict to these encoders (repeatable).")
    @click.option("--desk-scale", is_flag=True, help="Apply the small desk-scale preset.")
    @functools.wraps(fn)
    def wrapper(config_path, out_dir, encoders, desk_scale, **kwargs):
        try:
            cfg = load_config(config_path, desk_scale=desk_scale)
            out = Path(out_dir) if out_dir else Path(cfg.out_root)
            out.mkdir(parents=True, exist_ok=True)
            fn(cfg, out, tuple(encoders) or None, **kwargs)
        except CompbenchError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))

    return wrapper


@click.group()
def main():
    """Audio-scene compositionality benchmark (A-COAT / A-TRE)."""


def _register(name, stage_fn, help_text):
    @main.command(name=name, help=help_text)
    @common_options
    def _cmd(cfg, out, encoders):
        if stage_fn in (pipeline.stage_gen_pool, pipeline.stage_balance, pipeline.stage_synth):
            stage_fn(cfg, out)
        else:
            stage_fn(cfg, out, encoders)
        click.echo(f"{name}: done ({out})")

    return _cmd


_register("gen-pool", pipeline.stage_gen_pool, "Sample candidate scene/quadruple pools.")
_register("balance", pipeline.stage_balance, "Entropy-balance the pools and make splits.")
_register("synth", pipeline.stage_synth, "Render selected scenes to WAV files.")
_register("embed", pipeline.stage_embed, "Compute baseline embeddings for rendered scenes.")
_register("eval-coat", pipeline.stage_eval_coat, "Score A-COAT on the balanced quadruples.")
_register("train-tre", pipeline.stage_train_tre, "Train the composition model per encoder.")
_register("eval-tre", pipeline.stage_eval_tre, "Score A-TRE on the held-out test split.")
_register("report", pipeline.stage_report, "Assemble tables, statistics, and figures.")
_register("run-all", pipeline.run_all, "Run the full pipeline end to end.")


if __name__ == "__main__":
    main()
