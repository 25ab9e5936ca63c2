"""Command-line entry points: adapt a WAV directory, validate an output file."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .adapt import adapt as run_adapt
from .adapt import validate as run_validate
from .errors import AdapterError, ConfigError
from .spec import load_spec


def _load_ids(path: Path) -> list[str]:
    """One id per line, or JSON-lines records with an 'id' field."""
    ids = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            doc = json.loads(line)
            if "id" not in doc:
                raise ConfigError(f"{path}: JSON line without an 'id' field")
            ids.append(doc["id"])
        else:
            ids.append(line)
    return ids


@click.group()
def main():
    """Wrap external audio encoders into interchange embedding files."""


@main.command("adapt")
@click.option("--wav-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def adapt_cmd(wav_dir, spec_path, out):
    """Embed every WAV under --wav-dir per the spec and write --out."""
    try:
        spec = load_spec(spec_path)
        result = run_adapt(wav_dir, spec, out)
    except AdapterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"{spec.name}: wrote {result.n_scenes} embeddings (dim {result.dim}) to {out}")


@main.command("validate")
@click.option("--embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ids", "ids_path", required=True, type=click.Path(exists=True, dir_okay=False))
def validate_cmd(embeddings, ids_path):
    """Check structure and id coverage of an embedding file."""
    try:
        report = run_validate(embeddings, _load_ids(Path(ids_path)))
    except AdapterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for line in report.lines():
        click.echo(line)
    sys.exit(0 if report.ok else 1)
