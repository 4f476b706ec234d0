"""Command-line entry points for the embedding exporter."""

from __future__ import annotations

import functools
import json
import sys

import click

from .errors import VlmExportError
from .export import ExportManifest, export_text, export_union_crops, oracle_dump


def _export_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VlmExportError as exc:
            click.echo(f"error kind={type(exc).__name__} msg={str(exc)!r}",
                       err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Export text/image embeddings in the scoring engine's binary format."""


@main.command("export-text")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@_export_errors
def export_text_cmd(manifest):
    """Embed the manifest's prompts and write one labeled row per prompt."""
    report = export_text(ExportManifest.load(manifest))
    click.echo(json.dumps(report))


@main.command("export-crops")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@_export_errors
def export_crops_cmd(manifest):
    """Embed the union crop of each subject/object box pair in the manifest."""
    report = export_union_crops(ExportManifest.load(manifest))
    click.echo(json.dumps(report))


@main.command("oracle")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@_export_errors
def oracle_cmd(manifest):
    """Report cosine similarities for labeled (text, image) pairs."""
    try:
        with open(manifest, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        text_file = doc["text_file"]
        image_file = doc["image_file"]
        pairs = [(str(a), str(b)) for a, b in doc["pairs"]]
        output = doc.get("output")
    except (OSError, ValueError, KeyError, TypeError) as exc:
        from .errors import ManifestError

        raise ManifestError(f"bad oracle manifest {manifest}: {exc}") from exc
    rows = oracle_dump(text_file, image_file, pairs)
    payload = json.dumps({"pairs": rows}, indent=2)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    click.echo(payload)


if __name__ == "__main__":
    main()
