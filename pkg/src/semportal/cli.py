"""Admin command line: ingest, render, query, prereq, serve.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import graph as graphmod
from . import services, store, triples
from .markup import ParseFailure
from .portal import Portal, PortalConfig, create_app

_DOMAIN_ERRORS = (
    store.StoreError,
    services.ServiceError,
    triples.MalformedQuery,
    graphmod.UnknownNode,
    ParseFailure,
    ValueError,
)


def _open_portal(data_dir: str | None, token: str | None = None) -> Portal:
    config = PortalConfig.from_env(data_dir=data_dir, write_token=token)
    return Portal(config)


@click.group()
@click.option(
    "--data-dir",
    envvar="PORTAL_DATA_DIR",
    default=None,
    help="Store data directory (default: $PORTAL_DATA_DIR or ./data).",
)
@click.pass_context
def main(ctx: click.Context, data_dir: str | None) -> None:
    """Semantic document portal."""
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = data_dir


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--author", default="cli", show_default=True)
@click.option("--message", default="corpus ingest", show_default=True)
@click.pass_context
def ingest(ctx: click.Context, directory: str, author: str, message: str) -> None:
    """Ingest every .stx document under DIRECTORY."""
    portal = _open_portal(ctx.obj["data_dir"])
    reports = portal.ingest_corpus(Path(directory), author=author, message=message)
    failed = 0
    for report in reports:
        if report.status == "ok":
            click.echo(
                f"ok {report.path} rev={report.revision} "
                f"fragments={report.fragments} triples={report.triples_added}"
            )
        else:
            failed += 1
            click.echo(f"failed {report.path}", err=True)
            for error in report.parse_errors:
                click.echo(
                    f"  {error.line}:{error.column} {error.code}: {error.message}",
                    err=True,
                )
    click.echo(f"{len(reports) - failed}/{len(reports)} documents ingested")
    if failed:
        sys.exit(1)


@main.command("render")
@click.argument("path")
@click.option("-r", "--rev", type=int, default=None, help="Revision (default: head).")
@click.pass_context
def render_cmd(ctx: click.Context, path: str, rev: int | None) -> None:
    """Print the rendered document for PATH."""
    portal = _open_portal(ctx.obj["data_dir"])
    try:
        click.echo(portal.rendered_document(path, rev), nl=False)
    except _DOMAIN_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.argument("query_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def query(ctx: click.Context, query_file: str) -> None:
    """Run the query in QUERY_FILE; one JSON binding per line."""
    portal = _open_portal(ctx.obj["data_dir"])
    try:
        bindings = portal.run_query(Path(query_file).read_text(encoding="utf-8"))
    except _DOMAIN_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    for binding in bindings:
        click.echo(json.dumps(binding, sort_keys=True, ensure_ascii=False))


@main.command()
@click.argument("uri")
@click.option(
    "-f",
    "--format",
    "fmt",
    type=click.Choice(["svg", "dot"]),
    default="svg",
    show_default=True,
)
@click.pass_context
def prereq(ctx: click.Context, uri: str, fmt: str) -> None:
    """Print the prerequisite closure of URI as an annotated graph."""
    portal = _open_portal(ctx.obj["data_dir"])
    try:
        if fmt == "dot":
            click.echo(portal.prerequisites_dot(uri), nl=False)
        else:
            click.echo(portal.prerequisites_svg(uri), nl=False)
    except _DOMAIN_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.option("--listen", envvar="PORTAL_LISTEN", default=None, help="host:port")
@click.option("--token", envvar="PORTAL_WRITE_TOKEN", default=None, help="Write token.")
@click.pass_context
def serve(ctx: click.Context, listen: str | None, token: str | None) -> None:
    """Run the portal HTTP service until shutdown."""
    import uvicorn

    config = PortalConfig.from_env(
        data_dir=ctx.obj["data_dir"], listen=listen, write_token=token
    )
    portal = Portal(config)
    app = create_app(portal)
    host, _, port = config.listen.rpartition(":")
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    except OSError as exc:  # bind failure
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
