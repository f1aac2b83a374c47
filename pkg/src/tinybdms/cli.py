"""``tinybdms`` command line: serve, repl, run and recover."""

from __future__ import annotations

import logging
import sys

import click

from .config import Config
from .errors import TinyBdmsError
from .instance import Instance


@click.group()
@click.option("--data-dir", help="Directory holding logs and storage.")
@click.option("--partitions", type=int, help="Partitions per dataset and query parallelism.")
@click.option("--listen", help="host:port for the HTTP server.")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.pass_context
def main(ctx, data_dir, partitions, listen, log_level):
    """A small semistructured data management system."""
    cfg = Config.from_env(data_dir=data_dir, partitions=partitions, listen=listen,
                          log_level=log_level.upper() if log_level else None)
    logging.basicConfig(level=cfg.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    ctx.obj = cfg


@main.command()
@click.pass_obj
def serve(cfg: Config):
    """Run the HTTP API."""
    import uvicorn

    from .gateway.server import create_app

    host, _, port = cfg.listen.rpartition(":")
    with Instance(cfg) as inst:
        app = create_app(inst)
        try:
            uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level=cfg.log_level.lower())
        finally:
            app.state.gateway.handles.clear()


@main.command()
@click.option("--url", help="Talk to a running server instead of opening the data directory.")
@click.pass_obj
def repl(cfg: Config, url):
    """Interactive shell; statements end with ';'."""
    from .gateway.repl import EmbeddedBackend, RemoteBackend, repl_loop

    interactive = sys.stdin.isatty()
    if url:
        repl_loop(RemoteBackend(url), sys.stdin, sys.stdout, interactive)
        return
    with Instance(cfg) as inst:
        repl_loop(EmbeddedBackend(inst), sys.stdin, sys.stdout, interactive)


@main.command()
@click.argument("files", nargs=-1, type=click.File("r"))
@click.option("--explain", is_flag=True, help="Print each query's plan before its results.")
@click.pass_obj
def run(cfg: Config, files, explain):
    """Execute AQL files (or stdin) and print the results."""
    from .gateway.server import render

    with Instance(cfg) as inst:
        session = inst.session()
        for f in files or [click.get_text_stream("stdin")]:
            try:
                click.echo(render(inst.execute(f.read(), session, explain=explain), explain), nl=False)
            except TinyBdmsError as e:
                raise click.ClickException(f"{f.name}: {e}") from None


@main.command()
@click.pass_obj
def recover(cfg: Config):
    """Run crash recovery on the data directory and print the replay summary."""
    inst = Instance(cfg).open()
    try:
        for s in inst.recovery:
            click.echo(s.describe())
    finally:
        inst.close()


if __name__ == "__main__":
    main()
