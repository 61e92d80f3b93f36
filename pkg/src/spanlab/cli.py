"""Command line entry points: serve, campaign ops, dataset checks, demo data."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .api import DEFAULT_ADMIN_TOKEN_ENV, create_app
from .campaigns import CampaignConfig
from .engine import CampaignManager
from .errors import SpanlabError
from .ingest import get_example, list_setups, load_dataset, load_outputs, render_example
from .llm import JOB_FINISHED, HttpChatClient, LlmJob
from .sample import write_sample_bundle

_data_dir_option = click.option(
    "--data-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("."),
    show_default=True,
    help="Data root holding datasets/, outputs/ and campaigns/.",
)


def _fail(exc: SpanlabError) -> None:
    raise click.ClickException(str(exc))


@click.group()
def main():
    """Collect and inspect word-span annotations over model outputs."""


@main.command()
@_data_dir_option
@click.option("--bind", default="127.0.0.1:8000", show_default=True, help="HOST:PORT to listen on.")
@click.option(
    "--admin-token-env",
    default=DEFAULT_ADMIN_TOKEN_ENV,
    show_default=True,
    help="Name of the environment variable holding the admin bearer token.",
)
@click.option(
    "--static-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Directory with built web UI assets to serve.",
)
def serve(data_dir: Path, bind: str, admin_token_env: str, static_dir: Path | None):
    """Run the HTTP service."""
    import uvicorn

    host, _, port_str = bind.rpartition(":")
    if not host or not port_str.isdigit():
        raise click.ClickException(f"--bind must be HOST:PORT, got {bind!r}")
    app = create_app(data_dir, admin_token_env=admin_token_env, static_dir=static_dir)
    uvicorn.run(app, host=host, port=int(port_str), log_level="info")


@main.group()
def campaign():
    """Create, run and export annotation campaigns."""


@campaign.command("create")
@_data_dir_option
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="Campaign config JSON file.",
)
def campaign_create(data_dir: Path, config_path: Path):
    """Register a campaign and build its batch table."""
    try:
        config = CampaignConfig.from_json(json.loads(config_path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise click.ClickException(f"bad campaign config {config_path}: {exc}")
    manager = CampaignManager(data_dir)
    try:
        engine = manager.create(config)
    except SpanlabError as exc:
        _fail(exc)
    click.echo(f"created campaign {engine.campaign_id} ({engine.config.kind}) with {len(engine.state.batches)} batches")


@campaign.command("run-llm")
@_data_dir_option
@click.argument("campaign_id")
def campaign_run_llm(data_dir: Path, campaign_id: str):
    """Run the LLM annotation job for CAMPAIGN_ID; blocks until done."""
    manager = CampaignManager(data_dir)
    try:
        engine = manager.get(campaign_id)
        if engine.config.llm is None:
            raise click.ClickException(f"campaign {campaign_id!r} is not an llm campaign")
        client = HttpChatClient(engine.config.llm)
        job = LlmJob(engine, client, manager.render_text, manager.output_text)
        job.run()
    except SpanlabError as exc:
        _fail(exc)
    status = job.status()
    click.echo(f"{status.state}: completed={status.completed_count} errors={status.error_count}")
    if status.state != JOB_FINISHED or status.error_count:
        sys.exit(1)


@campaign.command("export")
@_data_dir_option
@click.argument("campaign_id")
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]), default="jsonl", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def campaign_export(data_dir: Path, campaign_id: str, fmt: str, out: Path):
    """Write all completed records of CAMPAIGN_ID to a file."""
    manager = CampaignManager(data_dir)
    try:
        blob = manager.store.export(campaign_id, fmt)
    except SpanlabError as exc:
        _fail(exc)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(blob)
    click.echo(f"wrote {len(blob)} bytes to {out}")


@main.group()
def dataset():
    """Inspect datasets on disk."""


@dataset.command("validate")
@_data_dir_option
@click.argument("dataset_id")
def dataset_validate(data_dir: Path, dataset_id: str):
    """Load DATASET_ID fully: every example, every render, every output set."""
    try:
        record = load_dataset(data_dir, dataset_id)
        for split, count in record.splits.items():
            for idx in range(count):
                render_example(get_example(data_dir, dataset_id, split, idx))
            click.echo(f"split {split}: {count} examples ok")
            for setup_id in list_setups(data_dir, dataset_id, split):
                outputs = load_outputs(data_dir, dataset_id, split, setup_id)
                click.echo(f"split {split}: setup {setup_id}: {len(outputs.outputs)} outputs ok")
    except SpanlabError as exc:
        _fail(exc)
    click.echo(f"dataset {dataset_id} is valid")


@main.group()
def sample():
    """Demo content."""


@sample.command("init")
@click.argument("directory", type=click.Path(file_okay=False, path_type=Path))
@click.option(
    "--llm-base-url",
    default="http://127.0.0.1:11434",
    show_default=True,
    help="Model API base URL written into the demo llm campaign config.",
)
def sample_init(directory: Path, llm_base_url: str):
    """Write the offline demo bundle (dataset, outputs, campaign configs)."""
    paths = write_sample_bundle(directory, llm_base_url=llm_base_url)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


if __name__ == "__main__":
    main()
