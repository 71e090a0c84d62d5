"""Command-line client for the laboratory.

One subcommand per experiment plus ``serve``. Experiments run in-process by
default; with ``--server`` the same config is posted to a running service
and the returned report is handled identically, so outputs match either way.
Exit status is 0 only when every verdict in the report passes.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx
import yaml
from pydantic import ValidationError

from .experiments import emit_report, run_experiment
from .schemas import ExperimentConfig, Report

EXPERIMENTS = ("born", "purestate", "superposition", "decoherence", "detection_sweep")


def _load_config(path: str | None, experiment: str, seed_override: str | None) -> ExperimentConfig:
    data: dict = {}
    if path is not None:
        text = Path(path).read_text()
        loaded = yaml.safe_load(text)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise click.UsageError(f"config file {path} must contain a mapping")
        data = loaded
    declared = data.get("experiment")
    if declared is not None and declared != experiment:
        raise click.UsageError(
            f"config file declares experiment {declared!r}, but the {experiment} subcommand was invoked"
        )
    data["experiment"] = experiment
    if seed_override:
        try:
            data["seeds"] = [int(s) for s in seed_override.split(",") if s.strip()]
        except ValueError:
            raise click.UsageError(f"--seed-override must be comma-separated integers, got {seed_override!r}")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise click.UsageError(f"invalid config:\n{exc}")


def _run_remote(cfg: ExperimentConfig, server: str) -> Report:
    url = server.rstrip("/") + "/experiments/run"
    response = httpx.post(url, json=cfg.model_dump(mode="json"), timeout=None)
    if response.status_code != 200:
        raise click.ClickException(f"server returned {response.status_code}: {response.text}")
    return Report.model_validate(response.json())


def _execute(experiment: str, config: str | None, out: str | None, seed_override: str | None,
             fmt: str, server: str | None) -> None:
    cfg = _load_config(config, experiment, seed_override)
    report = _run_remote(cfg, server) if server else run_experiment(cfg)
    out_dir = out or cfg.out_dir or f"runs/{experiment}"
    written = emit_report(report, out_dir, fmt=fmt)
    if report.error is not None:
        click.echo(f"ERROR {report.error}")
    for verdict in report.verdicts:
        click.echo(f"{'PASS' if verdict.passed else 'FAIL'} {verdict.name}: {verdict.detail}")
    click.echo(f"report: {'PASSED' if report.passed else 'FAILED'} ({', '.join(str(p) for p in written)})")
    sys.exit(0 if report.passed else 1)


@click.group()
def main() -> None:
    """Random-field laboratory experiments and service."""


def _register(experiment: str) -> None:
    @main.command(name=experiment, help=f"Run the {experiment} experiment.")
    @click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
                  help="YAML/JSON experiment config; defaults apply if omitted.")
    @click.option("--out", type=click.Path(file_okay=False), default=None,
                  help="Output directory (default: config out_dir or runs/<experiment>).")
    @click.option("--seed-override", default=None, help="Comma-separated seeds replacing the config's list.")
    @click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
                  help="Emit report.json only, or also the CSV plot tables.")
    @click.option("--server", default=None, help="Run on a fieldlab service at this base URL instead of in-process.")
    def _cmd(config, out, seed_override, fmt, server, _experiment=experiment):
        _execute(_experiment, config, out, seed_override, fmt, server)


for _name in EXPERIMENTS:
    _register(_name)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


@main.command()
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="csv")
def render(report_path: str, out: str, fmt: str) -> None:
    """Re-emit an existing report.json (e.g. to regenerate CSV tables)."""
    report = Report.model_validate(json.loads(Path(report_path).read_text()))
    written = emit_report(report, out, fmt=fmt)
    click.echo("\n".join(str(p) for p in written))


if __name__ == "__main__":
    main()
