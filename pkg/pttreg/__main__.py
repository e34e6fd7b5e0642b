"""pttreg CLI entry point."""

from __future__ import annotations

import json
from collections.abc import Iterator
from contextlib import contextmanager
from enum import StrEnum
from pathlib import Path

import typer
from pydantic import BaseModel, ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from pttreg.config import BenchConfig, RunConfig, load_run_config
from pttreg.constants import EXIT_SELFTEST_FAILED
from pttreg.utils.exceptions import ConfigError, PttregError, StageError
from pttreg.utils.logging import configure_logging

app = typer.Typer(name="pttreg", help="Point tree attention registration toolkit")
err_console = Console(stderr=True)


class OutputFormat(StrEnum):
    json = "json"
    csv = "csv"


def to_json(model: BaseModel) -> str:
    """Stable serialisation: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(model.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def _write(text: str, out: Path | None) -> None:
    if out is None:
        typer.echo(text, nl=False)
    else:
        out.write_text(text, encoding="utf-8")


@contextmanager
def _guard() -> Iterator[None]:
    """Map pttreg errors to a rich error panel and their exit code."""
    try:
        yield
    except PttregError as exc:
        title = f"{type(exc.cause).__name__} in stage '{exc.stage}'" if isinstance(exc, StageError) else type(exc).__name__
        err_console.print(Panel(f"[red]{exc}[/red]", title=title))
        raise typer.Exit(code=exc.exit_code) from exc


def _config(command: str, config: Path | None, verbose: bool, **overrides: object) -> RunConfig:
    """Load the run config and set up logging at its level."""
    cfg = load_run_config(config, **overrides)
    configure_logging(cfg.log_level, verbose=verbose, command=command)
    return cfg


def _maybe_print_config(cfg: RunConfig, print_config: bool) -> None:
    if print_config:
        typer.echo(cfg.to_json())
        raise typer.Exit()


@app.command()
def register(
    source: Path = typer.Argument(..., help="Source cloud (.xyz or .ply)"),
    target: Path = typer.Argument(..., help="Target cloud (.xyz or .ply)"),
    config: Path | None = typer.Option(None, "--config", help="JSON config file"),
    seed: int | None = typer.Option(None, "--seed", min=0, help="Seed for weight initialisation"),
    gt: Path | None = typer.Option(None, "--gt", help="Ground-truth 4x4 transform file"),
    weights: Path | None = typer.Option(None, "--weights", help="Weight file (seeded init if absent)"),
    oracle: bool = typer.Option(False, "--oracle", help="Use ground-truth correspondences instead of the heads"),
    out: Path | None = typer.Option(None, "--out", help="Write the JSON report here"),
    print_config: bool = typer.Option(False, "--print-config", help="Print the effective config and exit"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
) -> None:
    """Register SOURCE onto TARGET and report the transform."""
    with _guard():
        cfg = _config("register", config, verbose, seed=seed, weights_path=str(weights) if weights else None)
        _maybe_print_config(cfg, print_config)
        if oracle and gt is None:
            raise ConfigError("--oracle requires --gt")
        from pttreg.core.pipeline import RegistrationPipeline

        result = RegistrationPipeline(cfg).run_files(source, target, gt, oracle=oracle)
        _write(to_json(result.report), out)


@app.command()
def bench(
    config: Path | None = typer.Option(None, "--config", help="JSON config file"),
    seed: int | None = typer.Option(None, "--seed", min=0, help="Seed for clouds and weights"),
    sizes: str | None = typer.Option(None, "--sizes", help="Comma-separated cloud sizes"),
    fmt: OutputFormat = typer.Option(OutputFormat.json, "--format", help="Report format"),
    out: Path | None = typer.Option(None, "--out", help="Write the report here"),
    parallel: bool = typer.Option(False, "--parallel", help="Run sizes concurrently"),
    dense_max: int | None = typer.Option(None, "--dense-max", min=1, help="Largest size run densely"),
    timing: bool = typer.Option(True, "--timing/--no-timing", help="Record wall-clock seconds"),
    print_config: bool = typer.Option(False, "--print-config", help="Print the effective config and exit"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
) -> None:
    """Sweep cloud sizes and compare dense and tree attention work."""
    with _guard():
        cfg = _config("bench", config, verbose, seed=seed)
        update: dict[str, object] = {}
        if sizes is not None:
            try:
                update["sizes"] = [int(s) for s in sizes.split(",") if s.strip()]
            except ValueError as exc:
                raise ConfigError(f"--sizes must be comma-separated integers: {exc}") from exc
        if dense_max is not None:
            update["dense_max_points"] = dense_max
        try:
            bench_cfg = BenchConfig(**{**cfg.bench.model_dump(), **update})
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc
        _maybe_print_config(cfg.model_copy(update={"bench": bench_cfg}), print_config)
        from pttreg.bench.sweep import report_to_csv, run_sweep

        report = run_sweep(cfg.tree, bench_cfg, cfg.seed, timing=timing, parallel=parallel)
        _write(report_to_csv(report) if fmt is OutputFormat.csv else to_json(report), out)


@app.command()
def tree(
    cloud: Path = typer.Argument(..., help="Cloud file (.xyz or .ply)"),
    config: Path | None = typer.Option(None, "--config", help="JSON config file"),
    out: Path | None = typer.Option(None, "--out", help="Write the JSON dump here"),
    print_config: bool = typer.Option(False, "--print-config", help="Print the effective config and exit"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
) -> None:
    """Build the point tree of CLOUD and dump its layers."""
    with _guard():
        cfg = _config("tree", config, verbose)
        _maybe_print_config(cfg, print_config)
        from pttreg.core.state import LayerDump, TreeReport
        from pttreg.geometry.io import load_cloud
        from pttreg.geometry.tree import build_tree, tree_stats

        pc = load_cloud(cloud)
        pt = build_tree(pc, cfg.tree)
        layers = [
            LayerDump(
                layer=i,
                count=pt.counts[i],
                coords=pt.coords[i].tolist(),
                parent=pt.parent_index[i].tolist() if i > 0 else None,
                children=[c.tolist() for c in pt.child_index[i]] if i < pt.layers - 1 else None,
            )
            for i in range(pt.layers)
        ]
        report = TreeReport(cloud=pc.id, layers=layers, stats=tree_stats(pt, cfg.tree.leaf_cap))
        _write(to_json(report), out)


@app.command()
def selftest(
    inject_region_fault: bool = typer.Option(
        False, "--inject-region-fault", help="Corrupt one attended region to exercise the soundness check"
    ),
    out: Path | None = typer.Option(None, "--out", help="Write the JSON report here"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
) -> None:
    """Run the built-in equivalence, recovery and invariant suites."""
    with _guard():
        _config("selftest", None, verbose)
        from pttreg.core.selftest import run_selftest

        report = run_selftest(inject_region_fault)
        table = Table(title="Self-test", show_header=True)
        table.add_column("Check", style="cyan")
        table.add_column("Result")
        table.add_column("Detail")
        for check in report.checks:
            table.add_row(check.name, "[green]pass[/green]" if check.passed else "[red]FAIL[/red]", check.detail)
        err_console.print(table)
        _write(to_json(report), out)
        if not report.all_passed:
            raise typer.Exit(code=EXIT_SELFTEST_FAILED)


@app.command()
def gen(
    base: Path = typer.Argument(..., help="Base cloud (.xyz or .ply)"),
    seed: int = typer.Option(0, "--seed", min=0, help="Seed for the transform and jitter"),
    jitter: float = typer.Option(0.0, "--jitter", min=0.0, help="Gaussian jitter std on the target"),
    out_dir: Path = typer.Option(Path("."), "--out-dir", help="Directory for src.xyz, dst.xyz, gt.txt"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
) -> None:
    """Write a synthetic source/target pair with its ground-truth transform."""
    with _guard():
        _config("gen", None, verbose)
        from pttreg.geometry.io import load_cloud, save_cloud, save_transform
        from pttreg.geometry.transform import synthetic_pair

        src, dst, gt = synthetic_pair(load_cloud(base), seed, jitter=jitter)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_cloud(out_dir / "src.xyz", src)
        save_cloud(out_dir / "dst.xyz", dst)
        save_transform(out_dir / "gt.txt", gt)
        err_console.print(f"[green]Wrote pair to {out_dir}[/green]")


@app.command("init-weights")
def init_weights(
    out: Path = typer.Option(..., "--out", help="Weight file to write"),
    config: Path | None = typer.Option(None, "--config", help="JSON config file"),
    seed: int | None = typer.Option(None, "--seed", min=0, help="Seed for initialisation"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
) -> None:
    """Write a seeded random weight bundle for the configured model."""
    with _guard():
        from pttreg.attention.io import save_bundle
        from pttreg.attention.weights import init_bundle

        cfg = _config("init-weights", config, verbose, seed=seed)
        save_bundle(out, init_bundle(cfg.model, cfg.tree.layers, cfg.seed))


if __name__ == "__main__":
    app()
