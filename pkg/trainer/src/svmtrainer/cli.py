"""Trainer command line: train/export and conformance checking."""

from __future__ import annotations

import json
import sys

import click

from .core import BadSchema, DegenerateLabels, TrainerError, score_check, train_and_export


@click.group()
def main() -> None:
    """Train linear SVMs and export them for the private model bank."""


@main.command("train")
@click.option("--csv", "csv_path", required=True, help="Training table (features + label column).")
@click.option("--task", required=True, help="Target task tag (gender, age1..age3, or a trait).")
@click.option("--out", "out_path", required=True, help="Model file to write.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--frac-bits", type=int, default=16, show_default=True)
def train_cmd(csv_path, task, out_path, seed, frac_bits):
    try:
        summary = train_and_export(csv_path, task, out_path, seed=seed, frac_bits=frac_bits)
    except (BadSchema, DegenerateLabels) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except TrainerError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(
        f"trained {summary.task} on {summary.rows} rows "
        f"({summary.cv_folds}-fold CV accuracy {summary.cv_accuracy:.3f}) -> {summary.out_path}"
    )


@main.command("check")
@click.option("--model", "model_path", required=True)
@click.option("--csv", "csv_path", required=True)
def check_cmd(model_path, csv_path):
    try:
        report = score_check(model_path, csv_path)
    except (BadSchema, DegenerateLabels) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except TrainerError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(report.to_dict(), indent=2))


if __name__ == "__main__":
    main()
