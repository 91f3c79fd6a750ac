"""Command-line interface: run, score, report, synth, merge, validate-manifest."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

from .errors import CorpusforgeError
from .manifest import STAGES, read_manifest, stage_report, write_manifest
from .pipeline import PipelineConfig, merge_minimal, resample_merged_records, run_pipeline
from .report import build_run_report, format_run_report, format_score_table, score_manifests
from .synth import SynthSpec, generate_synthetic_corpus, mock_pipeline_config


@click.group()
@click.version_option(package_name="corpusforge")
def main():
    """Refine noisy speech corpora into timestamped training data."""


def _apply_set_options(config: PipelineConfig, assignments: tuple[str, ...]) -> None:
    import json

    from .errors import ConfigError

    for assignment in assignments:
        key, sep, raw = assignment.partition("=")
        if not sep:
            raise click.BadParameter(f"--set expects key=value, got {assignment!r}")
        if key not in PipelineConfig.__dataclass_fields__:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        setattr(config, key, value)


def _load_config(config_path: str | None, set_options: tuple[str, ...] = (), **overrides) -> PipelineConfig:
    if config_path is not None:
        config = PipelineConfig.from_yaml(config_path)
    else:
        config = PipelineConfig()
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    _apply_set_options(config, set_options)
    config.validate()
    return config


@main.command()
@click.option("--config", "-c", type=click.Path(exists=True, dir_okay=False), help="YAML config file.")
@click.option("--input", "-i", "input_manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--until", type=click.Choice(STAGES), help="Stop after this stage.")
@click.option("--no-resume", is_flag=True, help="Ignore existing stage files.")
@click.option("--seed", type=int, help="Override the configured seed.")
@click.option("--workers", type=int, help="Worker pool size.")
@click.option("--batch-size", type=int)
@click.option("--wer-threshold", type=float)
@click.option("--max-duration", type=float)
@click.option("--target-rate", type=int)
@click.option("--collar", type=float)
@click.option("--no-audio", is_flag=True, help="Skip audio rewriting in the clean stage.")
@click.option("--set", "set_options", multiple=True, metavar="KEY=VALUE",
              help="Override any config field (JSON-typed values); repeatable.")
def run(config, input_manifest, output_dir, until, no_resume, seed, workers, batch_size,
        wer_threshold, max_duration, target_rate, collar, no_audio, set_options):
    """Run the pipeline over a manifest."""
    cfg = _load_config(
        config,
        set_options,
        seed=seed,
        worker_pool_size=workers,
        batch_size=batch_size,
        wer_threshold=wer_threshold,
        max_duration_s=max_duration,
        target_sample_rate_hz=target_rate,
        collar_s=collar,
    )
    if no_audio:
        cfg.process_audio = False
    result = run_pipeline(cfg, input_manifest, output_dir, stop_after=until, resume=not no_resume)
    if result.completed:
        click.echo((result.report_path).read_text(encoding="utf-8"), nl=False)
        click.echo(f"final manifest: {result.final_manifest}")
    else:
        click.echo(f"stopped after stage {until!r}; rerun without --until to finish")


@main.command()
@click.option("--reference", "-r", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--hypothesis", "-h", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--collar", type=float, default=0.2, show_default=True)
@click.option("--matched-only", is_flag=True, help="Average IoU over matched words only.")
def score(reference, hypothesis, collar, matched_only):
    """Score a hypothesis manifest against a reference manifest."""
    rows = score_manifests(
        read_manifest(reference), read_manifest(hypothesis), collar, matched_only
    )
    click.echo(format_score_table(rows, collar), nl=False)
    if matched_only:
        click.echo("mIoU averaged over matched words only")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--by", type=click.Choice(["source_dataset", "region"]), default="source_dataset",
              show_default=True)
@click.option("--seed", type=int, default=None, help="Override the seed echoed in the header.")
def report(run_dir, by, seed):
    """Rebuild the stage-size report from a run directory."""
    if seed is None:
        snapshot = Path(run_dir) / "run_config.json"
        seed = json.loads(snapshot.read_text())["seed"] if snapshot.exists() else 0
    payload = build_run_report(run_dir, group_by=by)
    click.echo(format_run_report(payload, seed), nl=False)


@main.command("stage-report")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--by", type=click.Choice(["source_dataset", "region"]), default="source_dataset",
              show_default=True)
def stage_report_cmd(manifest_path, by):
    """Passed/rejected hours per group for a single manifest."""
    rows = stage_report(read_manifest(manifest_path), group_by=by)
    click.echo(f"{'group':<16}{'passed_h':>10}{'rejected_h':>12}")
    for row in rows:
        click.echo(f"{row.group:<16}{row.hours_passed:>10.2f}{row.hours_rejected:>12.2f}")


@main.command()
@click.option("--out", "-o", required=True, type=click.Path(file_okay=False))
@click.option("--n", "n_records", required=True, type=int)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--duration-min", type=float, default=2.0, show_default=True)
@click.option("--duration-max", type=float, default=8.0, show_default=True)
@click.option("--no-transcript-fraction", type=float, default=0.0)
@click.option("--manual-fraction", type=float, default=0.0)
@click.option("--provided-error-fraction", type=float, default=0.0)
@click.option("--overlong-fraction", type=float, default=0.0)
@click.option("--badchar-fraction", type=float, default=0.0)
@click.option("--digit-fraction", type=float, default=0.3)
@click.option("--rates", default="16000", help="Comma-separated source sample rates.")
def synth(out, n_records, seed, duration_min, duration_max, no_transcript_fraction,
          manual_fraction, provided_error_fraction, overlong_fraction, badchar_fraction,
          digit_fraction, rates):
    """Generate a synthetic corpus plus a ready-to-run mock config."""
    spec = SynthSpec(
        n_records=n_records,
        seed=seed,
        duration_min_s=duration_min,
        duration_max_s=duration_max,
        no_transcript_fraction=no_transcript_fraction,
        manual_fraction=manual_fraction,
        provided_error_fraction=provided_error_fraction,
        overlong_fraction=overlong_fraction,
        badchar_fraction=badchar_fraction,
        digit_fraction=digit_fraction,
        sample_rates=tuple(int(r) for r in rates.split(",")),
    )
    records = generate_synthetic_corpus(spec, out)
    config_path = Path(out) / "config.yaml"
    config_path.write_text(
        yaml.safe_dump(mock_pipeline_config(spec), sort_keys=True), encoding="utf-8"
    )
    click.echo(f"wrote {len(records)} records to {out}/manifest.jsonl (seed={seed})")
    click.echo(f"mock pipeline config: {config_path}")


@main.command()
@click.option("--full", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Minimally processed manifest.")
@click.option("--refined", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Refined manifest; wins on id collisions.")
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
@click.option("--audio-root", type=click.Path(exists=True, file_okay=False),
              help="Resolve audio here and resample records lacking the target rate.")
@click.option("--target-rate", type=int, default=16000, show_default=True)
def merge(full, refined, out, audio_root, target_rate):
    """Merge a minimally processed manifest with a refined one."""
    merged = merge_minimal(read_manifest(full), read_manifest(refined))
    if audio_root is not None:
        merged = resample_merged_records(merged, audio_root, Path(out).parent, target_rate)
    write_manifest(merged, out)
    click.echo(f"merged {len(merged)} records into {out}")


@main.command("validate-manifest")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
def validate_manifest(manifest_path):
    """Check a manifest's schema and invariants; exit nonzero on failure."""
    try:
        records = read_manifest(manifest_path)
    except CorpusforgeError as exc:
        click.echo(f"INVALID: {exc}", err=True)
        sys.exit(1)
    click.echo(f"OK: {len(records)} records")


if __name__ == "__main__":
    main()
