"""Command-line interface.

Exit codes: 0 success, 1 configuration error, 2 partial completion (one or
more samples deferred by the screening endpoint).
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .config import ConfigError, PipelineConfig, load_config
from .fixtures import gen_fixtures
from .inference import make_client
from .manifest import MANIFEST_NAME, read_manifest
from .package import load_puzzle_json
from .pipeline import ALL_STAGES, Pipeline, PipelineError, aggregate_stats, format_stats_table
from .reward import total_reward
from .rollout import parse_index_sequence
from .types import AvJigsawError, Strategy

STRATEGY_CHOICES = [s.name.lower() for s in Strategy]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


def _build_config(config_path, seed, workers, endpoint_url) -> PipelineConfig:
    overrides = {}
    if seed is not None:
        overrides["rng_seed"] = seed
    if workers is not None:
        overrides["workers"] = workers
    if endpoint_url is not None:
        overrides["screen_endpoint_url"] = endpoint_url
    return load_config(config_path, overrides)


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="Flat JSON config file.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Corpus-level RNG seed.")(fn)
    fn = click.option("--workers", type=int, default=None, help="Worker pool size.")(fn)
    fn = click.option("--endpoint-url", default=None,
                      help="Inference endpoint (falls back to AVJIGSAW_ENDPOINT_URL; "
                           "mock://pass|reject|defer runs offline).")(fn)
    fn = click.option("--verbose", is_flag=True, default=False)(fn)
    return fn


@click.group()
@click.version_option(version=__version__, prog_name="avjigsaw")
def main() -> None:
    """Curate audio-video samples into reordering puzzles and grade rollouts."""


def _run_stages(stages, input_dir, output_dir, strategy, config_path, seed,
                workers, endpoint_url, resume, verbose) -> int:
    _setup_logging(verbose)
    try:
        config = _build_config(config_path, seed, workers, endpoint_url)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        return EXIT_CONFIG
    client = None
    if "screen" in stages or strategy in (Strategy.SMS, Strategy.CMM):
        try:
            client = make_client(config.inference)
        except AvJigsawError as e:
            click.echo(f"config error: {e}", err=True)
            return EXIT_CONFIG
    pipe = Pipeline(input_dir, output_dir, config, strategy, client=client)
    try:
        result = pipe.run(stages=stages, resume=resume)
    except PipelineError as e:
        click.echo(f"pipeline error: {e}", err=True)
        return EXIT_CONFIG
    for name, count in result.stage_counts.items():
        click.echo(f"{name}: {count}")
    if result.build_failures:
        click.echo(f"build failures: {result.build_failures}")
    if result.deferred:
        click.echo(f"deferred: {result.deferred} (rerun with --resume once the endpoint is back)")
        return EXIT_PARTIAL
    return EXIT_OK


def _stage_command(name: str, stages, needs_input: bool = True):
    @click.argument("output_dir", type=click.Path(file_okay=False))
    @click.option("--strategy", type=click.Choice(STRATEGY_CHOICES), default="jmi")
    @click.option("--resume", is_flag=True, default=False,
                  help="Continue into an existing output directory.")
    @_common_options
    def cmd(output_dir, strategy, resume, config_path, seed, workers,
            endpoint_url, verbose, input_dir=None):
        strat = Strategy[strategy.upper()]
        src = input_dir if needs_input else output_dir
        sys.exit(_run_stages(stages, src, output_dir, strat, config_path,
                             seed, workers, endpoint_url,
                             resume or "probe" not in stages, verbose))

    if needs_input:
        cmd = click.argument("input_dir", type=click.Path(exists=True, file_okay=False))(cmd)
    cmd.__name__ = name
    return cmd


main.command("run", help="Full pipeline: probe, filter, screen, build.")(
    _stage_command("run", ALL_STAGES))
main.command("probe", help="Probe inputs and seed the manifest.")(
    _stage_command("probe", ("probe",)))
main.command("filter", help="Signal-based stage-1 filter over PROBED records.")(
    _stage_command("filter", ("filter",), needs_input=False))
main.command("screen", help="Semantic stage-2 screening over S1_PASS records.")(
    _stage_command("screen", ("screen",), needs_input=False))
main.command("build", help="Build puzzles from S2_PASS records.")(
    _stage_command("build", ("build",), needs_input=False))


@main.command("gen-fixtures", help="Write the deterministic synthetic test corpus.")
@click.argument("output_dir", type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=0)
def gen_fixtures_cmd(output_dir, seed) -> None:
    labels = gen_fixtures(output_dir, seed=seed)
    n_pass = sum(1 for lab in labels if lab.expected_stage1_pass)
    click.echo(f"wrote {len(labels)} fixtures ({n_pass} designed-pass) to {output_dir}")


@main.command("stats", help="Per-source funnel counts from a manifest.")
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--report-dir", type=click.Path(file_okay=False), default=None,
              help="Also write stats.csv and stage_funnel.png here.")
def stats_cmd(manifest, report_dir) -> None:
    path = Path(manifest)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        records = read_manifest(path)
    except AvJigsawError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    table = aggregate_stats(records)
    click.echo(format_stats_table(table))
    if report_dir:
        from .report import write_stats_report
        for out in write_stats_report(table, report_dir):
            click.echo(f"wrote {out}")


def _truth_from_options(puzzle_dir, truth_text):
    if (puzzle_dir is None) == (truth_text is None):
        raise click.UsageError("provide exactly one of --puzzle or --truth")
    if puzzle_dir is not None:
        return load_puzzle_json(puzzle_dir)["ground_truth"]
    return parse_index_sequence(truth_text)


@main.command("score", help="Grade rollout responses with the composite reward.")
@click.option("--puzzle", "puzzle_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Puzzle package directory holding puzzle.json.")
@click.option("--truth", "truth_text", default=None,
              help='Inline ground-truth answer, e.g. "3, 1, 2".')
@click.option("--response", default=None, help="Rollout text to grade.")
@click.option("--response-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--batch", "batch_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSONL of {response, truth|puzzle_dir, ...} requests.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write batch results JSONL here instead of stdout.")
@click.option("--tag-style", type=click.Choice(["thinking", "think"]), default="thinking")
@click.option("--continuity", type=click.Choice(["aligned", "adjacency"]), default="aligned")
@click.option("--report-dir", type=click.Path(file_okay=False), default=None,
              help="Write rewards.csv and reward_histogram.png for a batch.")
def score_cmd(puzzle_dir, truth_text, response, response_file, batch_path,
              out_path, tag_style, continuity, report_dir) -> None:
    try:
        if batch_path is not None:
            _score_batch(batch_path, out_path, tag_style, continuity, report_dir)
            return
        if (response is None) == (response_file is None):
            raise click.UsageError("provide exactly one of --response or --response-file")
        text = response if response is not None else Path(response_file).read_text(encoding="utf-8")
        truth = _truth_from_options(puzzle_dir, truth_text)
        breakdown = total_reward(text, truth, continuity=continuity, tag_style=tag_style)
        click.echo(json.dumps(breakdown.to_dict()))
    except AvJigsawError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_CONFIG)


def _score_batch(batch_path, out_path, tag_style, continuity, report_dir) -> None:
    results = []
    breakdowns = []
    ids = []
    with open(batch_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                req = json.loads(line)
                truth = (load_puzzle_json(req["puzzle_dir"])["ground_truth"]
                         if "puzzle_dir" in req else req["truth"])
                breakdown = total_reward(
                    req["response"], truth,
                    continuity=req.get("continuity", continuity),
                    tag_style=req.get("tag_style", tag_style))
                doc = breakdown.to_dict()
                doc["index"] = lineno - 1
                breakdowns.append(breakdown)
                ids.append(req.get("id", str(lineno - 1)))
            except (KeyError, ValueError, AvJigsawError) as e:
                doc = {"index": lineno - 1, "error": str(e)}
            results.append(doc)
    payload = "".join(json.dumps(doc) + "\n" for doc in results)
    if out_path:
        Path(out_path).write_text(payload, encoding="utf-8")
    else:
        click.echo(payload, nl=False)
    if report_dir:
        from .report import write_score_report
        for out in write_score_report(breakdowns, report_dir, ids):
            click.echo(f"wrote {out}", err=True)


if __name__ == "__main__":
    main()
