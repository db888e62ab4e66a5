"""Operator-facing CLI.

Exit codes: 0 success, 1 partial failure (some clips flagged), 2 on
config/protocol errors. Log level comes from $CORPUS_FORGE_LOG.
"""

from __future__ import annotations

import functools
import logging
import os
import sys

import click

from . import pipeline
from .config import PipelineConfig, load_config
from .errors import AdapterError, ConfigError, CorpusForgeError


def _setup_logging():
    level = os.environ.get("CORPUS_FORGE_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def common_options(fn):
    @click.option("--config", "config_path", type=click.Path(), default=None,
                  help="YAML config file.")
    @click.option("--input", "input_dir", type=click.Path(), default=None,
                  help="Input directory of tracks (flag wins over config).")
    @click.option("--output", "output_dir", type=click.Path(), default=None,
                  help="Output directory (flag wins over config).")
    @click.option("--seed", type=int, default=None, help="Global seed.")
    @click.option("--workers", type=int, default=None, help="Worker pool width.")
    @click.option("--adapter-cmd", "adapter_cmds", multiple=True,
                  metavar="TASK=CMDLINE", help="Adapter command per task.")
    @click.option("--no-adapter-fallback", is_flag=True, default=False,
                  help="Fail captions instead of falling back to the template.")
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)
    return wrapper


def build_config(config_path, input_dir, output_dir, seed, workers,
                 adapter_cmds, no_adapter_fallback) -> PipelineConfig:
    cfg = load_config(config_path)
    if input_dir is not None:
        cfg.input_dir = input_dir
    if output_dir is not None:
        cfg.output_dir = output_dir
    if seed is not None:
        cfg.global_seed = seed
    if workers is not None:
        cfg.workers = workers
    for item in adapter_cmds:
        task, sep, command = item.partition("=")
        if not sep or not command:
            raise ConfigError(f"--adapter-cmd needs TASK=CMDLINE, got {item!r}")
        cfg.adapters[task] = command
    if no_adapter_fallback:
        cfg.captioner.fallback = False
    return cfg


def _run(stage_fn, **cfg_kwargs):
    _setup_logging()
    try:
        cfg = build_config(**cfg_kwargs)
        code = stage_fn(cfg)
    except (ConfigError, AdapterError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except CorpusForgeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(code)


@click.group()
def main():
    """Corpus curation and evaluation pipeline."""


@main.command()
@common_options
def ingest(**kwargs):
    """Decode input tracks to the canonical format."""
    _run(pipeline.run_ingest, **kwargs)


@main.command()
@common_options
def segment(**kwargs):
    """Split tracks into 10-30 s clips at energy-novelty boundaries."""
    _run(pipeline.run_segment, **kwargs)


@main.command()
@common_options
def separate(**kwargs):
    """Separate clips into vocal/instrumental stems via the adapter."""
    _run(pipeline.run_separate, **kwargs)


@main.command()
@common_options
def tag(**kwargs):
    """Compute features and categorical tags for every clip."""
    _run(pipeline.run_tag, **kwargs)


@main.command()
@common_options
def caption(**kwargs):
    """Generate captions (adapter or deterministic template)."""
    _run(pipeline.run_caption, **kwargs)


@main.command()
@common_options
def stats(**kwargs):
    """Emit corpus statistics (JSON, text table, figures)."""
    _run(pipeline.run_stats, **kwargs)


@main.command("export-stages")
@common_options
def export_stages(**kwargs):
    """Export the three training-stage manifests."""
    _run(pipeline.run_export_stages, **kwargs)


@main.command("eval")
@click.option("--generated", type=click.Path(), default=None,
              help="Generated-corpus manifest.")
@click.option("--reference", type=click.Path(), default=None,
              help="Reference-corpus manifest.")
@click.option("--pairs", type=click.Path(), default=None,
              help="EvalPair jsonl for the conditioning sweep.")
@common_options
def eval_cmd(generated, reference, pairs, **kwargs):
    """Compute KLD and chroma-similarity metrics."""
    if pairs is None and (generated is None or reference is None):
        click.echo("error: need --pairs or both --generated and --reference",
                   err=True)
        sys.exit(2)
    _run(lambda cfg: pipeline.run_eval(cfg, generated, reference,
                                       pairs_path=pairs), **kwargs)


@main.command("adapters-check")
@common_options
def adapters_check(**kwargs):
    """Spawn each configured adapter and print its handshake."""
    _run(pipeline.run_adapters_check, **kwargs)


if __name__ == "__main__":
    main()
