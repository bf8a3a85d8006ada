"""Command-line interface.

Exit codes: 0 success, 1 pipeline error, 2 validation failure in strict
mode, 3 configuration or usage error. Logs go to standard error; data goes
to files and standard output.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from .backend import (
    BackendError,
    Cassette,
    SchemaFailureError,
    make_chat_backend,
    make_embedding_backend,
)
from .config import ConfigError, load_config
from .evaluation import (
    exact_match_score,
    fuzzy_match_score,
    render_report,
    report_to_json,
    to_eval_triples,
    write_report_json,
)
from .ingest import load_corpus
from .model import ValidationFailure, fatal_violations, validate_ontology
from .pipeline import build, entail_stage, extract_stage, read_artifact, write_artifact, write_build_outputs
from .turtle import TurtleSyntaxError, UnresolvedReferenceError, parse_turtle

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PIPELINE = 1
EXIT_VALIDATION = 2
EXIT_USAGE = 3

LLM_MODES = ("live", "record", "replay", "mock")


class UsageProblem(Exception):
    pass


def _die(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (UsageProblem, ConfigError, FileNotFoundError) as exc:
            _die(EXIT_USAGE, str(exc))
        except ValidationFailure as exc:
            _die(EXIT_VALIDATION, str(exc))
        except TurtleSyntaxError as exc:
            _die(EXIT_PIPELINE, f"parse error: {exc}")
        except (UnresolvedReferenceError, BackendError, SchemaFailureError) as exc:
            _die(EXIT_PIPELINE, str(exc))
        except ValueError as exc:
            _die(EXIT_PIPELINE, str(exc))

    return wrapper


def _shared_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="JSON config file (flat PipelineConfig keys)."),
        click.option("--llm-mode", type=click.Choice(LLM_MODES), default="mock",
                     show_default=True, help="Backend mode for chat and embeddings."),
        click.option("--cassette", "cassette_path", type=click.Path(), default=None,
                     help="Cassette file for record/replay modes."),
        click.option("--strict/--no-strict", "strict", default=None,
                     help="Fail on fatal violations and conflicts."),
        click.option("--base-iri", default=None, help="Base IRI for minted elements."),
        click.option("--threshold", type=float, default=None,
                     help="Fuzzy-match similarity threshold."),
        click.option("--include-annotations/--no-include-annotations",
                     "include_annotations", default=None,
                     help="Score label/comment triples too."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _load_cfg(config_path, **overrides):
    return load_config(config_path, **overrides)


def _open_cassette(mode: str, cassette_path: str | None) -> Cassette | None:
    if mode == "replay":
        if not cassette_path:
            raise UsageProblem("--llm-mode replay requires --cassette")
        if not Path(cassette_path).is_file():
            raise UsageProblem(f"cassette not found: {cassette_path}")
        return Cassette.for_replay(cassette_path)
    if mode == "record":
        if not cassette_path:
            raise UsageProblem("--llm-mode record requires --cassette")
        return Cassette.for_record(cassette_path)
    return None


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageProblem(f"{what} not found: {path}")
    return p


def _report_violations(violations, echo=click.echo) -> None:
    for v in violations:
        echo(f"{v.code.value} [{', '.join(v.iris)}]: {v.message}")


@click.group()
def cli() -> None:
    """Turn enterprise text into a validated OWL ontology and score it."""


@cli.command("build")
@click.argument("input_path", type=click.Path())
@click.option("-o", "--output", "output_path", required=True, type=click.Path(),
              help="Output Turtle file; sidecar logs take the same stem.")
@click.option("--repair-policy", type=click.Choice(["auto_add", "drop"]), default=None)
@_shared_options
@_handle_errors
def cmd_build(input_path, output_path, repair_policy, config_path, llm_mode,
              cassette_path, strict, base_iri, threshold, include_annotations) -> None:
    """Run the full pipeline: ingest, extract, entail, validate, serialize."""
    _require_file(input_path, "input path")
    cfg = _load_cfg(config_path, base_iri=base_iri, strict_validation=strict,
                    repair_policy=repair_policy, fuzzy_threshold=threshold,
                    include_annotations=include_annotations)
    cassette = _open_cassette(llm_mode, cassette_path)
    backend = make_chat_backend(cfg, llm_mode, cassette)
    documents = load_corpus(input_path)
    if not documents:
        raise UsageProblem(f"no readable documents under {input_path}")

    result = build(documents, cfg, backend, llm_mode=llm_mode)
    paths = write_build_outputs(result, Path(output_path))
    counts = result.manifest["counts"]
    logger.info(
        "wrote %s (%d classes, %d properties, %d edges)",
        paths["turtle"], counts["classes"], counts["properties"], counts["edges"],
    )
    _report_violations(result.violations, echo=lambda m: click.echo(m, err=True))
    if cfg.strict_validation and result.has_fatal_problems():
        _die(EXIT_VALIDATION,
             f"strict mode: {len(fatal_violations(result.violations))} fatal violations, "
             f"{len(result.conflicts)} conflicts (logs written next to {paths['turtle']})")
    sys.exit(EXIT_OK)


@cli.command("extract")
@click.argument("input_path", type=click.Path())
@click.option("-o", "--output", "output_path", required=True, type=click.Path(),
              help="Intermediate extraction artifact (JSON).")
@click.option("--repair-policy", type=click.Choice(["auto_add", "drop"]), default=None)
@_shared_options
@_handle_errors
def cmd_extract(input_path, output_path, repair_policy, config_path, llm_mode,
                cassette_path, strict, base_iri, threshold, include_annotations) -> None:
    """Run ingestion and extraction only, writing the stage artifact."""
    _require_file(input_path, "input path")
    cfg = _load_cfg(config_path, base_iri=base_iri, strict_validation=strict,
                    repair_policy=repair_policy, fuzzy_threshold=threshold,
                    include_annotations=include_annotations)
    cassette = _open_cassette(llm_mode, cassette_path)
    backend = make_chat_backend(cfg, llm_mode, cassette)
    documents = load_corpus(input_path)
    if not documents:
        raise UsageProblem(f"no readable documents under {input_path}")

    artifact = extract_stage(documents, cfg, backend)
    write_artifact(artifact, Path(output_path))
    logger.info("wrote %s (%d classes, %d properties, %d repairs)",
                output_path, len(artifact.classes), len(artifact.properties),
                len(artifact.repairs))
    sys.exit(EXIT_OK)


@cli.command("entail")
@click.argument("artifact_path", type=click.Path())
@click.option("-o", "--output", "output_path", required=True, type=click.Path(),
              help="Output Turtle file.")
@_shared_options
@_handle_errors
def cmd_entail(artifact_path, output_path, config_path, llm_mode, cassette_path,
               strict, base_iri, threshold, include_annotations) -> None:
    """Run entailment and serialization over an extraction artifact."""
    _require_file(artifact_path, "artifact")
    cfg = _load_cfg(config_path, base_iri=base_iri, strict_validation=strict,
                    fuzzy_threshold=threshold, include_annotations=include_annotations)
    cassette = _open_cassette(llm_mode, cassette_path)
    backend = make_chat_backend(cfg, llm_mode, cassette)
    try:
        artifact = read_artifact(Path(artifact_path))
    except json.JSONDecodeError as exc:
        raise ValueError(f"artifact is not valid JSON: {exc}") from exc

    result = entail_stage(artifact, cfg, backend, llm_mode=llm_mode)
    paths = write_build_outputs(result, Path(output_path))
    _report_violations(result.violations, echo=lambda m: click.echo(m, err=True))
    if cfg.strict_validation and result.has_fatal_problems():
        _die(EXIT_VALIDATION,
             f"strict mode: {len(fatal_violations(result.violations))} fatal violations, "
             f"{len(result.conflicts)} conflicts (logs written next to {paths['turtle']})")
    sys.exit(EXIT_OK)


@cli.command("evaluate")
@click.argument("pred_path", type=click.Path())
@click.argument("gold_path", type=click.Path())
@click.option("--mode", "match_mode", type=click.Choice(["exact", "fuzzy"]),
              default="exact", show_default=True)
@click.option("-o", "--output", "output_path", type=click.Path(), default=None,
              help="Write the JSON report here.")
@_shared_options
@_handle_errors
def cmd_evaluate(pred_path, gold_path, match_mode, output_path, config_path,
                 llm_mode, cassette_path, strict, base_iri, threshold,
                 include_annotations) -> None:
    """Score a predicted ontology against a gold ontology.

    Scores are data, not failures: the exit code is 0 even for 0.000 rows.
    """
    _require_file(pred_path, "predicted ontology")
    _require_file(gold_path, "gold ontology")
    cfg = _load_cfg(config_path, fuzzy_threshold=threshold,
                    include_annotations=include_annotations)

    pred_onto, _ = parse_turtle(Path(pred_path).read_text(encoding="utf-8"))
    gold_onto, _ = parse_turtle(Path(gold_path).read_text(encoding="utf-8"))
    pred = to_eval_triples(pred_onto, cfg.include_annotations)
    gold = to_eval_triples(gold_onto, cfg.include_annotations)

    if match_mode == "exact":
        report = exact_match_score(pred, gold)
    else:
        cassette = _open_cassette(llm_mode, cassette_path)
        embedder = make_embedding_backend(cfg, llm_mode, cassette)
        report = fuzzy_match_score(pred, gold, embedder, cfg.fuzzy_threshold)

    use_case = Path(pred_path).stem
    table, _ = render_report({use_case: report})
    click.echo(table, nl=False)
    if output_path:
        write_report_json(output_path, report_to_json(use_case, report))
        logger.info("wrote %s", output_path)
    sys.exit(EXIT_OK)


@cli.command("validate")
@click.argument("ttl_path", type=click.Path())
@_shared_options
@_handle_errors
def cmd_validate(ttl_path, config_path, llm_mode, cassette_path, strict,
                 base_iri, threshold, include_annotations) -> None:
    """Parse a Turtle file and print its structural violations."""
    _require_file(ttl_path, "ontology")
    cfg = _load_cfg(config_path, strict_validation=strict)
    ontology, _ = parse_turtle(Path(ttl_path).read_text(encoding="utf-8"))
    violations = validate_ontology(ontology)
    _report_violations(violations)
    if not violations:
        click.echo("no violations")
    if cfg.strict_validation and fatal_violations(violations):
        sys.exit(EXIT_VALIDATION)
    sys.exit(EXIT_OK)


def main(argv: list[str] | None = None) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(EXIT_USAGE)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
