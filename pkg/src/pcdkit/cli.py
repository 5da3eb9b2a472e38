"""Command-line entry points.

Subcommands: parse-tree, validate, stats, convert-sharc, eval, interview,
serve. Read commands accept `--format text|machine`; failures print a single
machine-readable JSON line on stderr and exit nonzero.
"""

from __future__ import annotations

import functools
import json
import sys
import time
from pathlib import Path

import click

from . import evaluation, interview, oracles, reporting, sharc
from .corpus import corpus_stats, load_corpus_dir
from .errors import PcdError
from .logic import TriValue, parse_tree, serialize_tree, tree_questions
from .service import ServiceConfig, create_app


def _machine_line(data: dict) -> str:
    return json.dumps(data, ensure_ascii=False)


def guarded(command):
    """Turn PcdError into a single-line machine-readable failure."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except PcdError as exc:
            click.echo(_machine_line(exc.as_dict()), err=True)
            sys.exit(1)

    return wrapper


format_option = click.option(
    "--format",
    "output_format",
    type=click.Choice(["text", "machine"]),
    default="text",
    show_default=True,
)


@click.group()
def cli():
    """Policy compliance workbench: expression trees over yes/no/NEI questions."""


@cli.command("parse-tree")
@click.argument("expression")
@format_option
@guarded
def parse_tree_command(expression: str, output_format: str):
    """Parse an expression and print its canonical form."""
    tree = parse_tree(expression)
    canonical = serialize_tree(tree)
    if output_format == "machine":
        click.echo(
            _machine_line(
                {
                    "expression": canonical,
                    "questions": list(tree_questions(tree)),
                    "question_count": len(tree_questions(tree)),
                }
            )
        )
    else:
        click.echo(canonical)


@cli.command("validate")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--strict", is_flag=True, help="Fail on the first violation.")
@format_option
@guarded
def validate_command(corpus_dir: str, strict: bool, output_format: str):
    """Check corpus invariants; exits nonzero when violations exist."""
    corpus = load_corpus_dir(corpus_dir, strict=strict)
    violations = corpus.violations
    if output_format == "machine":
        click.echo(_machine_line({"violations": [v.as_dict() for v in violations]}))
    else:
        click.echo(f"{len(violations)} violations")
        for violation in violations:
            click.echo(f"  [{violation.code}] {violation.message}")
    if violations:
        sys.exit(1)


@cli.command("stats")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@format_option
@guarded
def stats_command(corpus_dir: str, output_format: str):
    """Corpus statistics: counts, per-policy question average, histograms."""
    stats = corpus_stats(load_corpus_dir(corpus_dir))
    if output_format == "machine":
        click.echo(_machine_line(stats.as_dict()))
        return
    click.echo(f"policies:       {stats.policy_count}")
    click.echo(f"scenarios:      {stats.scenario_count}")
    click.echo(f"qa instances:   {stats.qa_count} ({stats.qa_count_non_nei} non-NEI)")
    click.echo(f"avg qa/policy:  {stats.avg_qa_per_policy:.2f}")
    click.echo(
        "labels:         "
        + ", ".join(f"{k}={v}" for k, v in stats.label_histogram.items())
    )
    click.echo(
        "answers:        "
        + ", ".join(f"{k}={v}" for k, v in stats.answer_histogram.items())
    )


@cli.command("convert-sharc")
@click.option("--in", "input_file", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--strict", is_flag=True, help="Fail when the conversion reports conflicts.")
@guarded
def convert_sharc_command(input_file: str, out_dir: str, strict: bool):
    """Convert conversational dialog records into corpus files."""
    result = sharc.convert_corpus(input_file, out_dir)
    click.echo(result.report.render_text())
    if strict and (
        result.report.answer_conflicts or result.report.unrecovered_continuations
    ):
        click.echo(
            _machine_line(
                {
                    "code": "conversion_conflicts",
                    "message": "conversion reported conflicts or unrecovered follow-ups",
                }
            ),
            err=True,
        )
        sys.exit(1)


@cli.command("eval")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option(
    "--oracle",
    type=click.Choice(["gold", "noisy", "remote"]),
    default="gold",
    show_default=True,
)
@click.option(
    "--mode",
    type=click.Choice(["all", "short-circuit"]),
    default="all",
    show_default=True,
)
@click.option(
    "--strategy",
    type=click.Choice(list(interview.STRATEGIES)),
    default="order",
    show_default=True,
)
@click.option("--confusion", "confusion_file", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--endpoint", type=str, default=None)
@click.option(
    "--on-failure",
    type=click.Choice(["abort", "substitute-nei"]),
    default="abort",
    show_default=True,
    help="Remote-oracle failure policy.",
)
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--baselines", "baselines_file", type=click.Path(exists=True))
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--no-figures", is_flag=True, help="Skip figure rendering.")
@format_option
@guarded
def eval_command(
    corpus_dir,
    oracle,
    mode,
    strategy,
    confusion_file,
    seed,
    endpoint,
    on_failure,
    report_path,
    baselines_file,
    workers,
    no_figures,
    output_format,
):
    """Run compliance prediction end to end and write the report files."""
    corpus = load_corpus_dir(corpus_dir)
    confusion = (
        oracles.ConfusionSpec.from_file(confusion_file) if confusion_file else None
    )
    try:
        provider = oracles.build_oracle(
            oracle,
            corpus=corpus,
            confusion=confusion,
            seed=seed,
            endpoint=endpoint,
            on_failure=on_failure.replace("-", "_"),
        )
    except ValueError as exc:
        raise PcdError(str(exc)) from None

    run_mode = "all-questions" if mode == "all" else mode
    started = time.time()
    records = evaluation.run_pcd(
        corpus, provider, mode=run_mode, strategy=strategy, max_workers=workers
    )
    metadata = {
        "oracle": provider.name,
        "mode": run_mode,
        "strategy": strategy,
        "seed": seed,
        "corpus_dir": str(corpus_dir),
        "scenario_count": len(records),
        "started_at": started,
        "finished_at": time.time(),
    }
    if baselines_file:
        metadata["baselines"] = json.loads(
            Path(baselines_file).read_text(encoding="utf-8")
        )
    report = evaluation.build_report(corpus, records, metadata=metadata)
    written = reporting.write_report(
        report, records, report_path, figures=not no_figures
    )
    if output_format == "machine":
        click.echo(
            _machine_line(
                {"report": report.as_dict(), "files": [str(p) for p in written]}
            )
        )
    else:
        click.echo(reporting.render_report_text(report))
        click.echo("written: " + ", ".join(str(p) for p in written))


@cli.command("interview")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--policy", "policy_id", required=True)
@click.option(
    "--strategy",
    type=click.Choice(list(interview.STRATEGIES)),
    default="order",
    show_default=True,
)
@click.option("--store", "store_path", type=click.Path(), default=None)
@guarded
def interview_command(corpus_dir, policy_id, strategy, store_path):
    """Interactive interview: answer questions until the verdict is fixed."""
    corpus = load_corpus_dir(corpus_dir)
    policy = corpus.policy(policy_id)
    session = interview.start_session(policy, strategy=strategy)
    store = interview.SessionStore(store_path) if store_path else None
    if store:
        store.record_created(session)

    click.echo(f"policy: {policy.text}")
    while session.status is interview.SessionStatus.IN_PROGRESS:
        question_id = interview.next_question(session)
        if isinstance(question_id, TriValue):
            break
        click.echo(f"{question_id}: {policy.question_text(question_id)}")
        while True:
            raw = click.prompt("answer [yes/no/nei]", type=str)
            try:
                value = TriValue.parse(raw)
                break
            except ValueError:
                click.echo("please answer yes, no, or nei")
        interview.record_answer(session, question_id, value)
        if store:
            store.record_answer(session, session.transcript[-1])
    if store and session.status is interview.SessionStatus.RESOLVED:
        store.record_resolution(session)
    click.echo(f"verdict: {session.resolution}")
    missing = sorted(interview.missing_information(session))
    if missing:
        click.echo("missing information: " + ", ".join(missing))


@cli.command("serve")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--session-store", "session_store", type=click.Path(), default=None)
@click.option("--static-dir", "static_dir", type=click.Path(exists=True), default=None)
@click.option("--oracle", default="gold", show_default=True)
@click.option("--confusion", "confusion_file", type=click.Path(exists=True))
@click.option("--endpoint", type=str, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@guarded
def serve_command(
    corpus_dir, host, port, session_store, static_dir, oracle, confusion_file,
    endpoint, seed,
):
    """Serve the HTTP API (and the UI bundle when --static-dir is given)."""
    import uvicorn

    config = ServiceConfig(
        corpus_dir=Path(corpus_dir),
        session_store=Path(session_store) if session_store else None,
        static_dir=Path(static_dir) if static_dir else None,
        default_oracle=oracle,
        confusion_file=Path(confusion_file) if confusion_file else None,
        endpoint=endpoint,
        seed=seed,
    )
    uvicorn.run(create_app(config), host=host, port=port)


def main():
    cli(prog_name="pcdkit")


if __name__ == "__main__":
    main()
