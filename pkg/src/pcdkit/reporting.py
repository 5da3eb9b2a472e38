"""Render evaluation results to files: JSON document, text summary, delimited
scatter data, and figures.

`write_report` writes, next to the main JSON report, a tab-separated
per-policy scatter file (question_count, accuracy, scenario_count) suitable
for replotting, and PNG figures for accuracy vs. policy size and the
gold/predicted label distributions.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .evaluation import EvalReport, PredictionRecord
from .logic import TriValue

_LABELS = [str(v) for v in TriValue]


def render_report_text(report: EvalReport) -> str:
    def fmt(value) -> str:
        return "n/a" if value is None else f"{value:.4f}"

    lines = [
        f"macro-accuracy over scenarios: {fmt(report.macro_accuracy_over_scenarios)}",
        f"macro-accuracy over policies:  {fmt(report.macro_accuracy_over_policies)}",
        "per-label accuracy:            "
        + ", ".join(f"{k}={fmt(v)}" for k, v in report.per_label_accuracy.items()),
        f"qa macro-accuracy:             {fmt(report.qa_macro_accuracy)}",
    ]
    tau = report.kendall_tau
    if tau.degenerate:
        lines.append("kendall tau (questions vs accuracy): degenerate (constant inputs)")
    else:
        lines.append(
            f"kendall tau (questions vs accuracy): {tau.tau:.4f} (p={tau.p_value:.4g})"
        )
    lines.append(f"policies evaluated: {len(report.per_policy)}")
    if report.excluded_policies:
        lines.append(
            f"policies without labeled records: {len(report.excluded_policies)}"
        )
    for key in ("oracle", "mode", "strategy", "seed"):
        if key in report.metadata:
            lines.append(f"{key}: {report.metadata[key]}")
    return "\n".join(lines)


def write_scatter(report: EvalReport, path: Path) -> None:
    rows = ["question_count\taccuracy\tscenario_count"]
    for row in report.per_policy:
        rows.append(
            f"{row.question_count if row.question_count is not None else ''}"
            f"\t{row.macro_accuracy:.6f}\t{row.scenario_count}"
        )
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def _label_counts(values) -> list[int]:
    counts = {label: 0 for label in _LABELS}
    for value in values:
        counts[str(value)] += 1
    return [counts[label] for label in _LABELS]


def write_figures(
    report: EvalReport, records: Sequence[PredictionRecord], base: Path
) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []

    rows = [r for r in report.per_policy if r.question_count is not None]
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        sizes = [20 + 12 * r.scenario_count for r in rows]
        ax.scatter(
            [r.question_count for r in rows],
            [r.macro_accuracy for r in rows],
            s=sizes,
            alpha=0.5,
            edgecolors="none",
        )
    ax.set_xlabel("questions per policy")
    ax.set_ylabel("macro-accuracy")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Per-policy accuracy vs. policy size")
    fig.tight_layout()
    scatter_png = base.with_name(base.name + "_accuracy_vs_questions.png")
    fig.savefig(scatter_png, dpi=120)
    plt.close(fig)
    written.append(scatter_png)

    labeled = [r for r in records if r.gold_label is not None]
    fig, ax = plt.subplots(figsize=(6, 4))
    positions = range(len(_LABELS))
    width = 0.4
    gold_counts = _label_counts(r.gold_label for r in labeled)
    pred_counts = _label_counts(r.predicted_label for r in records)
    ax.bar([p - width / 2 for p in positions], gold_counts, width, label="gold")
    ax.bar([p + width / 2 for p in positions], pred_counts, width, label="predicted")
    ax.set_xticks(list(positions))
    ax.set_xticklabels(_LABELS)
    ax.set_ylabel("scenarios")
    ax.set_title("Label distribution")
    ax.legend()
    fig.tight_layout()
    labels_png = base.with_name(base.name + "_label_distribution.png")
    fig.savefig(labels_png, dpi=120)
    plt.close(fig)
    written.append(labels_png)
    return written


def write_report(
    report: EvalReport,
    records: Sequence[PredictionRecord],
    path,
    figures: bool = True,
) -> list[Path]:
    """Write the report document plus its side files; returns written paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.with_suffix("") if path.suffix else path

    document = {
        "report": report.as_dict(),
        "records": [record.as_dict() for record in records],
    }
    path.write_text(
        json.dumps(document, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    written = [path]

    scatter_path = base.with_name(base.name + "_scatter.tsv")
    write_scatter(report, scatter_path)
    written.append(scatter_path)

    text_path = base.with_name(base.name + "_summary.txt")
    text_path.write_text(render_report_text(report) + "\n", encoding="utf-8")
    written.append(text_path)

    if figures:
        written.extend(write_figures(report, records, base))
    return written
