"""Evaluation reports: delimited record/metric files plus rendered figures.

Everything lands in one output directory: ``records.csv`` (one row per
scored case), ``metrics.json`` (overall and per-group numbers), and PNG
bar charts of the per-group and per-rule breakdowns.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluator import Metrics, RunRecord, breakdown, executable_rate, score

_CSV_FIELDS = (
    "case_id", "kind", "group", "truth_label", "predicted_label",
    "truth_details", "predicted_details", "executable_before_debug",
    "debug_iterations_used", "executable_after_debug", "rendered",
)


def write_records_csv(records: Sequence[RunRecord], path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for r in records:
            writer.writerow({
                "case_id": r.case_id,
                "kind": r.kind.value,
                "group": r.group,
                "truth_label": r.truth_label.value,
                "predicted_label": r.predicted.value,
                "truth_details": json.dumps(r.truth_details.to_dict(), sort_keys=True),
                "predicted_details": json.dumps(r.predicted_details.to_dict(), sort_keys=True),
                "executable_before_debug": r.exec_stats.executable_before_debug,
                "debug_iterations_used": r.exec_stats.debug_iterations_used,
                "executable_after_debug": r.exec_stats.executable_after_debug,
                "rendered": r.rendered.replace("\n", " | "),
            })


def _bar_figure(groups: dict[str, Metrics], title: str, path: Path) -> None:
    names = list(groups)
    series = {
        "accuracy": [groups[g].lpa for g in names],
        "precision": [groups[g].lpp for g in names],
        "recall": [groups[g].lpr for g in names],
    }
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(names)), 4))
    width = 0.25
    for i, (label, values) in enumerate(series.items()):
        xs = [j + (i - 1) * width for j in range(len(names))]
        ax.bar(xs, values, width=width, label=label)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylim(0, 105)
    ax.set_ylabel("percent")
    ax.set_title(title)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(
    records: Sequence[RunRecord],
    out_dir: Union[str, Path],
    ea_allow_extras: bool = False,
) -> dict[str, Path]:
    """Write the full report bundle; returns the paths that were written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    paths["records"] = out / "records.csv"
    write_records_csv(records, paths["records"])

    overall = score(records, ea_allow_extras=ea_allow_extras)
    exec_before, exec_after = executable_rate(records)
    by_group = breakdown(records, by="group")
    try:
        by_rule = breakdown(records, by="rule")
    except Exception:
        by_rule = {}

    paths["metrics"] = out / "metrics.json"
    paths["metrics"].write_text(json.dumps({
        "overall": overall.to_dict(),
        "executable_rate_before_debug": exec_before,
        "executable_rate_after_debug": exec_after,
        "by_group": {g: m.to_dict() for g, m in by_group.items()},
        "by_rule": {g: m.to_dict() for g, m in by_rule.items()},
    }, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    if len(by_group) > 1 or (len(by_group) == 1 and "all" not in by_group):
        paths["group_figure"] = out / "breakdown_groups.png"
        _bar_figure(by_group, "metrics by group", paths["group_figure"])
    if by_rule:
        paths["rule_figure"] = out / "breakdown_rules.png"
        _bar_figure(by_rule, "metrics by violated rule", paths["rule_figure"])
    return paths
