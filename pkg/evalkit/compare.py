"""
DepthDerain - Run Comparison
Side-by-side Ave/Max/Min table for several evaluations of the same dataset.
"""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set

from .errors import MismatchedRunsError
from .evaluate import SUMMARY_KEYS, EvalRun


@dataclass
class ComparisonRow:
    label: str
    values: Dict[str, float]
    deltas: Dict[str, float] = field(default_factory=dict)
    best: Set[str] = field(default_factory=set)


@dataclass
class ComparisonTable:
    """One row per run; `best` marks the highest value of each column (ties all marked)."""

    rows: List[ComparisonRow]
    columns: List[str] = field(default_factory=lambda: list(SUMMARY_KEYS))

    def labels(self) -> List[str]:
        return [row.label for row in self.rows]

    def row(self, label: str) -> ComparisonRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def to_csv(self, path: Optional[Path] = None) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(
            ["run"] + self.columns + [f"{c}_delta" for c in self.columns] + [f"{c}_best" for c in self.columns]
        )
        for row in self.rows:
            writer.writerow(
                [row.label]
                + [repr(row.values[c]) for c in self.columns]
                + [repr(row.deltas[c]) for c in self.columns]
                + ["1" if c in row.best else "0" for c in self.columns]
            )
        text = buffer.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_text(self) -> str:
        """Aligned plain text, 5 decimals, `*` after each best value, deltas against the first row."""
        label_width = max(len("run"), *(len(r.label) for r in self.rows)) + 2
        header = f"{'run':<{label_width}}" + "".join(f"{c:>14}" for c in self.columns)
        lines = [header, "-" * len(header)]
        for row in self.rows:
            cells = "".join(
                f"{row.values[c]:>13.5f}{'*' if c in row.best else ' '}" for c in self.columns
            )
            lines.append(f"{row.label:<{label_width}}{cells}")
        base = self.rows[0].label
        lines += ["", f"delta vs {base}"]
        for row in self.rows[1:]:
            cells = "".join(f"{row.deltas[c]:>+14.5f}" for c in self.columns)
            lines.append(f"{row.label:<{label_width}}{cells}")
        return "\n".join(lines) + "\n"


def compare_runs(runs: Sequence[EvalRun], labels: Optional[Sequence[str]] = None) -> ComparisonTable:
    """
    Tabulate aggregates of runs evaluated on the same images.

    Labels default to the run names and must be unique.
    """
    if labels is not None and len(labels) == 0:
        raise MismatchedRunsError("label list is empty")
    if len(runs) < 2:
        raise MismatchedRunsError(f"comparison needs at least 2 runs, got {len(runs)}")
    labels = list(labels) if labels is not None else [run.name for run in runs]
    if len(labels) != len(runs):
        raise MismatchedRunsError(f"{len(runs)} runs but {len(labels)} labels")
    if len(set(labels)) != len(labels):
        raise MismatchedRunsError(f"labels must be unique: {labels}")

    reference = runs[0]
    for run in runs[1:]:
        if run.ids != reference.ids:
            raise MismatchedRunsError(f"runs {reference.name} and {run.name} cover different images")
        if (run.dataset_root and reference.dataset_root
                and Path(run.dataset_root).resolve() != Path(reference.dataset_root).resolve()):
            raise MismatchedRunsError(
                f"runs were evaluated on different datasets: {reference.dataset_root} vs {run.dataset_root}"
            )

    rows = [ComparisonRow(label=label, values=run.summary()) for label, run in zip(labels, runs)]
    base = rows[0].values
    for column in SUMMARY_KEYS:
        best = max(row.values[column] for row in rows)
        for row in rows:
            row.deltas[column] = row.values[column] - base[column]
            if row.values[column] == best:
                row.best.add(column)
    return ComparisonTable(rows=rows)
