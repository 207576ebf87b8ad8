"""Dice scoring, scribble density statistics and table-style aggregation."""
from __future__ import annotations

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .validation import check_same_grid
from .volume_io import LabelVolume


@dataclass
class CaseScores:
    """Per-class Dice for one case; ``nan`` marks a class absent from both volumes."""

    case_id: str
    dice: dict[int, float] = field(default_factory=dict)

    @property
    def defined(self) -> dict[int, float]:
        return {c: d for c, d in self.dice.items() if not math.isnan(d)}

    @property
    def mean(self) -> float:
        values = list(self.defined.values())
        return float(np.mean(values)) if values else float("nan")

    @property
    def undefined_classes(self) -> list[int]:
        return [c for c, d in self.dice.items() if math.isnan(d)]


def dice_score(pred: np.ndarray, ref: np.ndarray) -> float:
    """2|P n R| / (|P| + |R|) for boolean arrays; nan when both are empty."""
    total = int(np.count_nonzero(pred)) + int(np.count_nonzero(ref))
    if total == 0:
        return float("nan")
    return 2.0 * int(np.count_nonzero(pred & ref)) / total


def dice_per_class(pred: LabelVolume, ref: LabelVolume, classes=None, case_id: str = "",
                   include_background: bool = False) -> CaseScores:
    """Dice for each class; classes default to those present in either volume."""
    check_same_grid(pred, ref, "prediction and reference")
    p, r = np.asarray(pred.data), np.asarray(ref.data)
    if classes is None:
        present = set(np.unique(r).tolist()) | set(np.unique(p).tolist())
        present.discard(ref.ignore_label)
        present.discard(pred.ignore_label)
        classes = sorted(int(c) for c in present)
    if not include_background:
        classes = [c for c in classes if c != 0]
    return CaseScores(case_id, {int(c): dice_score(p == c, r == c) for c in classes})


@dataclass
class ScribbleStats:
    annotated: dict[int, int]
    class_voxels: dict[int, int]

    @property
    def fraction(self) -> dict[int, float]:
        return {c: (self.annotated[c] / n if n else 0.0) for c, n in self.class_voxels.items()}

    @property
    def total_annotated(self) -> int:
        return sum(self.annotated.values())


def scribble_stats(scribbles: LabelVolume, dense: LabelVolume) -> ScribbleStats:
    check_same_grid(scribbles, dense, "scribble and dense volumes")
    s, d = np.asarray(scribbles.data), np.asarray(dense.data)
    classes = sorted(int(c) for c in np.unique(d) if c != dense.ignore_label)
    annotated = {c: int(np.count_nonzero(s == c)) for c in classes}
    counts = {c: int(np.count_nonzero(d == c)) for c in classes}
    return ScribbleStats(annotated, counts)


def relative_difference(total_a: int, total_b: int) -> str:
    """How many more (or fewer) annotated voxels B has than A, e.g. ``+71%``."""
    if total_a == 0:
        raise ValueError("reference total is zero")
    return f"{(total_b - total_a) / total_a * 100:+.0f}%"


@dataclass
class Aggregate:
    dataset_means: "OrderedDict[str, float]"
    grand_mean: float


def aggregate(per_case, grouping) -> Aggregate:
    """Dataset mean = mean of case means; grand mean = unweighted mean of dataset means.

    Cases whose mean is undefined (no class scored) are skipped; a dataset
    left with no scorable case is an error.
    """
    per_case = list(per_case)
    grouping = list(grouping)
    if not per_case:
        raise ValueError("no cases to aggregate")
    if len(grouping) != len(per_case):
        raise ValueError("need one dataset label per case")
    buckets: "OrderedDict[str, list[float]]" = OrderedDict()
    for case, group in zip(per_case, grouping):
        value = case.mean if isinstance(case, CaseScores) else float(case)
        buckets.setdefault(group, [])
        if not math.isnan(value):
            buckets[group].append(value)
    means = OrderedDict()
    for group, values in buckets.items():
        if not values:
            raise ValueError(f"dataset {group!r} has no scorable cases")
        means[group] = float(np.mean(values))
    return Aggregate(means, float(np.mean(list(means.values()))))


def write_case_csv(path, rows) -> None:
    """rows: iterable of (dataset, CaseScores)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "case", "class", "dice"])
        for dataset, scores in rows:
            for c, d in sorted(scores.dice.items()):
                writer.writerow([dataset, scores.case_id, c, "" if math.isnan(d) else repr(float(d))])


def write_summary_csv(path, agg: Aggregate, method: str = "method", missing=None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "dataset", "mean_dice"])
        for dataset, value in agg.dataset_means.items():
            writer.writerow([method, dataset, repr(value)])
        writer.writerow([method, "Mean", repr(agg.grand_mean)])
        for case in missing or []:
            writer.writerow([method, "missing", case])


def markdown_table(rows: "OrderedDict[str, Aggregate]", digits: int = 3) -> str:
    """Method rows, dataset columns, Mean last; rounding happens only here."""
    datasets: list[str] = []
    for agg in rows.values():
        for name in agg.dataset_means:
            if name not in datasets:
                datasets.append(name)
    header = ["Method", *datasets, "Mean"]
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
    for method, agg in rows.items():
        cells = [f"{agg.dataset_means[d]:.{digits}f}" if d in agg.dataset_means else "-" for d in datasets]
        lines.append("| " + " | ".join([method, *cells, f"{agg.grand_mean:.{digits}f}"]) + " |")
    return "\n".join(lines) + "\n"
