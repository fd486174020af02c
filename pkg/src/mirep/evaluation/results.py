"""Result rows, aggregation across subjects/folds, and CSV/JSON export."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass
class ResultRow:
    scenario: str
    backbone: str
    variant: str
    subject_id: int
    fold: int
    accuracy: float


@dataclass
class ResultTable:
    rows: list[ResultRow]

    def per_subject(self) -> dict[int, float]:
        """Mean accuracy per subject (across that subject's folds)."""
        bucket: dict[int, list[float]] = {}
        for r in self.rows:
            bucket.setdefault(r.subject_id, []).append(r.accuracy)
        return {s: float(np.mean(v)) for s, v in sorted(bucket.items())}

    def per_fold(self) -> dict[int, float]:
        bucket: dict[int, list[float]] = {}
        for r in self.rows:
            bucket.setdefault(r.fold, []).append(r.accuracy)
        return {f: float(np.mean(v)) for f, v in sorted(bucket.items())}

    def mean(self) -> float:
        subj = self.per_subject()
        return float(np.mean(list(subj.values())))

    def std(self) -> float:
        """Population standard deviation across subjects."""
        subj = self.per_subject()
        return float(np.std(list(subj.values())))


def aggregate(rows: list[ResultRow]) -> ResultTable:
    if not rows:
        raise ConfigurationError("no result rows to aggregate")
    return ResultTable(rows=list(rows))


def write_results_csv(path, table: ResultTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "backbone", "variant", "subject_id",
                         "fold", "accuracy"])
        for r in table.rows:
            writer.writerow([r.scenario, r.backbone, r.variant, r.subject_id,
                             r.fold, repr(r.accuracy)])


def read_results_csv(path) -> ResultTable:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ResultRow(
                scenario=rec["scenario"], backbone=rec["backbone"],
                variant=rec["variant"], subject_id=int(rec["subject_id"]),
                fold=int(rec["fold"]), accuracy=float(rec["accuracy"]),
            ))
    return aggregate(rows)


def write_results_json(path, table: ResultTable) -> None:
    doc = {
        "rows": [asdict(r) for r in table.rows],
        "summary": {
            "mean": table.mean(),
            "std": table.std(),
            "per_subject": {str(k): v for k, v in table.per_subject().items()},
            "per_fold": {str(k): v for k, v in table.per_fold().items()},
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
