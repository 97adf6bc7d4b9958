"""Patient-level grouped k-fold assignment and split materialization.

All VUs of a patient always land in the same fold. Patients are sorted
before the seeded shuffle so the assignment is independent of manifest
row order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError
from .records import VURecord


@dataclass(frozen=True)
class FoldAssignment:
    """Maps every patient to exactly one of k folds."""

    k: int
    seed: int
    mapping: dict[str, int]

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValidationError(f"fold count must be >= 2, got {self.k}")
        counts = [0] * self.k
        for patient, fold in self.mapping.items():
            if not 0 <= fold < self.k:
                raise ValidationError(f"patient {patient!r} assigned to fold {fold} (k={self.k})")
            counts[fold] += 1
        if counts and max(counts) - min(counts) > 1:
            raise ValidationError(f"fold patient-counts unbalanced: {counts}")

    def patients_in_fold(self, fold: int) -> list[str]:
        return sorted(p for p, f in self.mapping.items() if f == fold)


def _stratum_key(records_of_patient: list[VURecord]) -> int:
    """Bin patients by their worst (maximum) present corner grade; -1 if unlabeled."""
    labels = [int(v) for r in records_of_patient for v in r.present_labels]
    return max(labels) if labels else -1


def assign_folds(
    records: Sequence[VURecord], k: int, seed: int, stratify: bool = False
) -> FoldAssignment:
    """Assign each patient to one of k folds, deterministically for a given seed.

    With ``stratify`` patients are grouped by their maximum corner grade
    before the round-robin pass, so minority-grade patients spread evenly
    across folds. Raises :class:`ConfigurationError` when there are fewer
    distinct patients than folds.
    """
    if k < 2:
        raise ConfigurationError(f"fold count must be >= 2, got {k}")
    by_patient: dict[str, list[VURecord]] = {}
    for r in records:
        by_patient.setdefault(r.patient_id, []).append(r)
    patients = sorted(by_patient)
    if len(patients) < k:
        raise ConfigurationError(
            f"need at least k={k} distinct patients, got {len(patients)}"
        )

    rng = np.random.default_rng(seed)
    order = [patients[i] for i in rng.permutation(len(patients))]
    if stratify:
        strata: dict[int, list[str]] = {}
        for p in order:
            strata.setdefault(_stratum_key(by_patient[p]), []).append(p)
        order = [p for key in sorted(strata) for p in strata[key]]

    mapping = {p: i % k for i, p in enumerate(order)}
    return FoldAssignment(k=k, seed=seed, mapping=mapping)


def materialize_split(
    records: Sequence[VURecord], assignment: FoldAssignment, test_fold: int
) -> tuple[list[VURecord], list[VURecord]]:
    """Split records into (train, test) with test = patients of ``test_fold``."""
    if not 0 <= test_fold < assignment.k:
        raise ConfigurationError(
            f"test_fold must be in [0, {assignment.k}), got {test_fold}"
        )
    train: list[VURecord] = []
    test: list[VURecord] = []
    for r in records:
        fold = assignment.mapping.get(r.patient_id)
        if fold is None:
            raise ConfigurationError(
                f"patient {r.patient_id!r} is not covered by the fold assignment"
            )
        (test if fold == test_fold else train).append(r)
    return train, test


def save_assignment(assignment: FoldAssignment, path: str | Path) -> None:
    """Persist as CSV with a leading comment line recording k and seed."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# k={assignment.k} seed={assignment.seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["patient_id", "fold"])
        for patient in sorted(assignment.mapping):
            writer.writerow([patient, assignment.mapping[patient]])


def load_assignment(path: str | Path) -> FoldAssignment:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValidationError(f"{path}: missing '# k=... seed=...' audit line")
        meta = dict(part.split("=", 1) for part in header.lstrip("# ").split())
        try:
            k, seed = int(meta["k"]), int(meta["seed"])
        except (KeyError, ValueError):
            raise ValidationError(f"{path}: malformed audit line {header!r}") from None
        reader = csv.DictReader(fh)
        mapping = {row["patient_id"]: int(row["fold"]) for row in reader}
    return FoldAssignment(k=k, seed=seed, mapping=mapping)
