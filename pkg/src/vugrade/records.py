"""Vertebral-unit records, manifest CSV I/O, and corpus statistics.

A manifest is a CSV with header columns
``vu_id, patient_id, study_id, region, image_ref, upper_label, lower_label``.
Only ``vu_id``, ``patient_id`` and ``image_ref`` are mandatory; label cells
may be empty (missing ground truth). Rows map 1:1 to :class:`VURecord`.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import SchemaError, ValidationError


class MSASSSScore(IntEnum):
    """Ordinal mSASSS grade of a single vertebral corner."""

    NORMAL = 0
    MINOR_LESION = 1
    SYNDESMOPHYTE = 2
    BRIDGE = 3


class CornerSite(str, Enum):
    """The two anterior corners scored per vertebral unit."""

    UPPER = "upper"
    LOWER = "lower"


class Region(str, Enum):
    CERVICAL = "cervical"
    LUMBAR = "lumbar"


MANIFEST_COLUMNS = (
    "vu_id",
    "patient_id",
    "study_id",
    "region",
    "image_ref",
    "upper_label",
    "lower_label",
)
REQUIRED_COLUMNS = ("vu_id", "patient_id", "image_ref")


@dataclass(frozen=True)
class VURecord:
    """One vertebral unit: identity, image reference, optional corner labels."""

    vu_id: str
    patient_id: str
    image_ref: str
    study_id: str = ""
    region: Region = Region.LUMBAR
    upper_label: MSASSSScore | None = None
    lower_label: MSASSSScore | None = None

    def __post_init__(self) -> None:
        if not self.vu_id:
            raise ValidationError("vu_id must be non-empty")
        if not self.patient_id:
            raise ValidationError(f"record {self.vu_id!r}: patient_id must be non-empty")

    def corner_label(self, site: CornerSite) -> MSASSSScore | None:
        return self.upper_label if site is CornerSite.UPPER else self.lower_label

    @property
    def present_labels(self) -> tuple[MSASSSScore, ...]:
        """Corner labels that are not missing, upper first."""
        return tuple(v for v in (self.upper_label, self.lower_label) if v is not None)


def _parse_label(cell: str | None, row_num: int, column: str) -> MSASSSScore | None:
    if cell is None or cell.strip() == "":
        return None
    try:
        return MSASSSScore(int(cell))
    except (ValueError, TypeError):
        raise ValidationError(
            f"row {row_num}: {column}={cell!r} is not a valid mSASSS grade (expected 0-3 or empty)"
        ) from None


def load_manifest(path: str | Path) -> list[VURecord]:
    """Read a manifest CSV into records, preserving row order.

    Raises :class:`SchemaError` if a required column is missing and
    :class:`ValidationError` for bad label values or duplicate vu_ids,
    citing the offending row.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_strip_comments(fh))
        fields = reader.fieldnames
        if fields is None:
            raise SchemaError(f"{path}: manifest has no header row")
        for col in REQUIRED_COLUMNS:
            if col not in fields:
                raise SchemaError(f"{path}: manifest is missing required column {col!r}")
        records: list[VURecord] = []
        seen: set[str] = set()
        for row_num, row in enumerate(reader, start=2):
            vu_id = (row.get("vu_id") or "").strip()
            if not vu_id:
                raise ValidationError(f"row {row_num}: vu_id must be non-empty")
            if vu_id in seen:
                raise ValidationError(f"row {row_num}: duplicate vu_id {vu_id!r}")
            seen.add(vu_id)
            patient_id = (row.get("patient_id") or "").strip()
            if not patient_id:
                raise ValidationError(f"row {row_num}: patient_id must be non-empty")
            region_cell = (row.get("region") or "").strip()
            if region_cell:
                try:
                    region = Region(region_cell)
                except ValueError:
                    raise ValidationError(
                        f"row {row_num}: region={region_cell!r} is not one of "
                        f"{[r.value for r in Region]}"
                    ) from None
            else:
                region = Region.LUMBAR
            records.append(
                VURecord(
                    vu_id=vu_id,
                    patient_id=patient_id,
                    image_ref=(row.get("image_ref") or "").strip(),
                    study_id=(row.get("study_id") or "").strip(),
                    region=region,
                    upper_label=_parse_label(row.get("upper_label"), row_num, "upper_label"),
                    lower_label=_parse_label(row.get("lower_label"), row_num, "lower_label"),
                )
            )
    return records


def _strip_comments(lines: Iterable[str]) -> Iterable[str]:
    return (line for line in lines if not line.startswith("#"))


def save_manifest(records: Sequence[VURecord], path: str | Path) -> None:
    """Write records to a manifest CSV; absent labels become empty cells."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.vu_id,
                    r.patient_id,
                    r.study_id,
                    r.region.value,
                    r.image_ref,
                    "" if r.upper_label is None else int(r.upper_label),
                    "" if r.lower_label is None else int(r.lower_label),
                ]
            )


@dataclass(frozen=True)
class CorpusStats:
    """Label histograms per corner plus corpus-level counts."""

    n_records: int
    n_patients: int
    per_corner: dict[CornerSite, dict[int, int]]
    absent: dict[CornerSite, int]

    @property
    def class_counts(self) -> dict[int, int]:
        """Histogram over grades, both corners pooled."""
        merged = Counter()
        for hist in self.per_corner.values():
            merged.update(hist)
        return {c: merged.get(c, 0) for c in range(4)}

    @property
    def n_labeled_corners(self) -> int:
        return sum(sum(h.values()) for h in self.per_corner.values())

    @property
    def n_absent_corners(self) -> int:
        return sum(self.absent.values())


def corpus_stats(records: Sequence[VURecord]) -> CorpusStats:
    """Count labels per grade and per corner; absent labels counted separately."""
    per_corner = {site: {c: 0 for c in range(4)} for site in CornerSite}
    absent = {site: 0 for site in CornerSite}
    for r in records:
        for site in CornerSite:
            label = r.corner_label(site)
            if label is None:
                absent[site] += 1
            else:
                per_corner[site][int(label)] += 1
    return CorpusStats(
        n_records=len(records),
        n_patients=len({r.patient_id for r in records}),
        per_corner=per_corner,
        absent=absent,
    )
