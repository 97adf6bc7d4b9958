from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vugrade import (
    CornerSite,
    MSASSSScore,
    Region,
    SchemaError,
    ValidationError,
    VURecord,
    corpus_stats,
    load_manifest,
    save_manifest,
)

HEADER = "vu_id,patient_id,study_id,region,image_ref,upper_label,lower_label"


def write_manifest(tmp_path, *rows, header=HEADER):
    path = tmp_path / "manifest.csv"
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


def test_load_row_with_both_labels(tmp_path):
    path = write_manifest(tmp_path, "v1,p1,s1,lumbar,a.png,0,0")
    (record,) = load_manifest(path)
    assert record.vu_id == "v1"
    assert record.patient_id == "p1"
    assert record.image_ref == "a.png"
    assert record.upper_label == MSASSSScore.NORMAL
    assert record.lower_label == MSASSSScore.NORMAL


def test_empty_label_cell_is_absent(tmp_path):
    path = write_manifest(tmp_path, "v1,p1,s1,cervical,a.png,,2")
    (record,) = load_manifest(path)
    assert record.upper_label is None
    assert record.lower_label == MSASSSScore.SYNDESMOPHYTE
    assert record.present_labels == (MSASSSScore.SYNDESMOPHYTE,)


def test_out_of_range_grade_cites_row(tmp_path):
    path = write_manifest(tmp_path, "v1,p1,s1,lumbar,a.png,0,0", "v2,p1,s1,lumbar,b.png,1,5")
    with pytest.raises(ValidationError, match="row 3"):
        load_manifest(path)


def test_missing_required_column_names_it(tmp_path):
    path = write_manifest(tmp_path, "v1,s1,lumbar,a.png,0,0",
                          header="vu_id,study_id,region,image_ref,upper_label,lower_label")
    with pytest.raises(SchemaError, match="patient_id"):
        load_manifest(path)


def test_duplicate_vu_id_rejected(tmp_path):
    path = write_manifest(tmp_path, "v1,p1,s1,lumbar,a.png,0,0", "v1,p2,s1,lumbar,b.png,1,1")
    with pytest.raises(ValidationError, match="duplicate"):
        load_manifest(path)


def test_bad_region_rejected(tmp_path):
    path = write_manifest(tmp_path, "v1,p1,s1,thoracic,a.png,0,0")
    with pytest.raises(ValidationError, match="region"):
        load_manifest(path)


def test_minimal_columns_suffice(tmp_path):
    path = write_manifest(tmp_path, "v1,p1,a.png", header="vu_id,patient_id,image_ref")
    (record,) = load_manifest(path)
    assert record.region is Region.LUMBAR
    assert record.upper_label is None and record.lower_label is None


def test_invalid_grade_not_constructible():
    with pytest.raises(ValueError):
        MSASSSScore(5)
    assert [int(s) for s in MSASSSScore] == [0, 1, 2, 3]


def test_empty_patient_id_rejected():
    with pytest.raises(ValidationError):
        VURecord(vu_id="v1", patient_id="", image_ref="a.png")


ids = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789_-", min_size=1, max_size=12)
labels = st.one_of(st.none(), st.sampled_from(list(MSASSSScore)))


@st.composite
def record_lists(draw, max_size=25):
    n = draw(st.integers(min_value=0, max_value=max_size))
    records = []
    for i in range(n):
        records.append(
            VURecord(
                vu_id=f"vu{i}",
                patient_id=draw(ids),
                image_ref=f"images/vu{i}.png",
                study_id=draw(ids),
                region=draw(st.sampled_from(list(Region))),
                upper_label=draw(labels),
                lower_label=draw(labels),
            )
        )
    return records


@given(record_lists())
@settings(max_examples=50)
def test_manifest_round_trip(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("rt") / "manifest.csv"
    save_manifest(records, path)
    assert load_manifest(path) == records


def test_stats_empty_corpus():
    stats = corpus_stats([])
    assert stats.n_records == 0
    assert stats.n_patients == 0
    assert stats.class_counts == {0: 0, 1: 0, 2: 0, 3: 0}
    assert stats.n_absent_corners == 0


def test_stats_direct_count():
    records = [
        VURecord("v1", "p1", "a.png", upper_label=MSASSSScore(0), lower_label=MSASSSScore(0)),
        VURecord("v2", "p2", "b.png", upper_label=MSASSSScore(3), lower_label=None),
    ]
    stats = corpus_stats(records)
    assert stats.class_counts == {0: 2, 1: 0, 2: 0, 3: 1}
    assert stats.n_absent_corners == 1
    assert stats.n_patients == 2


@given(record_lists())
@settings(max_examples=50)
def test_stats_match_brute_force_recount(records):
    stats = corpus_stats(records)
    # independent recount with explicit loops
    expected = Counter()
    absent = 0
    for r in records:
        for label in (r.upper_label, r.lower_label):
            if label is None:
                absent += 1
            else:
                expected[int(label)] += 1
    assert stats.class_counts == {c: expected.get(c, 0) for c in range(4)}
    assert stats.n_absent_corners == absent
    assert stats.n_labeled_corners == sum(stats.class_counts.values())
    assert stats.n_patients == len({r.patient_id for r in records})
    for site in CornerSite:
        assert sum(stats.per_corner[site].values()) + stats.absent[site] == len(records)
