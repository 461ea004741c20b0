import pytest
from hypothesis import given, strategies as st

from cmrbench.core import (
    ClinicalReport,
    DiagnosisLabel,
    LabelSet,
    Prediction,
    ReportSections,
    RunConfig,
    normalize_label,
    validate_corpus,
)


@pytest.mark.parametrize(
    "surface, expected",
    [
        ("HCM", "HCM"),
        ("myocarditis", "MYO"),
        ("ischaemic cardiomyopathy!!", "ICM"),
        ("pericarditis", None),
        ("  hcm  ", "HCM"),
        ("Normal findings", "NORMAL"),
        ("Cardiac-Amyloidosis.", "CA"),
        ("", None),
    ],
)
def test_normalize_label_examples(surface, expected, labels):
    assert normalize_label(surface, labels) == expected


def test_code_match_beats_synonym():
    labels = LabelSet(
        (DiagnosisLabel("A", "Alpha"), DiagnosisLabel("B", "Beta")),
        {"a": "B"},
    )
    assert normalize_label("A", labels) == "A"


def test_default_set_has_cohort_categories_plus_other(labels):
    assert labels.codes == ("HCM", "CA", "CS", "MYO", "ICM", "DCM", "NORMAL", "OTHER")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"labels": (DiagnosisLabel("A", "a"),)},
        {"labels": (DiagnosisLabel("A", "a"), DiagnosisLabel("a", "b"))},
        {"labels": (DiagnosisLabel("A", "a"), DiagnosisLabel("B", "b")), "synonyms": {"x": "C"}},
        {"labels": (DiagnosisLabel("A", "a"), DiagnosisLabel("NONE", "b"))},
    ],
)
def test_label_set_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        LabelSet(**kwargs)


def test_label_set_json_round_trip(labels):
    assert LabelSet.from_dict(labels.to_dict()) == labels


@given(st.sampled_from(["HCM", "CA", "CS", "MYO", "ICM", "DCM", "NORMAL", "OTHER"]))
def test_normalize_idempotent_on_display_name(code):
    from cmrbench.core import default_label_set

    labels = default_label_set()
    out = normalize_label(code, labels)
    assert normalize_label(labels.get(out).display_name, labels) == out


@given(st.text(max_size=40))
def test_normalize_casefold_invariant(text):
    from cmrbench.core import default_label_set

    labels = default_label_set()
    assert normalize_label(text, labels) == normalize_label(text.casefold(), labels)


def _report(i, truth="HCM", text="x"):
    return ClinicalReport(id=i, raw_text=text, language="en", ground_truth=truth)


def test_validate_cohort_counts(labels):
    counts = {"HCM": 15, "CA": 14, "CS": 14, "MYO": 14, "ICM": 17, "DCM": 16, "NORMAL": 19}
    reports = [_report(f"{c}-{k}", c) for c, n in counts.items() for k in range(n)]
    check = validate_corpus(reports, labels)
    assert check.total == 109
    assert check.ok
    assert {c: check.counts[c] for c in counts} == counts
    assert check.counts["OTHER"] == 0


def test_validate_empty_corpus_passes_with_warning(labels):
    check = validate_corpus([], labels)
    assert check.total == 0 and check.ok
    assert check.warnings


def test_validate_duplicate_ids(labels):
    check = validate_corpus([_report("p1"), _report("p1")], labels)
    assert not check.ok
    assert check.duplicate_ids == ["p1"]


def test_validate_empty_text_and_unknown_label(labels):
    check = validate_corpus([_report("a", text="  "), _report("b", truth="XYZ")], labels)
    assert not check.ok
    assert check.empty_texts == ["a"]
    assert check.unknown_labels == [("b", "XYZ")]


@given(st.lists(st.tuples(st.sampled_from(["HCM", "CA", "xx", None]), st.booleans()), max_size=30))
def test_validate_total_is_counts_plus_unlabeled(rows):
    from cmrbench.core import default_label_set

    labels = default_label_set()
    reports = [_report(f"r{i}", truth) for i, (truth, _) in enumerate(rows)]
    check = validate_corpus(reports, labels)
    assert check.total == sum(check.counts.values()) + check.unlabeled


def test_prediction_failed_iff_none():
    Prediction("r", "m", None, "", "failed", 0.0)
    with pytest.raises(ValueError):
        Prediction("r", "m", "HCM", "", "failed", 0.0)
    with pytest.raises(ValueError):
        Prediction("r", "m", None, "", "ok", 0.0)
    with pytest.raises(ValueError):
        Prediction("r", "m", "HCM", "", "ok", -1.0)


def test_sections_require_narrative():
    with pytest.raises(ValueError):
        ReportSections("q", "  ", "m")


def test_run_config_invariants():
    with pytest.raises(ValueError):
        RunConfig("c", (), "o")
    with pytest.raises(ValueError):
        RunConfig("c", ("m",), "o", max_retries=-1)
    with pytest.raises(ValueError):
        RunConfig("c", ("m",), "o", request_timeout=0)
    cfg = RunConfig("c", ["m"], "o")
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
