from __future__ import annotations

import random
from fractions import Fraction

import pytest

from auditminer.analysis import (
    CategoryStats,
    ConfusionCounts,
    DEFAULT_SEVERITY_CVSS,
    SeverityMapping,
    UNCLASSIFIED,
    avg_cvss_by_category,
    krippendorff_alpha,
    macro_average,
    prf1,
    severity_to_cvss,
    treemap_export,
)
from auditminer.classifier import ClassificationPath, TERMINAL_FALLBACK, TERMINAL_UNRESOLVED
from auditminer.errors import DegenerateLabelsError
from auditminer.fetcher import DatasetRecord

from conftest import make_finding, make_report


def alpha_oracle(labels_a, labels_b):
    """Brute-force agreement by pairwise enumeration over every value pair.

    Exact Fraction arithmetic; deliberately a different route than the
    coincidence-matrix implementation it checks.
    """
    units = list(zip(labels_a, labels_b))
    n = 2 * len(units)
    observed = Fraction(0)
    for x, y in units:
        # ordered pairs inside the unit, each weighted 1 / (m_u - 1) = 1
        if x != y:
            observed += 2
    observed = Fraction(observed, n)
    values = [v for unit in units for v in unit]
    expected = Fraction(0)
    for i, vi in enumerate(values):
        for j, vj in enumerate(values):
            if i != j and vi != vj:
                expected += 1
    expected = Fraction(expected, n * (n - 1))
    if expected == 0:
        raise ZeroDivisionError("degenerate labels")
    return 1 - observed / expected


def _record(findings):
    return DatasetRecord(path="r.md", project_info=make_report().project_info,
                         findings=findings)


def _classified(fid, title, severity, *ids, terminal=TERMINAL_FALLBACK):
    finding = make_finding(fid, title, severity)
    finding.category = ClassificationPath(
        steps=[(i, [nid]) for i, nid in enumerate(ids)], terminal=terminal)
    return finding


# -- severity mapping ----------------------------------------------------------

def test_default_mapping_values():
    assert severity_to_cvss("info") == 0.0
    assert severity_to_cvss("low") == 2.0
    assert severity_to_cvss("medium") == 5.45
    assert severity_to_cvss("high") == 7.95
    assert severity_to_cvss("critical") == 9.5


def test_custom_mapping_overrides_default():
    mapping = SeverityMapping(scores={"info": 1.0, "low": 2.0, "medium": 3.0,
                                      "high": 4.0, "critical": 5.0})
    assert severity_to_cvss("info", mapping) == 1.0


def test_mapping_must_be_monotone():
    bad = dict(DEFAULT_SEVERITY_CVSS, low=8.0)
    with pytest.raises(ValueError):
        SeverityMapping(scores=bad)


def test_mapping_scores_bounded():
    bad = dict(DEFAULT_SEVERITY_CVSS, critical=11.0)
    with pytest.raises(ValueError):
        SeverityMapping(scores=bad)


# -- avg_cvss_by_category ---------------------------------------------------------

def test_avg_cvss_mixed_severities():
    record = _record([
        _classified(1, "A", "low", "CWE-691", "CWE-362"),
        _classified(2, "B", "high", "CWE-691", "CWE-362"),
    ])
    stats = avg_cvss_by_category([record])
    assert len(stats) == 1
    assert stats[0].cwe_id == "CWE-362"
    assert stats[0].frequency == 2
    assert stats[0].mean_cvss == pytest.approx((2.0 + 7.95) / 2)


def test_avg_cvss_single_finding_is_own_score():
    record = _record([_classified(1, "A", "critical", "CWE-284", "CWE-287")])
    stats = avg_cvss_by_category([record])
    assert stats[0].mean_cvss == pytest.approx(9.5)


def test_avg_cvss_empty_records():
    assert avg_cvss_by_category([]) == []


def test_avg_cvss_unresolved_goes_to_unclassified():
    record = _record([
        _classified(1, "A", "low", "CWE-691", terminal=TERMINAL_UNRESOLVED),
        make_finding(2, "B", "info"),
    ])
    stats = avg_cvss_by_category([record])
    assert [s.cwe_id for s in stats] == [UNCLASSIFIED]
    assert stats[0].frequency == 2


def test_avg_cvss_permutation_invariant():
    records = [
        _record([_classified(1, "A", "high", "CWE-691", "CWE-362")]),
        _record([_classified(1, "B", "low", "CWE-284", "CWE-287")]),
    ]
    assert avg_cvss_by_category(records) == avg_cvss_by_category(records[::-1])


# -- treemap ----------------------------------------------------------------------

def test_treemap_single_child_propagates(small_tree):
    stats = [CategoryStats(cwe_id="CWE-362", frequency=4, mean_cvss=7.95)]
    tree_json = treemap_export(stats, small_tree)
    pillar = tree_json["children"][0]
    assert pillar["id"] == "CWE-691"
    assert pillar["frequency"] == 4
    assert pillar["severity"] == pytest.approx(7.95)
    assert pillar["children"][0]["id"] == "CWE-362"


def test_treemap_weighted_parent_severity(small_tree):
    stats = [
        CategoryStats(cwe_id="CWE-364", frequency=3, mean_cvss=2.0),
        CategoryStats(cwe_id="CWE-366", frequency=1, mean_cvss=9.5),
    ]
    tree_json = treemap_export(stats, small_tree)
    race = tree_json["children"][0]["children"][0]
    assert race["id"] == "CWE-362"
    assert race["frequency"] == 4
    assert race["severity"] == pytest.approx((3 * 2.0 + 1 * 9.5) / 4)


def test_treemap_internal_node_with_own_stat_gets_self_child(small_tree):
    stats = [
        CategoryStats(cwe_id="CWE-362", frequency=2, mean_cvss=5.45),
        CategoryStats(cwe_id="CWE-367", frequency=1, mean_cvss=9.5),
    ]
    tree_json = treemap_export(stats, small_tree)
    race = tree_json["children"][0]["children"][0]
    assert race["frequency"] == 3
    child_ids = [c["id"] for c in race["children"]]
    assert child_ids == ["CWE-362", "CWE-367"]  # self-child first


def test_treemap_parent_frequency_equals_child_sum_everywhere(small_tree):
    stats = [
        CategoryStats(cwe_id="CWE-362", frequency=2, mean_cvss=5.0),
        CategoryStats(cwe_id="CWE-364", frequency=5, mean_cvss=2.0),
        CategoryStats(cwe_id="CWE-287", frequency=3, mean_cvss=8.0),
        CategoryStats(cwe_id=UNCLASSIFIED, frequency=2, mean_cvss=0.0),
    ]
    tree_json = treemap_export(stats, small_tree)

    def check(node):
        if node["children"]:
            assert node["frequency"] == sum(c["frequency"] for c in node["children"])
            for child in node["children"]:
                check(child)

    check(tree_json)


def test_treemap_unknown_id_grouped_unclassified(small_tree):
    stats = [CategoryStats(cwe_id="CWE-9999", frequency=2, mean_cvss=5.0)]
    tree_json = treemap_export(stats, small_tree)
    assert [c["id"] for c in tree_json["children"]] == [UNCLASSIFIED]
    assert tree_json["children"][0]["frequency"] == 2


def test_treemap_empty_stats(small_tree):
    assert treemap_export([], small_tree)["children"] == []


# -- krippendorff ----------------------------------------------------------------

def test_alpha_perfect_agreement_two_categories():
    assert krippendorff_alpha(["X", "Y", "X"], ["X", "Y", "X"]) == 1.0


def test_alpha_hand_computed_case():
    # Coincidence matrix by hand: o_XX=2, o_XY=o_YX=1, o_YY=4; n_X=3, n_Y=5.
    # D_o = 2/8, D_e = 30/56, alpha = 1 - (2/8)/(30/56) = 8/15.
    value = krippendorff_alpha(["X", "X", "Y", "Y"], ["X", "Y", "Y", "Y"])
    assert value == pytest.approx(8 / 15, abs=1e-12)
    assert value == pytest.approx(float(alpha_oracle(["X", "X", "Y", "Y"],
                                                     ["X", "Y", "Y", "Y"])), abs=1e-12)


def test_alpha_systematic_disagreement_negative():
    value = krippendorff_alpha(["X", "Y", "X", "Y"], ["Y", "X", "Y", "X"])
    assert value < 0
    assert value == pytest.approx(float(alpha_oracle(["X", "Y", "X", "Y"],
                                                     ["Y", "X", "Y", "X"])), abs=1e-12)


def test_alpha_symmetric_in_raters():
    a = ["X", "Y", "Z", "X", "Y"]
    b = ["X", "Y", "Y", "Z", "Y"]
    assert krippendorff_alpha(a, b) == pytest.approx(krippendorff_alpha(b, a))


def test_alpha_degenerate_labels():
    with pytest.raises(DegenerateLabelsError):
        krippendorff_alpha(["X", "X"], ["X", "X"])


def test_alpha_validates_input():
    with pytest.raises(ValueError):
        krippendorff_alpha(["X"], ["X", "Y"])
    with pytest.raises(ValueError):
        krippendorff_alpha(["X"], ["Y"])
    with pytest.raises(ValueError):
        krippendorff_alpha(["X", "Y"], ["X", "Y"], distance="interval")


def test_alpha_matches_oracle_on_random_sets():
    rng = random.Random(7)
    for _ in range(50):
        size = rng.randint(2, 30)
        alphabet = [f"C{i}" for i in range(rng.randint(2, 5))]
        a = [rng.choice(alphabet) for _ in range(size)]
        b = [rng.choice(alphabet) for _ in range(size)]
        if len(set(a) | set(b)) < 2:
            continue
        assert krippendorff_alpha(a, b) == pytest.approx(
            float(alpha_oracle(a, b)), abs=1e-9)


# -- prf1 and macro average -------------------------------------------------------

TOOL_BENCHMARK_ROWS = [
    # (tool, tp, fp, fn, precision%, recall%, f1%)
    ("Confuzzius", 13, 462, 2250, 2.74, 0.57, 0.95),
    ("Conkas", 2, 51, 677, 3.77, 0.29, 0.55),
    ("Honeybadger", 0, 7, 52, 0.00, 0.00, 0.00),
    ("Maian", 0, 10, 1124, 0.00, 0.00, 0.00),
    ("Manticore", 0, 0, 992, 0.00, 0.00, 0.00),
    ("Mythril", 0, 33, 4383, 0.00, 0.00, 0.00),
    ("Osiris", 1, 53, 2433, 1.85, 0.04, 0.08),
    ("Oyente", 3, 83, 769, 3.49, 0.39, 0.70),
    ("Securify", 1, 3, 1004, 25.00, 0.10, 0.19),
    ("Semgrep", 3920, 24638, 9685, 13.73, 28.81, 18.59),
    ("Slither", 4016, 40468, 14936, 9.03, 21.19, 12.66),
    ("Smartcheck", 3939, 34446, 10512, 10.26, 27.26, 14.91),
    ("Solhint", 3271, 19976, 11485, 14.07, 22.17, 17.21),
]

ENTITY_METRIC_ROWS = [
    # (precision%, recall%, f1%) per extracted entity type
    (92.6, 73.5, 82.0),   # on-chain address
    (100.0, 82.3, 90.3),  # chain
    (100.0, 76.7, 86.8),  # URL
    (100.0, 78.9, 88.2),  # commit id
    (91.7, 73.2, 81.4),   # vulnerability finding
    (88.3, 81.9, 85.0),   # severity
    (96.6, 82.5, 89.0),   # location
]


@pytest.mark.parametrize("tool,tp,fp,fn,p,r,f1", TOOL_BENCHMARK_ROWS)
def test_prf1_benchmark_rows(tool, tp, fp, fn, p, r, f1):
    precision, recall, score = prf1(ConfusionCounts(tp=tp, fp=fp, fn=fn))
    assert precision == pytest.approx(p, abs=0.01)
    assert recall == pytest.approx(r, abs=0.01)
    assert score == pytest.approx(f1, abs=0.01)


def test_prf1_zero_denominators_flagged(caplog):
    with caplog.at_level("WARNING"):
        assert prf1(ConfusionCounts(tp=0, fp=0, fn=0)) == (0.0, 0.0, 0.0)
    assert len(caplog.messages) >= 2


def test_prf1_symmetry_when_counts_equal():
    assert prf1(ConfusionCounts(tp=5, fp=5, fn=5)) == (50.0, 50.0, 50.0)


def test_prf1_scale_free():
    base = prf1(ConfusionCounts(tp=3, fp=7, fn=11))
    scaled = prf1(ConfusionCounts(tp=30, fp=70, fn=110))
    assert base == pytest.approx(scaled)


def test_confusion_counts_non_negative():
    with pytest.raises(ValueError):
        ConfusionCounts(tp=-1, fp=0, fn=0)


def test_macro_average_entity_table():
    precision, recall, f1 = macro_average(ENTITY_METRIC_ROWS)
    assert precision == pytest.approx(95.6, abs=0.05)
    assert recall == pytest.approx(78.4, abs=0.05)
    assert f1 == pytest.approx(86.1, abs=0.05)


def test_macro_average_single_row_identity():
    assert macro_average([(10.0, 20.0, 30.0)]) == (10.0, 20.0, 30.0)


def test_macro_average_idempotent_on_identical_rows():
    row = (10.0, 20.0, 30.0)
    assert macro_average([row, row]) == pytest.approx(row)


def test_macro_average_empty_rejected():
    with pytest.raises(ValueError):
        macro_average([])
