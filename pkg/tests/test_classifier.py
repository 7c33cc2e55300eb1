from __future__ import annotations

import json

import pytest

from auditminer.classifier import (
    ClassificationPath,
    ClassifierConfig,
    TERMINAL_FALLBACK,
    TERMINAL_LEAF,
    TERMINAL_UNRESOLVED,
    build_level_prompt,
    classify,
    parse_selection,
    path_from_dict,
    path_to_dict,
)
from auditminer.errors import ClassificationError
from auditminer.llm import ScriptedProvider
from auditminer.taxonomy import children, validate_path

from conftest import make_finding


def _select(*ids):
    return json.dumps(list(ids))


# -- parse_selection ----------------------------------------------------------

def test_parse_selection_clean_json():
    assert parse_selection('["CWE-362"]', ["CWE-362", "CWE-670"]) == ["CWE-362"]


def test_parse_selection_prose_token_scan():
    text = "I choose CWE-362 because it matches the race condition."
    assert parse_selection(text, ["CWE-362", "CWE-670"]) == ["CWE-362"]


def test_parse_selection_filters_non_candidates():
    assert parse_selection('["CWE-9999"]', ["CWE-362"]) == []


def test_parse_selection_preserves_model_order_and_dedups():
    text = '["CWE-670", "CWE-362", "CWE-670"]'
    assert parse_selection(text, ["CWE-362", "CWE-670"]) == ["CWE-670", "CWE-362"]


def test_parse_selection_normalizes_variants():
    assert parse_selection('["cwe-362"]', ["CWE-362"]) == ["CWE-362"]
    assert parse_selection("[362]", ["CWE-362"]) == ["CWE-362"]


def test_parse_selection_nothing_usable():
    assert parse_selection("no idea", ["CWE-362"]) == []


# -- build_level_prompt ----------------------------------------------------------

def test_prompt_lists_all_pillars_and_requests_one(small_tree):
    finding = make_finding(title="Front-running in swap")
    candidates = [small_tree.nodes[p] for p in small_tree.pillar_ids]
    request = build_level_prompt(finding, None, candidates, k=1)
    assert len(candidates) == 10
    for pillar in small_tree.pillar_ids:
        assert pillar in request.user_prompt
    assert "at most 1" in request.user_prompt
    assert "stop here" not in request.user_prompt


def test_prompt_marks_fallback_as_stop_option(small_tree):
    finding = make_finding()
    node = small_tree.nodes["CWE-362"]
    request = build_level_prompt(finding, node, children(small_tree, node.id), k=1)
    assert "CWE-362 (stop here)" in request.user_prompt


def test_prompt_accepts_empty_description(small_tree):
    finding = make_finding(title="Just a title")
    candidates = [small_tree.nodes[p] for p in small_tree.pillar_ids]
    request = build_level_prompt(finding, None, candidates, k=1)
    assert "Just a title" in request.user_prompt


def test_prompt_requires_candidates_or_fallback():
    with pytest.raises(ValueError):
        build_level_prompt(make_finding(), None, [], k=1)


# -- classify ----------------------------------------------------------------------

def test_classify_fallback_path_matches_worked_example(small_tree):
    finding = make_finding(
        title="Missing minimum output amount check",
        description="Swap can be front-run because no minimum output is enforced.",
    )
    provider = ScriptedProvider([
        _select("CWE-691"), _select("CWE-362"), _select("CWE-362"),
    ])
    path = classify(finding, small_tree, provider)
    assert path.steps == [(0, ["CWE-691"]), (1, ["CWE-362"])]
    assert path.terminal == TERMINAL_FALLBACK
    assert provider.calls == 3
    assert validate_path(small_tree, path)


def test_classify_leaf_termination(small_tree):
    provider = ScriptedProvider([_select("CWE-682"), _select("CWE-369")])
    path = classify(make_finding(title="Division by zero in share math"),
                    small_tree, provider)
    assert path.steps == [(0, ["CWE-682"]), (1, ["CWE-369"])]
    assert path.terminal == TERMINAL_LEAF
    assert provider.calls == 2


def test_classify_garbage_unresolved_at_level_zero(small_tree):
    provider = ScriptedProvider(["nonsense"] * 3)
    path = classify(make_finding(), small_tree, provider)
    assert path.steps == []
    assert path.terminal == TERMINAL_UNRESOLVED
    assert provider.calls == 3  # selection_retries default


def test_classify_retries_then_recovers(small_tree):
    provider = ScriptedProvider(["nonsense", _select("CWE-682"), _select("CWE-369")])
    path = classify(make_finding(), small_tree, provider)
    assert path.terminal == TERMINAL_LEAF
    assert path.steps[0] == (0, ["CWE-682"])


def test_classify_unresolved_midway_keeps_prefix(small_tree):
    provider = ScriptedProvider([_select("CWE-691")] + ["junk"] * 3)
    path = classify(make_finding(), small_tree, provider)
    assert path.steps == [(0, ["CWE-691"])]
    assert path.terminal == TERMINAL_UNRESOLVED


def test_classify_depth_limit(small_tree):
    provider = ScriptedProvider([_select("CWE-691"), _select("CWE-362"),
                                 _select("CWE-367")])
    config = ClassifierConfig(max_depth=2)
    path = classify(make_finding(), small_tree, provider, config)
    assert path.terminal == TERMINAL_UNRESOLVED
    assert path.depth == 2
    assert provider.calls == 2


def test_classify_provider_failure_is_classification_error(small_tree):
    provider = ScriptedProvider([])  # exhausted immediately
    with pytest.raises(ClassificationError):
        classify(make_finding(), small_tree, provider)


def test_classify_requires_title(small_tree):
    with pytest.raises(ClassificationError):
        classify(make_finding(title=""), small_tree, ScriptedProvider([]))


def test_classify_fallback_requires_mapping_allowed(small_tree):
    # CWE-691 is a pillar and not mapping-allowed, so answering it again at
    # level 1 is not a stop option; it is filtered out and retried.
    provider = ScriptedProvider([_select("CWE-691"), _select("CWE-691"),
                                 _select("CWE-362"), _select("CWE-362")])
    path = classify(make_finding(), small_tree, provider)
    assert path.terminal == TERMINAL_FALLBACK
    assert path.steps == [(0, ["CWE-691"]), (1, ["CWE-362"])]


def test_classify_deterministic_under_script(small_tree):
    script = [_select("CWE-691"), _select("CWE-362"), _select("CWE-362")]
    finding = make_finding(title="TOD in marketplace")
    first = classify(finding, small_tree, ScriptedProvider(list(script)))
    second = classify(finding, small_tree, ScriptedProvider(list(script)))
    assert first == second


def test_classify_k2_explores_branches_depth_first(small_tree):
    provider = ScriptedProvider([
        _select("CWE-691", "CWE-284"),      # level 0 picks two pillars
        _select("CWE-362"),                 # descend 691
        _select("CWE-362"),                 # stop at 362 (fallback)
        _select("CWE-287"),                 # descend 284
        _select("CWE-290"),                 # descend 287
    ])
    config = ClassifierConfig(k=2)
    path = classify(make_finding(), small_tree, provider, config)
    assert path.steps[0] == (0, ["CWE-691", "CWE-284"])
    assert path.steps[1] == (1, ["CWE-362", "CWE-287"])
    assert path.steps[2] == (2, ["CWE-290"])
    assert path.terminal == TERMINAL_FALLBACK  # first branch's terminal
    assert validate_path(small_tree, path)


def test_classify_trace_records_levels(small_tree):
    trace: list[dict] = []
    provider = ScriptedProvider([_select("CWE-682"), _select("CWE-369")])
    classify(make_finding(), small_tree, provider, trace=trace)
    assert [entry["level"] for entry in trace] == [0, 1]
    assert trace[0]["selected"] == ["CWE-682"]
    assert "response" in trace[0] and "candidates" in trace[0]


def test_path_dict_round_trip():
    path = ClassificationPath(steps=[(0, ["CWE-691"]), (1, ["CWE-362"])],
                              terminal=TERMINAL_FALLBACK)
    assert path_from_dict(path_to_dict(path)) == path


def test_path_ids_flatten():
    path = ClassificationPath(steps=[(0, ["CWE-691"]), (1, ["CWE-362"])])
    assert path.ids() == ["CWE-691", "CWE-362"]


def test_classifier_config_validation():
    with pytest.raises(ValueError):
        ClassifierConfig(k=0)
    with pytest.raises(ValueError):
        ClassifierConfig(max_depth=0)
