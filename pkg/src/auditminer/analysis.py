"""Dataset analytics: severity aggregation, treemap data, agreement, P/R/F1.

Pure computations over records and label sets; nothing here talks to the
network or renders anything.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .classifier import TERMINAL_FALLBACK, TERMINAL_LEAF
from .errors import DegenerateLabelsError
from .fetcher import DatasetRecord
from .taxonomy import CweTree

logger = logging.getLogger(__name__)

UNCLASSIFIED = "unclassified"

# Midpoints of the CVSS qualitative ranges (Low 0.1-3.9, Medium 4.0-6.9,
# High 7.0-8.9, Critical 9.0-10.0), with info pinned to zero.
DEFAULT_SEVERITY_CVSS: dict[str, float] = {
    "info": 0.0,
    "low": 2.0,
    "medium": 5.45,
    "high": 7.95,
    "critical": 9.5,
}

_SEVERITY_ORDER = ("info", "low", "medium", "high", "critical")


@dataclass(frozen=True)
class SeverityMapping:
    scores: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_SEVERITY_CVSS))

    def __post_init__(self) -> None:
        missing = [level for level in _SEVERITY_ORDER if level not in self.scores]
        if missing:
            raise ValueError(f"severity mapping missing levels: {missing}")
        for level, score in self.scores.items():
            if not 0.0 <= score <= 10.0:
                raise ValueError(f"{level}: CVSS score {score} outside [0, 10]")
        ordered = [self.scores[level] for level in _SEVERITY_ORDER]
        if any(a > b for a, b in zip(ordered, ordered[1:])):
            raise ValueError("severity mapping must be monotone info <= ... <= critical")


@dataclass
class CategoryStats:
    cwe_id: str
    frequency: int
    mean_cvss: float


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")


def severity_to_cvss(severity: str, mapping: SeverityMapping | None = None) -> float:
    """Table lookup from the qualitative severity to its CVSS score."""
    table = (mapping or SeverityMapping()).scores
    return table[severity]


def _terminal_category(finding) -> str:
    path = finding.category
    if path is None or not path.steps or path.terminal not in (TERMINAL_LEAF, TERMINAL_FALLBACK):
        return UNCLASSIFIED
    ids = path.ids()
    return ids[-1] if ids else UNCLASSIFIED


def _sort_key(cwe_id: str):
    if cwe_id == UNCLASSIFIED:
        return (1, 0)
    try:
        return (0, int(cwe_id.split("-", 1)[1]))
    except (IndexError, ValueError):
        return (2, 0)


def avg_cvss_by_category(
    records: Sequence[DatasetRecord],
    mapping: SeverityMapping | None = None,
) -> list[CategoryStats]:
    """Group findings by terminal CWE id and average their CVSS scores.

    Findings without a resolved category land under the "unclassified"
    sentinel. Output is sorted by numeric CWE id, sentinel last, so it is
    invariant to record order.
    """
    table = mapping or SeverityMapping()
    totals: dict[str, list[float]] = {}
    for record in records:
        for finding in record.findings:
            cid = _terminal_category(finding)
            bucket = totals.setdefault(cid, [0, 0.0])
            bucket[0] += 1
            bucket[1] += severity_to_cvss(finding.severity, table)
    stats = [
        CategoryStats(cwe_id=cid, frequency=int(count), mean_cvss=total / count)
        for cid, (count, total) in totals.items()
    ]
    stats.sort(key=lambda s: _sort_key(s.cwe_id))
    return stats


def treemap_export(stats: Sequence[CategoryStats], tree: CweTree) -> dict:
    """Nest category stats along the hierarchy for treemap rendering.

    Every node aggregates its subtree: frequency is the subtree sum and
    severity the frequency-weighted mean. A category sitting on an internal
    node is emitted as an explicit self-child so parent frequency always
    equals the sum of child frequencies. Ids unknown to the tree go under
    "unclassified". Multi-parent nodes are placed under their first parent.
    """
    contrib: dict[str, CategoryStats] = {}
    unclassified_count = 0
    unclassified_weight = 0.0
    for stat in stats:
        placed = stat.cwe_id in tree.nodes and _reaches_pillar(stat.cwe_id, tree)
        if stat.cwe_id != UNCLASSIFIED and placed:
            contrib[stat.cwe_id] = stat
        else:
            if stat.cwe_id != UNCLASSIFIED:
                logger.warning("category %s not in tree, grouped as unclassified", stat.cwe_id)
            unclassified_count += stat.frequency
            unclassified_weight += stat.frequency * stat.mean_cvss

    included: set[str] = set()
    for cid in contrib:
        node_id: str | None = cid
        while node_id is not None:
            included.add(node_id)
            parents = tree.nodes[node_id].parent_ids
            node_id = parents[0] if parents else None

    def build(node_id: str) -> dict:
        node = tree.nodes[node_id]
        kids = [build(c) for c in node.child_ids if c in included]
        own = contrib.get(node_id)
        if own is not None and kids:
            kids.insert(0, {
                "id": node_id,
                "name": node.name,
                "frequency": own.frequency,
                "severity": own.mean_cvss,
                "children": [],
            })
            own = None
        if own is not None:
            frequency, severity = own.frequency, own.mean_cvss
        else:
            frequency = sum(k["frequency"] for k in kids)
            weight = sum(k["frequency"] * k["severity"] for k in kids)
            severity = weight / frequency if frequency else 0.0
        return {
            "id": node_id,
            "name": node.name,
            "frequency": frequency,
            "severity": severity,
            "children": kids,
        }

    roots = [build(p) for p in tree.pillar_ids if p in included]
    if unclassified_count:
        roots.append({
            "id": UNCLASSIFIED,
            "name": "Unclassified",
            "frequency": unclassified_count,
            "severity": unclassified_weight / unclassified_count,
            "children": [],
        })
    total = sum(r["frequency"] for r in roots)
    weight = sum(r["frequency"] * r["severity"] for r in roots)
    return {
        "id": "root",
        "name": "All categories",
        "frequency": total,
        "severity": weight / total if total else 0.0,
        "children": roots,
    }


def _reaches_pillar(cwe_id: str, tree: CweTree) -> bool:
    node_id: str | None = cwe_id
    seen = set()
    while node_id is not None and node_id not in seen:
        seen.add(node_id)
        if node_id in tree.pillar_ids:
            return True
        parents = tree.nodes[node_id].parent_ids
        node_id = parents[0] if parents else None
    return False


def krippendorff_alpha(
    labels_a: Sequence[str],
    labels_b: Sequence[str],
    distance: str = "nominal",
) -> float:
    """Two-rater agreement, 1 - observed/expected disagreement.

    Uses the coincidence-matrix formulation with a nominal distance (0 iff
    equal, else 1). Perfect agreement over at least two distinct values is
    exactly 1.0; a single value across both raters leaves the expected
    disagreement at zero and raises DegenerateLabelsError.
    """
    if distance != "nominal":
        raise ValueError(f"unsupported distance metric: {distance!r}")
    if len(labels_a) != len(labels_b):
        raise ValueError("label lists must have equal length")
    if len(labels_a) < 2:
        raise ValueError("need at least two rated items")

    values = set(labels_a) | set(labels_b)
    if len(values) < 2:
        raise DegenerateLabelsError("all labels identical: expected disagreement is zero")

    coincidence: Counter[tuple[str, str]] = Counter()
    for x, y in zip(labels_a, labels_b):
        coincidence[(x, y)] += 1
        coincidence[(y, x)] += 1
    marginals: Counter[str] = Counter()
    for (v, _), count in coincidence.items():
        marginals[v] += count
    n = sum(marginals.values())

    observed = sum(count for (v, w), count in coincidence.items() if v != w) / n
    expected = sum(
        marginals[v] * marginals[w] for v in values for w in values if v != w
    ) / (n * (n - 1))
    return 1.0 - observed / expected


def prf1(counts: ConfusionCounts) -> tuple[float, float, float]:
    """Precision, recall, and F1 as percentages.

    Empty denominators yield 0.0 by convention and are flagged in the log.
    """
    if counts.tp + counts.fp > 0:
        precision = 100.0 * counts.tp / (counts.tp + counts.fp)
    else:
        logger.warning("tp+fp == 0; precision reported as 0.0 by convention")
        precision = 0.0
    if counts.tp + counts.fn > 0:
        recall = 100.0 * counts.tp / (counts.tp + counts.fn)
    else:
        logger.warning("tp+fn == 0; recall reported as 0.0 by convention")
        recall = 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def macro_average(
    per_class: Sequence[tuple[float, float, float]],
) -> tuple[float, float, float]:
    """Unweighted column means of per-class (precision, recall, f1) rows."""
    if not per_class:
        raise ValueError("macro_average needs at least one row")
    n = len(per_class)
    return (
        sum(row[0] for row in per_class) / n,
        sum(row[1] for row in per_class) / n,
        sum(row[2] for row in per_class) / n,
    )
