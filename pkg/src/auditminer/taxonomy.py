"""Load, prune, and navigate the CWE-1000 research view as an immutable tree.

The taxonomy is consumed from a prepared JSON document (see ``load_taxonomy``),
never from the official XML; converting a release to this JSON is a one-shot
import step outside the library.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import TaxonomyIntegrityError, TaxonomySchemaError, UnknownCweError

logger = logging.getLogger(__name__)

CWE_ID_RE = re.compile(r"^CWE-\d{1,4}$")

ABSTRACTIONS = ("Pillar", "Class", "Base", "Variant")

# Base/Variant entries are acceptable terminal categories by default;
# Pillar/Class are not unless a mapping-notes file says otherwise.
_DEFAULT_MAPPING_ALLOWED = {
    "Pillar": False,
    "Class": False,
    "Base": True,
    "Variant": True,
}


@dataclass(frozen=True)
class CweNode:
    id: str
    name: str
    description: str = ""
    abstraction: str = "Base"
    parent_ids: tuple[str, ...] = ()
    child_ids: tuple[str, ...] = ()
    mapping_allowed: bool = True
    hardware: bool = False


@dataclass(frozen=True)
class CweTree:
    nodes: Mapping[str, CweNode]
    pillar_ids: tuple[str, ...]
    view: str = "CWE-1000"

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: str) -> CweNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownCweError(f"unknown CWE id: {node_id}") from None


def _require(condition: bool, field: str, message: str) -> None:
    if not condition:
        raise TaxonomySchemaError(f"{field}: {message}")


def _string_list(value: object, field: str) -> list[str]:
    _require(isinstance(value, list), field, f"expected a list, got {type(value).__name__}")
    out = []
    for i, item in enumerate(value):  # type: ignore[union-attr]
        _require(isinstance(item, str), f"{field}[{i}]", "expected a CWE id string")
        out.append(item)
    return out


def load_taxonomy(
    source: Mapping | str | Path,
    mapping_notes: Mapping[str, bool] | None = None,
) -> CweTree:
    """Build a consistent CweTree from a taxonomy JSON document.

    ``source`` may be an already-parsed document or a path to a JSON file.
    ``mapping_notes`` optionally overrides the mapping-allowed flag per id;
    absent flags default by abstraction level (Base/Variant yes, Pillar/Class no).

    Raises TaxonomySchemaError for malformed documents (message names the
    offending field) and TaxonomyIntegrityError for dangling references,
    cycles, or pillar/parent mismatches.
    """
    if isinstance(source, (str, Path)):
        try:
            document = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise TaxonomySchemaError(f"document: not valid JSON ({exc})") from exc
    else:
        document = source

    _require(isinstance(document, Mapping), "document", "expected a JSON object")
    raw_nodes = document.get("nodes")
    _require(raw_nodes is not None, "nodes", "required field is missing")
    _require(isinstance(raw_nodes, list), "nodes", "expected a list")
    view = document.get("view", "CWE-1000")
    _require(isinstance(view, str), "view", "expected a string")

    order: list[str] = []
    parsed: dict[str, dict] = {}
    for i, entry in enumerate(raw_nodes):
        field = f"nodes[{i}]"
        _require(isinstance(entry, Mapping), field, "expected an object")
        node_id = entry.get("id")
        _require(isinstance(node_id, str) and bool(CWE_ID_RE.match(node_id)),
                 f"{field}.id", f"expected 'CWE-<1-4 digits>', got {node_id!r}")
        _require(node_id not in parsed, f"{field}.id", f"duplicate id {node_id}")
        name = entry.get("name")
        _require(isinstance(name, str) and name != "", f"{field}.name", "expected a non-empty string")
        abstraction = entry.get("abstraction")
        _require(abstraction in ABSTRACTIONS,
                 f"{field}.abstraction", f"expected one of {ABSTRACTIONS}, got {abstraction!r}")
        description = entry.get("description", "")
        _require(isinstance(description, str), f"{field}.description", "expected a string")
        parents = _string_list(entry.get("parents", []), f"{field}.parents")
        children = _string_list(entry.get("children", []), f"{field}.children")
        mapping_allowed = entry.get("mapping_allowed")
        if mapping_allowed is None:
            mapping_allowed = _DEFAULT_MAPPING_ALLOWED[abstraction]
        _require(isinstance(mapping_allowed, bool), f"{field}.mapping_allowed", "expected a boolean")
        hardware = entry.get("hardware", False)
        _require(isinstance(hardware, bool), f"{field}.hardware", "expected a boolean")
        order.append(node_id)
        parsed[node_id] = {
            "name": name,
            "description": description,
            "abstraction": abstraction,
            "parents": parents,
            "children": children,
            "mapping_allowed": mapping_allowed,
            "hardware": hardware,
        }

    unresolved = sorted(
        {ref for spec in parsed.values() for ref in spec["parents"] + spec["children"]
         if ref not in parsed}
    )
    if unresolved:
        raise TaxonomyIntegrityError(
            f"unresolved references: {', '.join(unresolved)}", unresolved=unresolved
        )

    # Symmetrize so every edge is visible from both ends; explicit lists keep
    # their document order, implied entries are appended in document order.
    parents_of = {nid: list(spec["parents"]) for nid, spec in parsed.items()}
    children_of = {nid: list(spec["children"]) for nid, spec in parsed.items()}
    for nid in order:
        for child in parsed[nid]["children"]:
            if nid not in parents_of[child]:
                parents_of[child].append(nid)
    for nid in order:
        for parent in parsed[nid]["parents"]:
            if nid not in children_of[parent]:
                children_of[parent].append(nid)

    pillar_ids = []
    for nid in order:
        is_root = not parents_of[nid]
        is_pillar = parsed[nid]["abstraction"] == "Pillar"
        if is_root != is_pillar:
            raise TaxonomyIntegrityError(
                f"{nid}: abstraction {parsed[nid]['abstraction']!r} inconsistent with "
                f"{len(parents_of[nid])} parent(s); only pillars may be parentless"
            )
        if is_root:
            pillar_ids.append(nid)

    _check_acyclic(order, children_of)

    notes = dict(mapping_notes or {})
    for nid in notes:
        if nid not in parsed:
            logger.warning("mapping note for unknown id %s ignored", nid)

    nodes = {}
    for nid in order:
        spec = parsed[nid]
        nodes[nid] = CweNode(
            id=nid,
            name=spec["name"],
            description=spec["description"],
            abstraction=spec["abstraction"],
            parent_ids=tuple(parents_of[nid]),
            child_ids=tuple(children_of[nid]),
            mapping_allowed=bool(notes.get(nid, spec["mapping_allowed"])),
            hardware=spec["hardware"],
        )
    return CweTree(nodes=nodes, pillar_ids=tuple(pillar_ids), view=view)


def _check_acyclic(order: Sequence[str], children_of: Mapping[str, list[str]]) -> None:
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {nid: WHITE for nid in order}
    for start in order:
        if color[start] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        color[start] = GRAY
        while stack:
            nid, i = stack[-1]
            kids = children_of[nid]
            if i < len(kids):
                stack[-1] = (nid, i + 1)
                kid = kids[i]
                if color[kid] == GRAY:
                    raise TaxonomyIntegrityError(f"cycle detected through {kid}")
                if color[kid] == WHITE:
                    color[kid] = GRAY
                    stack.append((kid, 0))
            else:
                color[nid] = BLACK
                stack.pop()


def prune_hardware(tree: CweTree, hardware_ids: Iterable[str]) -> CweTree:
    """Return a new tree without the listed nodes or any reference to them.

    Ids missing from the tree are reported at warning level, not fatal: the
    externally supplied list may lag the view version. Idempotent.
    """
    requested = list(hardware_ids)
    present = {nid for nid in requested if nid in tree.nodes}
    absent = [nid for nid in requested if nid not in tree.nodes]
    if absent:
        logger.warning("%d hardware id(s) not in view, skipped: %s",
                       len(absent), ", ".join(absent))
    if not present:
        return tree

    nodes = {}
    for nid, node in tree.nodes.items():
        if nid in present:
            continue
        nodes[nid] = CweNode(
            id=node.id,
            name=node.name,
            description=node.description,
            abstraction=node.abstraction,
            parent_ids=tuple(p for p in node.parent_ids if p not in present),
            child_ids=tuple(c for c in node.child_ids if c not in present),
            mapping_allowed=node.mapping_allowed,
            hardware=node.hardware,
        )
    pillar_ids = tuple(p for p in tree.pillar_ids if p not in present)
    return CweTree(nodes=nodes, pillar_ids=pillar_ids, view=tree.view)


def children(tree: CweTree, node_id: str) -> list[CweNode]:
    """Child nodes of ``node_id`` in stable document order; [] for leaves."""
    node = tree.node(node_id)
    return [tree.nodes[c] for c in node.child_ids]


def validate_path(tree: CweTree, path: object) -> bool:
    """Check that a classification path descends the tree from the pillars.

    Accepts a ClassificationPath, a list of (level, [ids]) steps, or a flat
    list of ids (treated as a single-selection chain). True iff the first
    step selects pillar-level nodes and every id in each later step is a
    child of some node selected in the step before. Empty paths are valid.
    """
    steps = getattr(path, "steps", path)
    if not steps:
        return True
    if all(isinstance(step, str) for step in steps):
        steps = [(level, [nid]) for level, nid in enumerate(steps)]

    pillars = set(tree.pillar_ids)
    previous: set[str] | None = None
    for step in steps:
        try:
            _, selected = step
        except (TypeError, ValueError):
            return False
        if not selected:
            return False
        for nid in selected:
            if nid not in tree.nodes:
                return False
            if previous is None:
                if nid not in pillars:
                    return False
            else:
                if not any(nid in tree.nodes[p].child_ids for p in previous):
                    return False
        previous = set(selected)
    return True
