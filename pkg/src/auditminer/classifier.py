"""Classify findings into the CWE hierarchy by descending it level by level.

At every level the model chooses among the current node's children, plus the
node itself as a "stop here" option when it is an acceptable terminal
category. Selecting the stop option ends the descent; so does reaching a
childless node or the depth limit.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .errors import ClassificationError, JsonExtractError, ProviderError
from .extractor import Finding
from .llm import CompletionRequest, DEFAULT_TEMPERATURE, Provider, extract_json
from .taxonomy import CweNode, CweTree, children
from . import prompt_store

logger = logging.getLogger(__name__)

TERMINAL_LEAF = "leaf"
TERMINAL_FALLBACK = "fallback"
TERMINAL_UNRESOLVED = "unresolved"

_CWE_TOKEN_RE = re.compile(r"\bCWE-\d{1,4}\b", re.IGNORECASE)
_CWE_LOOSE_RE = re.compile(r"^cwe-?(\d{1,4})$", re.IGNORECASE)


@dataclass
class ClassificationPath:
    """Ordered (level, selected ids) steps plus how the descent ended.

    With k = 1 the steps form a simple root-to-terminal chain; with k > 1 each
    level entry carries every id selected at that level across the explored
    branches, in depth-first order.
    """

    steps: list[tuple[int, list[str]]] = field(default_factory=list)
    terminal: str = TERMINAL_UNRESOLVED

    def ids(self) -> list[str]:
        out: list[str] = []
        for _, selected in self.steps:
            out.extend(selected)
        return out

    @property
    def depth(self) -> int:
        return len(self.steps)


@dataclass
class ClassifierConfig:
    k: int = 1
    max_depth: int = 6
    selection_retries: int = 3
    temperature: float = DEFAULT_TEMPERATURE
    model_name: str = ""
    max_output_tokens: int = 256

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


def path_to_dict(path: ClassificationPath) -> dict:
    return {
        "steps": [[level, list(selected)] for level, selected in path.steps],
        "terminal": path.terminal,
    }


def path_from_dict(data: dict) -> ClassificationPath:
    return ClassificationPath(
        steps=[(int(level), list(selected)) for level, selected in data.get("steps", [])],
        terminal=data.get("terminal", TERMINAL_UNRESOLVED),
    )


def _normalize_id(value: object) -> str | None:
    if isinstance(value, int):
        return f"CWE-{value}"
    if isinstance(value, dict):
        value = value.get("id")
    if not isinstance(value, str):
        return None
    match = _CWE_LOOSE_RE.match(value.strip())
    if not match:
        return None
    return f"CWE-{int(match.group(1))}"


def parse_selection(text: str, candidates: list[str]) -> list[str]:
    """Recover the model's chosen ids, restricted to the candidate set.

    Prefers a JSON array when one is present; otherwise scans the prose for
    CWE-<digits> tokens. Order is the model's, duplicates removed; the caller
    truncates to k. Returns [] when nothing usable is found.
    """
    allowed = set(candidates)
    picked: list[str] = []

    value = None
    try:
        value = extract_json(text)
    except JsonExtractError:
        pass

    if isinstance(value, list):
        for item in value:
            nid = _normalize_id(item)
            if nid and nid in allowed and nid not in picked:
                picked.append(nid)
        return picked

    for token in _CWE_TOKEN_RE.findall(text):
        nid = _normalize_id(token)
        if nid and nid in allowed and nid not in picked:
            picked.append(nid)
    return picked


def _one_liner(text: str, limit: int = 200) -> str:
    line = text.strip().splitlines()[0] if text.strip() else ""
    return line if len(line) <= limit else line[: limit - 1] + "…"


def build_level_prompt(
    finding: Finding,
    fallback: CweNode | None,
    candidates: list[CweNode],
    k: int,
    *,
    temperature: float = DEFAULT_TEMPERATURE,
    model_name: str = "",
    max_output_tokens: int = 256,
) -> CompletionRequest:
    """Assemble the selection prompt for one level of the descent."""
    if not candidates and fallback is None:
        raise ValueError("need at least one candidate or a fallback")
    lines = []
    for node in candidates:
        lines.append(f"- {node.id}: {node.name} — {_one_liner(node.description)}")
    if fallback is not None:
        lines.append(
            f"- {fallback.id} (stop here): keep the current category "
            f"{fallback.id}: {fallback.name} and end the classification"
        )
    user = prompt_store.render(
        "classify_user.txt",
        title=finding.title,
        description=finding.description or "(no description)",
        options="\n".join(lines),
        k=str(k),
    )
    return CompletionRequest(
        system_prompt=prompt_store.text("classify_system.txt"),
        user_prompt=user,
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        model_name=model_name,
    )


def classify(
    finding: Finding,
    tree: CweTree,
    provider: Provider,
    config: ClassifierConfig | None = None,
    trace: list[dict] | None = None,
) -> ClassificationPath:
    """Walk the hierarchy from the pillars down and return the decision path.

    Levels are prompted one at a time starting from the pillar set. The walk
    stops at a selected stop-here option (terminal ``fallback``), a childless
    node (``leaf``), the depth limit, or when no usable selection could be
    parsed after the retry budget (both ``unresolved``). Provider failures
    raise ClassificationError so the caller can isolate the finding.
    """
    cfg = config or ClassifierConfig()
    if not finding.title:
        raise ClassificationError("finding has no title to classify")

    level_selected: dict[int, list[str]] = {}

    def record(level: int, selected: list[str]) -> None:
        bucket = level_selected.setdefault(level, [])
        for nid in selected:
            if nid not in bucket:
                bucket.append(nid)

    def descend(parent: CweNode | None, level: int) -> str:
        if parent is None:
            candidates = [tree.nodes[p] for p in tree.pillar_ids]
        else:
            candidates = children(tree, parent.id)
        if parent is not None and not candidates:
            return TERMINAL_LEAF
        if not candidates:
            return TERMINAL_UNRESOLVED
        if level >= cfg.max_depth:
            logger.info("depth limit %d reached under %s",
                        cfg.max_depth, parent.id if parent else "root")
            return TERMINAL_UNRESOLVED

        fallback = parent if parent is not None and parent.mapping_allowed else None
        allowed = [c.id for c in candidates] + ([fallback.id] if fallback else [])

        selection: list[str] = []
        for _ in range(max(1, cfg.selection_retries)):
            request = build_level_prompt(
                finding, fallback, candidates, cfg.k,
                temperature=cfg.temperature,
                model_name=cfg.model_name,
                max_output_tokens=cfg.max_output_tokens,
            )
            try:
                raw = provider.complete(request)
            except ProviderError as exc:
                raise ClassificationError(
                    f"provider failed at level {level}: {exc}"
                ) from exc
            selection = parse_selection(raw, allowed)[: cfg.k]
            if trace is not None:
                trace.append({
                    "level": level,
                    "parent": parent.id if parent else None,
                    "candidates": allowed,
                    "response": raw,
                    "selected": list(selection),
                })
            if selection:
                break
        if not selection:
            logger.warning("no usable selection at level %d after %d attempt(s)",
                           level, max(1, cfg.selection_retries))
            return TERMINAL_UNRESOLVED
        if fallback is not None and fallback.id in selection:
            return TERMINAL_FALLBACK

        record(level, selection)
        terminal = ""
        for nid in selection:
            branch_terminal = descend(tree.nodes[nid], level + 1)
            if not terminal:
                terminal = branch_terminal
        return terminal

    terminal = descend(None, 0)
    steps = [(level, level_selected[level]) for level in sorted(level_selected)]
    return ClassificationPath(steps=steps, terminal=terminal)
