"""Map-reduce extraction of structured vulnerability data from report chunks.

Each chunk is mapped to a partial result, partials are reduced group-wise
through the model, and group results are folded with a deterministic merge
whose conflict rule is "earlier wins": metadata near the top of a report is
the most reliable.
"""
from __future__ import annotations

import json
import logging
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import ExtractionError, JsonExtractError, MapChunkError, ProviderError
from .ingest import Chunk, DEFAULT_CHUNK_LENGTH, TokenizerConfig, count_tokens
from .llm import CompletionRequest, DEFAULT_TEMPERATURE, Provider, extract_json
from . import prompt_store

if TYPE_CHECKING:
    from .classifier import ClassificationPath

logger = logging.getLogger(__name__)

SEVERITY_LEVELS = ("critical", "high", "medium", "low", "info")

# Near-miss severities seen in the wild map onto the five-value scale;
# anything else loses the value and falls back to "info".
_SEVERITY_SYNONYMS = {
    "informational": "info",
    "informative": "info",
    "information": "info",
    "note": "info",
    "notes": "info",
    "minor": "low",
    "moderate": "medium",
    "med": "medium",
    "major": "high",
    "severe": "high",
    "crit": "critical",
}

_ADDRESS_RE = re.compile(r"^0x[0-9a-fA-F]{40}$")
_RETRY_SUFFIX = (
    "\n\nYour previous reply could not be parsed. Respond again with only one "
    "valid JSON object matching the schema, no prose, no code fences."
)


@dataclass
class ProjectInfo:
    url: str = ""
    commit_id: str = ""
    address: str = ""
    chain: str = ""
    compiler_version: str | None = None
    file_paths: list[str] = field(default_factory=list)


@dataclass
class Finding:
    id: int
    title: str
    description: str = ""
    severity: str = "info"
    location: str = ""
    category: "ClassificationPath | None" = None


@dataclass
class StructuredReport:
    project_info: ProjectInfo = field(default_factory=ProjectInfo)
    findings: list[Finding] = field(default_factory=list)

    @classmethod
    def empty(cls) -> "StructuredReport":
        return cls()


@dataclass
class ExtractorConfig:
    chunk_length: int = DEFAULT_CHUNK_LENGTH
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    parallelism: int = 1
    work_dir: Path | None = None
    # Intermediates are always written; they are only read back when resume
    # is set. Scripted runs must not resume or the FIFO queue desynchronizes.
    resume: bool = True
    temperature: float = DEFAULT_TEMPERATURE
    model_name: str = ""
    max_output_tokens: int = 4096


def normalize_title(title: str) -> str:
    """Dedup key: case-folded, punctuation-stripped, whitespace-collapsed."""
    folded = title.casefold()
    stripped = "".join(
        ch for ch in folded if not unicodedata.category(ch).startswith("P")
    )
    return " ".join(stripped.split())


def dedup_findings(findings: list[Finding]) -> list[Finding]:
    """Drop later findings whose normalized title repeats an earlier one."""
    seen: set[str] = set()
    out: list[Finding] = []
    for finding in findings:
        key = normalize_title(finding.title)
        if key in seen:
            continue
        seen.add(key)
        out.append(finding)
    return out


def merge(a: StructuredReport, b: StructuredReport) -> StructuredReport:
    """The left-fold merge operator: ``a`` precedes ``b`` in document order.

    Scalar metadata takes the earlier non-empty value; findings are
    concatenated, title-deduplicated, and renumbered 1..n.
    """
    def first(x: str, y: str) -> str:
        return x if x else y

    info = ProjectInfo(
        url=first(a.project_info.url, b.project_info.url),
        commit_id=first(a.project_info.commit_id, b.project_info.commit_id),
        address=first(a.project_info.address, b.project_info.address),
        chain=first(a.project_info.chain, b.project_info.chain),
        compiler_version=a.project_info.compiler_version or b.project_info.compiler_version,
        file_paths=list(a.project_info.file_paths)
        + [p for p in b.project_info.file_paths if p not in a.project_info.file_paths],
    )
    merged = dedup_findings(list(a.findings) + list(b.findings))
    findings = [replace(f, id=i + 1) for i, f in enumerate(merged)]
    return StructuredReport(project_info=info, findings=findings)


def _coerce_severity(value: object) -> str:
    s = str(value).strip().casefold()
    if s in SEVERITY_LEVELS:
        return s
    if s in _SEVERITY_SYNONYMS:
        return _SEVERITY_SYNONYMS[s]
    logger.warning("unknown severity %r dropped, defaulting to 'info'", value)
    return "info"


def _clean_address(value: object) -> str:
    s = str(value or "").strip()
    if not s:
        return ""
    if _ADDRESS_RE.match(s):
        return s
    logger.warning("invalid on-chain address %r dropped", s)
    return ""


def _clean_str(value: object) -> str:
    if value is None:
        return ""
    return str(value).strip()


def parse_structured_report(value: object) -> StructuredReport:
    """Validate a decoded model payload into a StructuredReport.

    Tolerant by design: a bare array is treated as the findings list, findings
    without a title are dropped with a diagnostic, severities are coerced via
    the synonym table, and ids are reassigned 1..n in payload order.
    """
    if isinstance(value, list):
        value = {"findings": value}
    if not isinstance(value, dict):
        raise ValueError(f"expected a JSON object, got {type(value).__name__}")

    raw_info = value.get("project_info") or {}
    if not isinstance(raw_info, dict):
        raw_info = {}
    info = ProjectInfo(
        url=_clean_str(raw_info.get("url")),
        commit_id=_clean_str(raw_info.get("commit_id")),
        address=_clean_address(raw_info.get("address")),
        chain=_clean_str(raw_info.get("chain")),
        compiler_version=_clean_str(raw_info.get("compiler_version")) or None,
    )

    findings: list[Finding] = []
    raw_findings = value.get("findings") or []
    if not isinstance(raw_findings, list):
        raise ValueError("findings must be an array")
    for item in raw_findings:
        if not isinstance(item, dict):
            logger.warning("non-object finding entry dropped: %r", item)
            continue
        title = _clean_str(item.get("title"))
        if not title:
            logger.warning("finding without title dropped: %r", item)
            continue
        findings.append(Finding(
            id=len(findings) + 1,
            title=title,
            description=_clean_str(item.get("description")),
            severity=_coerce_severity(item.get("severity", "info")),
            location=_clean_str(item.get("location")),
        ))
    return StructuredReport(project_info=info, findings=findings)


def report_to_dict(report: StructuredReport) -> dict:
    return {
        "project_info": {
            "url": report.project_info.url,
            "commit_id": report.project_info.commit_id,
            "address": report.project_info.address,
            "chain": report.project_info.chain,
            "compiler_version": report.project_info.compiler_version,
            "file_paths": list(report.project_info.file_paths),
        },
        "findings": [
            {
                "id": f.id,
                "title": f.title,
                "description": f.description,
                "severity": f.severity,
                "location": f.location,
            }
            for f in report.findings
        ],
    }


def report_from_dict(data: dict) -> StructuredReport:
    info = data.get("project_info") or {}
    return StructuredReport(
        project_info=ProjectInfo(
            url=info.get("url", ""),
            commit_id=info.get("commit_id", ""),
            address=info.get("address", ""),
            chain=info.get("chain", ""),
            compiler_version=info.get("compiler_version"),
            file_paths=list(info.get("file_paths", [])),
        ),
        findings=[
            Finding(
                id=f["id"],
                title=f["title"],
                description=f.get("description", ""),
                severity=f.get("severity", "info"),
                location=f.get("location", ""),
            )
            for f in data.get("findings", [])
        ],
    )


def _request(system: str, user: str, config: ExtractorConfig) -> CompletionRequest:
    return CompletionRequest(
        system_prompt=system,
        user_prompt=user,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
        model_name=config.model_name,
    )


def _ask_for_report(
    system: str, user: str, provider: Provider, config: ExtractorConfig
) -> StructuredReport:
    """One completion plus a single semantic re-ask on unparseable output."""
    raw = provider.complete(_request(system, user, config))
    try:
        return parse_structured_report(extract_json(raw))
    except (JsonExtractError, ValueError) as first_error:
        logger.info("unparseable model output, re-asking once: %s", first_error)
    raw = provider.complete(_request(system, user + _RETRY_SUFFIX, config))
    return parse_structured_report(extract_json(raw))


def map_chunk(
    chunk: Chunk,
    provider: Provider,
    query_spec: str | None = None,
    config: ExtractorConfig | None = None,
) -> StructuredReport:
    """Extract a partial report from one chunk (the map step).

    Raises MapChunkError when the model output stays unparseable after one
    re-ask; callers skip the chunk and continue.
    """
    cfg = config or ExtractorConfig()
    schema = query_spec or prompt_store.extraction_schema()
    user = prompt_store.render(
        "map_user.txt",
        schema=schema,
        heading_path=" > ".join(chunk.heading_path) or "(document root)",
        chunk_text=chunk.text,
    )
    try:
        return _ask_for_report(prompt_store.text("map_system.txt"), user, provider, cfg)
    except (JsonExtractError, ValueError) as exc:
        raise MapChunkError(f"chunk {chunk.index}: unparseable output after re-ask: {exc}") from exc


def reduce_group(
    partials: list[StructuredReport],
    provider: Provider,
    config: ExtractorConfig | None = None,
    query_spec: str | None = None,
) -> StructuredReport:
    """Consolidate one group of partials (the reduce step).

    The model's merged answer is re-merged with the mechanical left-fold as a
    safety net for dropped fields; if the model output stays unparseable after
    one re-ask (or the provider fails), the mechanical merge alone is used.
    """
    if not partials:
        return StructuredReport.empty()
    cfg = config or ExtractorConfig()
    mechanical = partials[0]
    for part in partials[1:]:
        mechanical = merge(mechanical, part)
    if len(partials) == 1:
        mechanical = merge(StructuredReport.empty(), mechanical)

    schema = query_spec or prompt_store.extraction_schema()
    payload = json.dumps([report_to_dict(p) for p in partials], ensure_ascii=False, indent=2)
    user = prompt_store.render("reduce_user.txt", schema=schema, partials_json=payload)
    try:
        modeled = _ask_for_report(prompt_store.text("reduce_system.txt"), user, provider, cfg)
    except (JsonExtractError, ValueError, ProviderError) as exc:
        logger.warning("reduce fell back to mechanical merge: %s", exc)
        return mechanical
    return merge(modeled, mechanical)


def _partition(
    partials: list[StructuredReport], config: ExtractorConfig
) -> list[list[StructuredReport]]:
    """Greedy in-order grouping so each group's serialization fits the budget."""
    groups: list[list[StructuredReport]] = []
    current: list[StructuredReport] = []
    current_size = 0
    for part in partials:
        size = count_tokens(json.dumps(report_to_dict(part)), config.tokenizer)
        if current and current_size + size > config.chunk_length:
            groups.append(current)
            current = []
            current_size = 0
        current.append(part)
        current_size += size
    if current:
        groups.append(current)
    return groups


def _load_cached(path: Path) -> StructuredReport | None:
    if not path.is_file():
        return None
    try:
        return report_from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (ValueError, KeyError) as exc:
        logger.warning("ignoring unreadable intermediate %s: %s", path, exc)
        return None


def _store(path: Path, report: StructuredReport) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(report_to_dict(report), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def extract_report(
    chunks: list[Chunk],
    provider: Provider,
    config: ExtractorConfig | None = None,
) -> StructuredReport:
    """Map every chunk, reduce the partials group-wise, and fold the results.

    Chunk failures are isolated; the whole extraction fails only when every
    chunk failed. With a work_dir set, per-chunk and per-group intermediates
    are persisted and reloaded on rerun.
    """
    cfg = config or ExtractorConfig()
    if not chunks:
        return StructuredReport.empty()

    def map_one(chunk: Chunk) -> StructuredReport | None:
        cache = (
            cfg.work_dir / "partials" / f"partial_{chunk.index:04d}.json"
            if cfg.work_dir
            else None
        )
        if cache is not None and cfg.resume:
            cached = _load_cached(cache)
            if cached is not None:
                return cached
        try:
            result = map_chunk(chunk, provider, config=cfg)
        except (MapChunkError, ProviderError) as exc:
            logger.warning("map failed for chunk %d: %s", chunk.index, exc)
            return None
        if cache is not None:
            _store(cache, result)
        return result

    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            mapped = list(pool.map(map_one, chunks))
    else:
        mapped = [map_one(c) for c in chunks]

    partials = [p for p in mapped if p is not None]
    if not partials:
        raise ExtractionError(f"all {len(chunks)} chunk(s) failed to map")

    groups = _partition(partials, cfg)
    reduced: list[StructuredReport] = []
    for g, group in enumerate(groups):
        cache = cfg.work_dir / "groups" / f"group_{g:02d}.json" if cfg.work_dir else None
        if cache is not None and cfg.resume:
            cached = _load_cached(cache)
            if cached is not None:
                reduced.append(cached)
                continue
        result = reduce_group(group, provider, cfg)
        if cache is not None:
            _store(cache, result)
        reduced.append(result)

    final = reduced[0]
    for part in reduced[1:]:
        final = merge(final, part)
    return final
