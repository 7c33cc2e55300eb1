"""Retrieve audited source code and persist dataset records.

Repositories are fetched at an exact commit via clone+checkout; on-chain
sources come from Etherscan-style explorer APIs. Both yield a SourceBundle
whose files are written under each record's ``sources/`` subtree.
"""
from __future__ import annotations

import json
import logging
import os
import re
import shutil
import subprocess
import tempfile
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import requests

from .classifier import (
    ClassificationPath,
    TERMINAL_FALLBACK,
    TERMINAL_LEAF,
    TERMINAL_UNRESOLVED,
)
from .errors import (
    AssemblyError,
    CommitNotFoundError,
    EmptyBundleError,
    NoSourceError,
    RecordConflictError,
    RecordWriteError,
    TransportError,
    UnsupportedChainError,
)
from .extractor import Finding, ProjectInfo, SEVERITY_LEVELS, StructuredReport

logger = logging.getLogger(__name__)

_ADDRESS_RE = re.compile(r"^0x[0-9a-fA-F]{40}$")
_PRAGMA_RE = re.compile(r"pragma\s+solidity\s+([^;]+);")

DEFAULT_SOURCE_EXTENSIONS = (".sol",)

DEFAULT_EXPLORERS: dict[str, dict[str, str]] = {
    "ethereum": {"base_url": "https://api.etherscan.io/api", "api_key_env": "ETHERSCAN_API_KEY"},
    "bsc": {"base_url": "https://api.bscscan.com/api", "api_key_env": "BSCSCAN_API_KEY"},
    "polygon": {"base_url": "https://api.polygonscan.com/api", "api_key_env": "POLYGONSCAN_API_KEY"},
    "arbitrum": {"base_url": "https://api.arbiscan.io/api", "api_key_env": "ARBISCAN_API_KEY"},
    "avalanche": {"base_url": "https://api.snowtrace.io/api", "api_key_env": "SNOWTRACE_API_KEY"},
}


@dataclass
class SourceBundle:
    origin: str  # "repository" | "onchain"
    identifier: str
    files: list[tuple[str, str]]
    retrieved_at: str = ""


@dataclass
class DatasetRecord:
    path: str
    project_info: ProjectInfo
    findings: list[Finding] = field(default_factory=list)


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def validate_address(s: object) -> bool:
    """True iff ``s`` is 0x followed by exactly 40 hex characters."""
    return isinstance(s, str) and bool(_ADDRESS_RE.match(s))


def sanitize_relpath(path: str) -> str | None:
    """Normalize a bundle path to a safe relative form inside the output tree.

    Backslashes become slashes, absolute prefixes are stripped, and ``..``
    segments pop like a path stack (never escaping the root). Returns None
    when nothing remains.
    """
    parts: list[str] = []
    for part in str(path).replace("\\", "/").split("/"):
        if part in ("", "."):
            continue
        if part == "..":
            if parts:
                parts.pop()
            continue
        parts.append(part)
    return "/".join(parts) or None


class GitRepoClient:
    """Fetches a repository tree at an exact commit (clone + checkout).

    ``url_rewrites`` maps canonical URLs to alternates (mirrors, local paths)
    used for the actual clone while records keep the canonical form.
    """

    def __init__(
        self,
        extensions: tuple[str, ...] = DEFAULT_SOURCE_EXTENSIONS,
        timeout: float = 300.0,
        retries: int = 2,
        url_rewrites: dict[str, str] | None = None,
        sleep=time.sleep,
    ):
        self._extensions = tuple(e.lower() for e in extensions)
        self._timeout = timeout
        self._retries = max(0, retries)
        self._url_rewrites = dict(url_rewrites or {})
        self._sleep = sleep

    def fetch(self, url: str, commit_id: str) -> SourceBundle:
        if not url:
            raise ValueError("repository url required")
        if not commit_id:
            raise ValueError("commit_id required")
        clone_url = self._url_rewrites.get(url, url)
        workdir = tempfile.mkdtemp(prefix="auditminer-repo-")
        try:
            self._clone(clone_url, workdir)
            checkout = subprocess.run(
                ["git", "-C", workdir, "checkout", "--quiet", "--detach", commit_id],
                capture_output=True, timeout=self._timeout,
            )
            if checkout.returncode != 0:
                raise CommitNotFoundError(
                    f"{url}: commit {commit_id!r} not found: "
                    f"{checkout.stderr.decode('utf-8', 'replace').strip()}"
                )
            files = self._collect(Path(workdir))
            if not files:
                raise EmptyBundleError(
                    f"{url}@{commit_id}: no files matched extensions {self._extensions}"
                )
            return SourceBundle(
                origin="repository",
                identifier=f"{url}@{commit_id}",
                files=files,
                retrieved_at=_now_iso(),
            )
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    def _clone(self, url: str, workdir: str) -> None:
        last_stderr = ""
        for attempt in range(self._retries + 1):
            proc = subprocess.run(
                ["git", "clone", "--quiet", url, workdir],
                capture_output=True, timeout=self._timeout,
            )
            if proc.returncode == 0:
                return
            last_stderr = proc.stderr.decode("utf-8", "replace").strip()
            shutil.rmtree(workdir, ignore_errors=True)
            os.makedirs(workdir, exist_ok=True)
            if attempt < self._retries:
                self._sleep(0.5 * 2 ** attempt)
        raise TransportError(f"git clone failed for {url}: {last_stderr}")

    def _collect(self, root: Path) -> list[tuple[str, str]]:
        files = []
        for path in sorted(root.rglob("*")):
            if not path.is_file():
                continue
            rel = path.relative_to(root).as_posix()
            if rel.startswith(".git/") or rel == ".git":
                continue
            if path.suffix.lower() not in self._extensions:
                continue
            files.append((rel, path.read_text(encoding="utf-8", errors="replace")))
        return files


def fetch_repo(url: str, commit_id: str, client: GitRepoClient) -> SourceBundle:
    """Retrieve the repository tree at exactly ``commit_id``."""
    return client.fetch(url, commit_id)


class ExplorerClient:
    """Speaks the Etherscan-compatible getsourcecode convention per chain.

    Requests to the same host are paced at least ``min_interval_seconds``
    apart (free explorer tiers throttle hard above ~5 req/s).
    """

    def __init__(
        self,
        chains: dict[str, dict[str, str]] | None = None,
        session=None,
        retries: int = 2,
        timeout: float = 30.0,
        min_interval_seconds: float = 0.2,
        sleep=time.sleep,
        env=os.environ,
    ):
        self._chains = {k.lower(): v for k, v in (chains or DEFAULT_EXPLORERS).items()}
        self._session = session or requests.Session()
        self._retries = max(0, retries)
        self._timeout = timeout
        self._min_interval = max(0.0, min_interval_seconds)
        self._sleep = sleep
        self._env = env
        self._lock = threading.Lock()
        self._last_request: dict[str, float] = {}

    def fetch(self, address: str, chain: str) -> SourceBundle:
        if not validate_address(address):
            raise ValueError(f"invalid on-chain address: {address!r}")
        chain_cfg = self._chains.get((chain or "").lower())
        if chain_cfg is None:
            raise UnsupportedChainError(f"no explorer configured for chain {chain!r}")
        params = {
            "module": "contract",
            "action": "getsourcecode",
            "address": address,
            "apikey": self._env.get(chain_cfg.get("api_key_env", ""), ""),
        }
        data = self._get(chain_cfg["base_url"], params)
        result = data.get("result")
        entry = result[0] if isinstance(result, list) and result else None
        source = (entry or {}).get("SourceCode") or ""
        if data.get("status") != "1" or not source:
            raise NoSourceError(f"{chain}:{address}: no verified source available")
        name = (entry or {}).get("ContractName") or "Contract"
        return SourceBundle(
            origin="onchain",
            identifier=f"{chain}:{address}",
            files=_unpack_verified_source(source, name),
            retrieved_at=_now_iso(),
        )

    def _pace(self, url: str) -> None:
        if self._min_interval <= 0:
            return
        host = url.split("/")[2] if "//" in url else url
        with self._lock:
            now = time.monotonic()
            wait = self._min_interval - (now - self._last_request.get(host, -self._min_interval))
            if wait > 0:
                self._sleep(wait)
            self._last_request[host] = time.monotonic()

    def _get(self, url: str, params: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            self._pace(url)
            try:
                response = self._session.get(url, params=params, timeout=self._timeout)
            except requests.RequestException as exc:
                last_error = exc
            else:
                if response.status_code == 200:
                    try:
                        return response.json()
                    except ValueError as exc:
                        raise TransportError(f"{url}: non-JSON explorer response: {exc}") from exc
                last_error = Exception(f"status {response.status_code}")
                if response.status_code not in (429, 500, 502, 503, 504):
                    break
            if attempt < self._retries:
                self._sleep(0.5 * 2 ** attempt)
        raise TransportError(f"explorer request failed: {last_error}")


def _unpack_verified_source(source: str, contract_name: str) -> list[tuple[str, str]]:
    """Multi-file verified blobs become individual files; flat sources get one."""
    text = source.strip()
    if text.startswith("{{") and text.endswith("}}"):  # doubly-wrapped standard JSON input
        text = text[1:-1]
    if text.startswith("{"):
        try:
            obj = json.loads(text)
        except ValueError:
            obj = None
        if isinstance(obj, dict):
            sources = obj.get("sources", obj)
            if isinstance(sources, dict):
                files = []
                for raw_path, entry in sources.items():
                    if not (isinstance(entry, dict) and isinstance(entry.get("content"), str)):
                        continue
                    safe = sanitize_relpath(raw_path)
                    if safe:
                        files.append((safe, entry["content"]))
                if files:
                    return files
    return [(f"{contract_name}.sol", source)]


def fetch_onchain(address: str, chain: str, client: ExplorerClient) -> SourceBundle:
    """Retrieve verified source for ``address`` from the chain's explorer."""
    return client.fetch(address, chain)


def derive_compiler_version(bundle: SourceBundle) -> str | None:
    """Most frequent pragma directive across bundle files; ties pick the
    lexicographically greatest version expression."""
    counts: Counter[str] = Counter()
    for _, content in bundle.files:
        for raw in _PRAGMA_RE.findall(content):
            counts[" ".join(raw.split())] += 1
    if not counts:
        return None
    return max(counts.items(), key=lambda kv: (kv[1], kv[0]))[0]


def assemble_record(
    report_path: str,
    report: StructuredReport,
    paths: dict[int, ClassificationPath],
    bundle: SourceBundle,
) -> DatasetRecord:
    """Combine extraction, classification, and fetched sources into one record."""
    missing = [f.id for f in report.findings if f.id not in paths]
    if missing:
        raise AssemblyError(f"classification paths missing for finding id(s): {missing}")

    file_paths: list[str] = []
    for rel, _ in bundle.files:
        safe = sanitize_relpath(rel)
        if safe and safe not in file_paths:
            file_paths.append(safe)

    info = ProjectInfo(
        url=report.project_info.url,
        commit_id=report.project_info.commit_id,
        address=report.project_info.address,
        chain=report.project_info.chain,
        compiler_version=derive_compiler_version(bundle) or report.project_info.compiler_version,
        file_paths=file_paths,
    )

    findings = []
    seen_ids: set[int] = set()
    for f in report.findings:
        if not f.title:
            raise AssemblyError(f"finding {f.id}: empty title")
        if f.severity not in SEVERITY_LEVELS:
            raise AssemblyError(f"finding {f.id}: invalid severity {f.severity!r}")
        if f.id in seen_ids:
            raise AssemblyError(f"duplicate finding id {f.id}")
        seen_ids.add(f.id)
        findings.append(Finding(
            id=f.id,
            title=f.title,
            description=f.description,
            severity=f.severity,
            location=f.location,
            category=paths[f.id],
        ))
    return DatasetRecord(path=report_path, project_info=info, findings=findings)


def record_to_dict(record: DatasetRecord) -> dict:
    findings = []
    for f in record.findings:
        path = f.category
        classified = (
            path is not None
            and path.terminal in (TERMINAL_LEAF, TERMINAL_FALLBACK)
            and path.steps
        )
        findings.append({
            "id": f.id,
            "category": f.category.ids() if classified else None,
            "terminal": path.terminal if path is not None else TERMINAL_UNRESOLVED,
            "title": f.title,
            "description": f.description,
            "severity": f.severity,
            "location": f.location,
        })
    return {
        "path": record.path,
        "project_info": {
            "url": record.project_info.url,
            "commit_id": record.project_info.commit_id,
            "address": record.project_info.address,
            "chain": record.project_info.chain,
            "compiler_version": record.project_info.compiler_version,
            "file_paths": list(record.project_info.file_paths),
        },
        "findings": findings,
    }


def record_from_dict(data: dict) -> DatasetRecord:
    """Inverse of record_to_dict for chain-style (single selection) paths."""
    info = data.get("project_info") or {}
    findings = []
    for f in data.get("findings", []):
        category = f.get("category")
        terminal = f.get("terminal", TERMINAL_UNRESOLVED)
        if category:
            path = ClassificationPath(
                steps=[(level, [nid]) for level, nid in enumerate(category)],
                terminal=terminal,
            )
        else:
            path = ClassificationPath(steps=[], terminal=terminal)
        findings.append(Finding(
            id=f["id"],
            title=f["title"],
            description=f.get("description", ""),
            severity=f.get("severity", "info"),
            location=f.get("location", ""),
            category=path,
        ))
    return DatasetRecord(
        path=data.get("path", ""),
        project_info=ProjectInfo(
            url=info.get("url", ""),
            commit_id=info.get("commit_id", ""),
            address=info.get("address", ""),
            chain=info.get("chain", ""),
            compiler_version=info.get("compiler_version"),
            file_paths=list(info.get("file_paths", [])),
        ),
        findings=findings,
    )


def read_record(path: str | Path) -> DatasetRecord:
    return record_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except OSError:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_record(
    record: DatasetRecord,
    out_dir: str | Path,
    bundle: SourceBundle | None = None,
    force: bool = False,
) -> Path:
    """Persist ``<out_dir>/<report-stem>/record.json`` plus the sources tree.

    Writes are atomic (temp file + rename) and deterministic: identical
    inputs produce byte-identical output. An existing record raises
    RecordConflictError unless ``force`` is set. Bundle paths are sanitized
    and verified to stay inside the record directory.
    """
    out = Path(out_dir)
    stem = Path(record.path).stem or "record"
    record_dir = out / stem
    record_path = record_dir / "record.json"
    if record_path.exists() and not force:
        raise RecordConflictError(f"{record_path} exists; pass force to overwrite")

    payload = json.dumps(record_to_dict(record), ensure_ascii=False, indent=2) + "\n"
    try:
        _atomic_write(record_path, payload)
        if bundle is not None:
            sources_dir = record_dir / "sources"
            if sources_dir.exists() and force:
                shutil.rmtree(sources_dir)
            resolved_root = sources_dir.resolve()
            for raw_path, content in bundle.files:
                safe = sanitize_relpath(raw_path)
                if not safe:
                    logger.warning("bundle path %r sanitized away, skipped", raw_path)
                    continue
                dest = sources_dir / safe
                resolved = dest.resolve()
                if resolved != resolved_root and resolved_root not in resolved.parents:
                    logger.warning("bundle path %r escapes output dir, skipped", raw_path)
                    continue
                _atomic_write(dest, content)
    except OSError as exc:
        raise RecordWriteError(f"failed writing {record_path}: {exc}") from exc
    return record_path
