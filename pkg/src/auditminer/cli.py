"""Command-line surface: whole-pipeline builds and resumable single stages.

Configuration precedence is flags > environment > config file > defaults.
Failures are isolated per report: one bad input never aborts a batch.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import figures
from .analysis import (
    ConfusionCounts,
    SeverityMapping,
    avg_cvss_by_category,
    krippendorff_alpha,
    macro_average,
    prf1,
    treemap_export,
)
from .classifier import (
    ClassificationPath,
    ClassifierConfig,
    TERMINAL_UNRESOLVED,
    classify,
    path_from_dict,
    path_to_dict,
)
from .errors import (
    AuditMinerError,
    ClassificationError,
    ConfigError,
    FetchError,
    StageDependencyError,
    UsageError,
)
from .extractor import (
    ExtractorConfig,
    StructuredReport,
    extract_report,
    report_from_dict,
    report_to_dict,
)
from .fetcher import (
    DEFAULT_EXPLORERS,
    ExplorerClient,
    GitRepoClient,
    SourceBundle,
    assemble_record,
    read_record,
    write_record,
)
from .ingest import Chunk, ConverterConfig, TokenizerConfig, chunk as chunk_segments
from .ingest import load_document, segment
from .llm import HttpProvider, Provider, ProviderConfig, ScriptedProvider
from .taxonomy import CweTree, load_taxonomy, prune_hardware

logger = logging.getLogger(__name__)

STAGES = ("chunk", "extract", "classify", "fetch", "analyze", "alpha", "metrics")

_ENV_PREFIX = "AUDITMINER_"


@dataclass
class PipelineConfig:
    chunk_length: int = 4096
    k: int = 1
    temperature: float = 0.8
    model_name: str = ""
    provider: str = "mock"  # "mock" | "http"
    endpoint: str = ""
    api_key_env: str = "AUDITMINER_API_KEY"
    mock_script: str = ""
    taxonomy: str = ""
    hardware_list: str = ""
    mapping_notes: str = ""
    work: str = "work"
    out: str = "out"
    parallel: int = 1
    extensions: tuple[str, ...] = (".sol",)
    converter: str = ""
    retry_limit: int = 3
    request_timeout: float = 60.0
    repo_url_rewrites: dict[str, str] = field(default_factory=dict)
    explorer_chains: dict[str, dict[str, str]] = field(default_factory=lambda: dict(DEFAULT_EXPLORERS))
    figures: bool = True
    force: bool = False

    def validate(self) -> None:
        if self.chunk_length < 1:
            raise ConfigError(f"chunk_length must be >= 1, got {self.chunk_length}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.parallel < 1:
            raise ConfigError(f"parallel must be >= 1, got {self.parallel}")
        if self.provider not in ("mock", "http"):
            raise ConfigError(f"unknown provider kind: {self.provider!r}")

    @property
    def work_dir(self) -> Path:
        return Path(self.work)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


_ENV_FIELDS = {
    "chunk_length": int,
    "k": int,
    "temperature": float,
    "model_name": str,
    "provider": str,
    "endpoint": str,
    "mock_script": str,
    "taxonomy": str,
    "hardware_list": str,
    "mapping_notes": str,
    "work": str,
    "out": str,
    "parallel": int,
    "converter": str,
    "retry_limit": int,
    "request_timeout": float,
}


def load_config(args: argparse.Namespace | None = None, env=os.environ) -> PipelineConfig:
    """Resolve configuration: CLI flags > env vars > config file > defaults."""
    values: dict = {}

    config_path = getattr(args, "config", None) or env.get(_ENV_PREFIX + "CONFIG")
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"config file {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {config_path}: expected a JSON object")
        known = {f.name for f in fields(PipelineConfig)}
        unknown = sorted(set(loaded) - known)
        if unknown:
            raise ConfigError(f"config file {config_path}: unknown keys {unknown}")
        values.update(loaded)

    for name, cast in _ENV_FIELDS.items():
        raw = env.get(_ENV_PREFIX + name.upper())
        if raw is not None:
            try:
                values[name] = cast(raw)
            except ValueError as exc:
                raise ConfigError(f"env {_ENV_PREFIX + name.upper()}: {exc}") from exc

    if args is not None:
        for f in fields(PipelineConfig):
            flag_value = getattr(args, f.name, None)
            if flag_value is not None:
                values[f.name] = flag_value

    if "extensions" in values and not isinstance(values["extensions"], tuple):
        raw_ext = values["extensions"]
        parts = raw_ext.split(",") if isinstance(raw_ext, str) else list(raw_ext)
        values["extensions"] = tuple(
            e if e.startswith(".") else "." + e for e in (p.strip() for p in parts) if e
        )

    try:
        config = PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config


def make_provider(config: PipelineConfig) -> Provider:
    if config.provider == "mock":
        if not config.mock_script:
            raise ConfigError("mock provider requires --mock-script")
        return ScriptedProvider.from_file(config.mock_script)
    if not config.endpoint:
        raise ConfigError("http provider requires --endpoint")
    return HttpProvider(ProviderConfig(
        endpoint=config.endpoint,
        api_key=os.environ.get(config.api_key_env, ""),
        retry_limit=config.retry_limit,
        request_timeout=config.request_timeout,
    ))


def load_tree(config: PipelineConfig) -> CweTree:
    if not config.taxonomy:
        raise ConfigError("a taxonomy file is required (--taxonomy)")
    notes = None
    if config.mapping_notes:
        notes = json.loads(Path(config.mapping_notes).read_text(encoding="utf-8"))
    tree = load_taxonomy(config.taxonomy, mapping_notes=notes)
    if config.hardware_list:
        hardware = json.loads(Path(config.hardware_list).read_text(encoding="utf-8"))
        tree = prune_hardware(tree, hardware)
    return tree


def _extractor_config(config: PipelineConfig, report: Path) -> ExtractorConfig:
    return ExtractorConfig(
        chunk_length=config.chunk_length,
        parallelism=config.parallel,
        work_dir=config.work_dir / report.stem,
        resume=config.provider != "mock",
        temperature=config.temperature,
        model_name=config.model_name,
    )


def _classifier_config(config: PipelineConfig) -> ClassifierConfig:
    return ClassifierConfig(
        k=config.k,
        temperature=config.temperature,
        model_name=config.model_name,
    )


# -- work-directory artifact formats ----------------------------------------

def _work_path(config: PipelineConfig, report: Path, name: str) -> Path:
    return config.work_dir / report.stem / name


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def _chunks_to_json(source: Path, chunks: list[Chunk], config: PipelineConfig) -> dict:
    return {
        "source": str(source),
        "chunk_length": config.chunk_length,
        "chunks": [
            {
                "index": c.index,
                "text": c.text,
                "token_count": c.token_count,
                "heading_path": c.heading_path,
            }
            for c in chunks
        ],
    }


def _chunks_from_json(data: dict) -> list[Chunk]:
    return [
        Chunk(
            index=c["index"],
            text=c["text"],
            token_count=c["token_count"],
            heading_path=list(c.get("heading_path", [])),
        )
        for c in data.get("chunks", [])
    ]


def _require_artifacts(paths: list[Path]) -> None:
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise StageDependencyError(
            f"missing stage artifact(s): {', '.join(missing)}", missing=missing
        )


# -- pipeline phases ---------------------------------------------------------

def _phase_chunk(report: Path, config: PipelineConfig) -> list[Chunk]:
    converter = ConverterConfig(command=config.converter) if config.converter else None
    text = load_document(report, converter=converter)
    chunks = chunk_segments(segment(text), config.chunk_length, TokenizerConfig())
    _write_json(_work_path(config, report, "chunks.json"),
                _chunks_to_json(report, chunks, config))
    return chunks


def _phase_extract(report: Path, chunks: list[Chunk], provider: Provider,
                   config: PipelineConfig) -> StructuredReport:
    result = extract_report(chunks, provider, _extractor_config(config, report))
    _write_json(_work_path(config, report, "report.json"), report_to_dict(result))
    return result


def _phase_classify(report: Path, structured: StructuredReport, tree: CweTree,
                    provider: Provider, config: PipelineConfig) -> dict[int, ClassificationPath]:
    paths: dict[int, ClassificationPath] = {}
    trace: list[dict] = []
    errors = 0
    for finding in sorted(structured.findings, key=lambda f: f.id):
        finding_trace: list[dict] = []
        try:
            paths[finding.id] = classify(finding, tree, provider,
                                         _classifier_config(config), trace=finding_trace)
        except ClassificationError as exc:
            logger.warning("classification failed for finding %d: %s", finding.id, exc)
            paths[finding.id] = ClassificationPath(steps=[], terminal=TERMINAL_UNRESOLVED)
            errors += 1
        finally:
            for entry in finding_trace:
                trace.append({"finding": finding.id, **entry})
    _write_json(_work_path(config, report, "classified.json"),
                {"paths": {str(fid): path_to_dict(p) for fid, p in paths.items()},
                 "errors": errors})
    trace_path = _work_path(config, report, "trace.jsonl")
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    with trace_path.open("w", encoding="utf-8") as handle:
        for entry in trace:
            handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
    return paths


def _fetch_sources(
    structured: StructuredReport,
    config: PipelineConfig,
    repo_client: GitRepoClient | None = None,
    explorer_client: ExplorerClient | None = None,
) -> SourceBundle:
    """Repository first (richer layout); verified on-chain source as fallback."""
    info = structured.project_info
    repo_error: Exception | None = None
    if info.url and info.commit_id:
        client = repo_client or GitRepoClient(extensions=config.extensions,
                                              url_rewrites=config.repo_url_rewrites)
        try:
            return client.fetch(info.url, info.commit_id)
        except FetchError as exc:
            repo_error = exc
            logger.warning("repository fetch failed (%s), trying explorer", exc)
    if info.address and info.chain:
        explorer = explorer_client or ExplorerClient(chains=config.explorer_chains)
        return explorer.fetch(info.address, info.chain)
    if repo_error is not None:
        raise repo_error
    raise FetchError("no usable source identifier (need url+commit or address+chain)")


def _phase_fetch(report: Path, structured: StructuredReport,
                 paths: dict[int, ClassificationPath], config: PipelineConfig) -> Path:
    bundle = _fetch_sources(structured, config)
    record = assemble_record(str(report), structured, paths, bundle)
    return write_record(record, config.out_dir, bundle=bundle, force=config.force)


# -- build command -----------------------------------------------------------

@dataclass
class BuildSummary:
    ok: int = 0
    failed: int = 0
    stage_errors: Counter = field(default_factory=Counter)
    records: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "failed": self.failed,
            "stage_errors": dict(self.stage_errors),
            "records": list(self.records),
        }


class _StageFailure(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def _build_one(report: Path, config: PipelineConfig, tree: CweTree,
               provider: Provider) -> Path:
    try:
        chunks = _phase_chunk(report, config)
    except AuditMinerError as exc:
        raise _StageFailure("chunk", exc) from exc
    try:
        structured = _phase_extract(report, chunks, provider, config)
    except AuditMinerError as exc:
        raise _StageFailure("extract", exc) from exc
    paths = _phase_classify(report, structured, tree, provider, config)
    try:
        return _phase_fetch(report, structured, paths, config)
    except AuditMinerError as exc:
        raise _StageFailure("fetch", exc) from exc


def run_build(reports: list[str | Path], config: PipelineConfig,
              provider: Provider | None = None) -> BuildSummary:
    """Run the whole pipeline over each report, isolating per-report failures."""
    if not reports:
        raise UsageError("no input reports given")
    config.validate()
    tree = load_tree(config)
    shared_provider = provider if provider is not None else make_provider(config)
    summary = BuildSummary()

    def build(path_like) -> tuple[str, Path | None, _StageFailure | None]:
        report = Path(path_like)
        try:
            return str(path_like), _build_one(report, config, tree, shared_provider), None
        except _StageFailure as failure:
            return str(path_like), None, failure
        except Exception as exc:  # one bad report must not kill the batch
            logger.exception("unexpected failure for %s", path_like)
            return str(path_like), None, _StageFailure("internal", exc)

    if config.parallel > 1:
        with ThreadPoolExecutor(max_workers=config.parallel) as pool:
            results = list(pool.map(build, reports))
    else:
        results = [build(r) for r in reports]

    for name, record_path, failure in results:
        if failure is None:
            summary.ok += 1
            summary.records.append(str(record_path))
        else:
            summary.failed += 1
            summary.stage_errors[failure.stage] += 1
            logger.error("report %s failed at %s: %s", name, failure.stage, failure.cause)
    return summary


# -- single stages -----------------------------------------------------------

def run_stage(stage: str, inputs: list[str | Path], config: PipelineConfig,
              provider: Provider | None = None) -> list[Path]:
    """Run exactly one phase over the work-directory artifact formats."""
    if stage not in STAGES:
        raise UsageError(f"unknown stage {stage!r}; expected one of {STAGES}")
    config.validate()
    handler = {
        "chunk": _stage_chunk,
        "extract": _stage_extract,
        "classify": _stage_classify,
        "fetch": _stage_fetch,
        "analyze": _stage_analyze,
        "alpha": _stage_alpha,
        "metrics": _stage_metrics,
    }[stage]
    return handler(inputs, config, provider)


def _stage_chunk(inputs, config, provider=None) -> list[Path]:
    if not inputs:
        raise UsageError("chunk stage needs report files")
    out = []
    for path_like in inputs:
        report = Path(path_like)
        _phase_chunk(report, config)
        out.append(_work_path(config, report, "chunks.json"))
    return out


def _stage_extract(inputs, config, provider=None) -> list[Path]:
    if not inputs:
        raise UsageError("extract stage needs report files")
    provider = provider or make_provider(config)
    out = []
    for path_like in inputs:
        report = Path(path_like)
        chunks_path = _work_path(config, report, "chunks.json")
        _require_artifacts([chunks_path])
        chunks = _chunks_from_json(json.loads(chunks_path.read_text(encoding="utf-8")))
        _phase_extract(report, chunks, provider, config)
        out.append(_work_path(config, report, "report.json"))
    return out


def _stage_classify(inputs, config, provider=None) -> list[Path]:
    if not inputs:
        raise UsageError("classify stage needs report files")
    provider = provider or make_provider(config)
    tree = load_tree(config)
    out = []
    for path_like in inputs:
        report = Path(path_like)
        report_path = _work_path(config, report, "report.json")
        _require_artifacts([report_path])
        structured = report_from_dict(json.loads(report_path.read_text(encoding="utf-8")))
        _phase_classify(report, structured, tree, provider, config)
        out.append(_work_path(config, report, "classified.json"))
    return out


def _stage_fetch(inputs, config, provider=None) -> list[Path]:
    if not inputs:
        raise UsageError("fetch stage needs report files")
    out = []
    for path_like in inputs:
        report = Path(path_like)
        report_path = _work_path(config, report, "report.json")
        classified_path = _work_path(config, report, "classified.json")
        _require_artifacts([report_path, classified_path])
        structured = report_from_dict(json.loads(report_path.read_text(encoding="utf-8")))
        classified = json.loads(classified_path.read_text(encoding="utf-8"))
        paths = {int(fid): path_from_dict(p) for fid, p in classified.get("paths", {}).items()}
        out.append(_phase_fetch(report, structured, paths, config))
    return out


def _stage_analyze(inputs, config, provider=None) -> list[Path]:
    records_dir = Path(inputs[0]) if inputs else config.out_dir
    record_files = sorted(records_dir.glob("*/record.json"))
    if not record_files:
        raise StageDependencyError(
            f"no record.json files under {records_dir}", missing=[str(records_dir)]
        )
    records = [read_record(p) for p in record_files]
    stats = avg_cvss_by_category(records, SeverityMapping())

    records_out = config.out_dir
    records_out.mkdir(parents=True, exist_ok=True)
    written = []

    stats_path = records_out / "stats.csv"
    with stats_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["cwe_id", "frequency", "mean_cvss"])
        for s in stats:
            writer.writerow([s.cwe_id, s.frequency, f"{s.mean_cvss:.4f}"])
    written.append(stats_path)

    if config.taxonomy:
        tree = load_tree(config)
        treemap = treemap_export(stats, tree)
        treemap_path = records_out / "treemap.json"
        _write_json(treemap_path, treemap)
        written.append(treemap_path)
        if config.figures:
            written.append(figures.render_treemap(treemap, records_out / "treemap.png"))
    else:
        logger.warning("no taxonomy configured; treemap export skipped")
    if config.figures:
        written.append(figures.render_severity_frequency(
            stats, records_out / "severity_frequency.png"))
    return written


def _stage_alpha(inputs, config, provider=None) -> list[Path]:
    if not inputs:
        raise UsageError("alpha stage needs a two-column label CSV or JSON file")
    source = Path(inputs[0])
    labels_a: list[str] = []
    labels_b: list[str] = []
    if source.suffix.lower() == ".json":
        data = _read_json_input(source)
        if isinstance(data, dict):
            labels_a = [str(v) for v in data.get("labels_a", [])]
            labels_b = [str(v) for v in data.get("labels_b", [])]
        else:
            for pair in data:
                labels_a.append(str(pair[0]))
                labels_b.append(str(pair[1]))
    else:
        for row in _read_csv_rows(source):
            if len(row) < 2:
                raise UsageError(f"label CSV rows need two columns, got {row!r}")
            labels_a.append(row[0].strip())
            labels_b.append(row[1].strip())
    alpha = krippendorff_alpha(labels_a, labels_b)
    print(f"alpha={alpha:.4f}")
    out_path = config.out_dir / "alpha.json"
    _write_json(out_path, {"alpha": alpha, "items": len(labels_a)})
    return [out_path]


def _stage_metrics(inputs, config, provider=None) -> list[Path]:
    if not inputs:
        raise UsageError("metrics stage needs confusion counts (tool,tp,fp,fn as CSV or JSON)")
    source = Path(inputs[0])
    rows: list[tuple[str, tuple[float, float, float], ConfusionCounts]] = []
    if source.suffix.lower() == ".json":
        for entry in _read_json_input(source):
            counts = ConfusionCounts(tp=int(entry["tp"]), fp=int(entry["fp"]),
                                     fn=int(entry["fn"]))
            rows.append((str(entry.get("tool", f"tool{len(rows)}")), prf1(counts), counts))
    else:
        for row in _read_csv_rows(source, header=("tool", "tp", "fp", "fn")):
            counts = ConfusionCounts(tp=int(row[1]), fp=int(row[2]), fn=int(row[3]))
            rows.append((row[0], prf1(counts), counts))

    print(f"{'Tool':<16}{'TP':>8}{'FP':>8}{'FN':>8}{'P(%)':>8}{'R(%)':>8}{'F1(%)':>8}")
    for name, (precision, recall, f1), counts in rows:
        print(f"{name:<16}{counts.tp:>8}{counts.fp:>8}{counts.fn:>8}"
              f"{precision:>8.2f}{recall:>8.2f}{f1:>8.2f}")
    if rows:
        avg = macro_average([metrics for _, metrics, _ in rows])
        print(f"{'Average':<16}{'':>24}{avg[0]:>8.2f}{avg[1]:>8.2f}{avg[2]:>8.2f}")

    out_dir = config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    with metrics_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["tool", "tp", "fp", "fn", "precision", "recall", "f1"])
        for name, (precision, recall, f1), counts in rows:
            writer.writerow([name, counts.tp, counts.fp, counts.fn,
                             f"{precision:.2f}", f"{recall:.2f}", f"{f1:.2f}"])
    written = [metrics_path]
    if config.figures and rows:
        written.append(figures.render_tool_f1(
            [(name, metrics) for name, metrics, _ in rows], out_dir / "tool_f1.png"))
    return written


def _read_csv_rows(path: Path, header: tuple[str, ...] | None = None) -> list[list[str]]:
    if not path.is_file():
        raise StageDependencyError(f"missing input file: {path}", missing=[str(path)])
    with path.open("r", encoding="utf-8", newline="") as handle:
        rows = [row for row in csv.reader(handle) if row and any(cell.strip() for cell in row)]
    if header and rows and [c.strip().lower() for c in rows[0][: len(header)]] == list(header):
        rows = rows[1:]
    return rows


def _read_json_input(path: Path):
    if not path.is_file():
        raise StageDependencyError(f"missing input file: {path}", missing=[str(path)])
    return json.loads(path.read_text(encoding="utf-8"))


# -- argparse ----------------------------------------------------------------

def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--chunk-length", dest="chunk_length", type=int, default=None)
    parser.add_argument("--k", type=int, default=None, help="children selected per level")
    parser.add_argument("--temperature", type=float, default=None)
    parser.add_argument("--model", dest="model_name", default=None)
    parser.add_argument("--provider", choices=("mock", "http"), default=None)
    parser.add_argument("--endpoint", default=None, help="chat-completions endpoint URL")
    parser.add_argument("--mock-script", dest="mock_script", default=None,
                        help="JSON array of canned responses for the mock provider")
    parser.add_argument("--taxonomy", default=None, help="taxonomy JSON file")
    parser.add_argument("--hardware-list", dest="hardware_list", default=None,
                        help="JSON array of hardware CWE ids to prune")
    parser.add_argument("--mapping-notes", dest="mapping_notes", default=None,
                        help="JSON map of CWE id to mapping-allowed flag")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--work", default=None, help="work directory for intermediates")
    parser.add_argument("--force", action="store_const", const=True, default=None,
                        help="overwrite existing records")
    parser.add_argument("--parallel", type=int, default=None)
    parser.add_argument("--extensions", default=None,
                        help="comma-separated source extensions (default .sol)")
    parser.add_argument("--converter", default=None,
                        help="shell template with {input} converting binary reports")
    parser.add_argument("--no-figures", dest="figures", action="store_const",
                        const=False, default=None, help="skip figure rendering")
    parser.add_argument("--verbose", action="store_true")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auditminer",
        description="Build a CWE-labeled vulnerability dataset from audit reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    build = sub.add_parser("build", help="run the whole pipeline over reports")
    build.add_argument("reports", nargs="*", help="audit report files")
    _add_common_flags(build)

    for stage in STAGES:
        stage_parser = sub.add_parser(stage, help=f"run only the {stage} stage")
        stage_parser.add_argument("inputs", nargs="*",
                                  help="stage inputs (reports, records dir, or CSV)")
        _add_common_flags(stage_parser)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args)
        if args.command == "build":
            summary = run_build(list(args.reports), config)
            print(json.dumps(summary.to_dict(), indent=2))
            return 0 if summary.ok >= 1 else 1
        outputs = run_stage(args.command, list(args.inputs), config)
        for path in outputs:
            print(path)
        return 0
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AuditMinerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
