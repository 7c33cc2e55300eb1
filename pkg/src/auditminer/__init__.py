"""auditminer: turn smart-contract audit reports into a CWE-labeled dataset."""

from .analysis import (
    ConfusionCounts,
    SeverityMapping,
    avg_cvss_by_category,
    krippendorff_alpha,
    macro_average,
    prf1,
    treemap_export,
)
from .classifier import ClassificationPath, ClassifierConfig, classify
from .extractor import (
    ExtractorConfig,
    Finding,
    ProjectInfo,
    StructuredReport,
    dedup_findings,
    extract_report,
    map_chunk,
    merge,
    reduce_group,
)
from .fetcher import (
    DatasetRecord,
    ExplorerClient,
    GitRepoClient,
    SourceBundle,
    assemble_record,
    fetch_onchain,
    fetch_repo,
    read_record,
    validate_address,
    write_record,
)
from .ingest import Chunk, Segment, TokenizerConfig, chunk, count_tokens, load_document, segment
from .llm import (
    CompletionRequest,
    HttpProvider,
    ProviderConfig,
    ScriptedProvider,
    complete,
    extract_json,
)
from .taxonomy import CweNode, CweTree, children, load_taxonomy, prune_hardware, validate_path

__version__ = "0.1.0"

__all__ = [
    "ConfusionCounts", "SeverityMapping", "avg_cvss_by_category",
    "krippendorff_alpha", "macro_average", "prf1", "treemap_export",
    "ClassificationPath", "ClassifierConfig", "classify",
    "ExtractorConfig", "Finding", "ProjectInfo", "StructuredReport",
    "dedup_findings", "extract_report", "map_chunk", "merge", "reduce_group",
    "DatasetRecord", "ExplorerClient", "GitRepoClient", "SourceBundle",
    "assemble_record", "fetch_onchain", "fetch_repo", "read_record",
    "validate_address", "write_record",
    "Chunk", "Segment", "TokenizerConfig", "chunk", "count_tokens",
    "load_document", "segment",
    "CompletionRequest", "HttpProvider", "ProviderConfig", "ScriptedProvider",
    "complete", "extract_json",
    "CweNode", "CweTree", "children", "load_taxonomy", "prune_hardware",
    "validate_path",
    "__version__",
]
