"""Load audit reports and split them into token-bounded, coherent chunks.

Splitting happens along the document's own structure: headings first, then
blank-line paragraph breaks. Oversized pieces are divided recursively at
paragraph, sentence, and finally grapheme-cluster boundaries, so no chunk
ever bisects a user-perceived character.
"""
from __future__ import annotations

import math
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import regex

from .errors import ChunkConfigError, ConversionError, DocumentLoadError

DEFAULT_CHUNK_LENGTH = 4096

_TEXT_SUFFIXES = {".md", ".markdown", ".txt", ".text", ""}
_HEADING_RE = re.compile(r"^(#{1,6})\s+(\S.*?)\s*$")
_FENCE_RE = re.compile(r"^\s*(```|~~~)")

_PARA_BOUNDARY = re.compile(r"\n[ \t]*\n+")
# Sentence terminator, optional closing quotes/brackets, then whitespace.
_SENTENCE_BOUNDARY = regex.compile(
    r"(?<=[.!?…。！？])[\"'”’)\]]*\s+"
)
_GRAPHEME = regex.compile(r"\X")


@dataclass(frozen=True)
class TokenizerConfig:
    """How to count tokens; the default heuristic is ceil(characters / 4)."""

    chars_per_token: float = 4.0
    counter: Callable[[str], int] | None = None


@dataclass(frozen=True)
class ConverterConfig:
    """External command turning a binary report into markdown on stdout.

    ``command`` is a shell template with an ``{input}`` placeholder.
    """

    command: str
    timeout: float = 300.0


@dataclass
class Segment:
    heading_path: list[str]
    text: str
    order: int


@dataclass
class Chunk:
    index: int
    text: str
    token_count: int
    heading_path: list[str]


def count_tokens(text: str, tokenizer: TokenizerConfig | None = None) -> int:
    """Deterministic token count under the configured tokenizer."""
    cfg = tokenizer or TokenizerConfig()
    if cfg.counter is not None:
        return cfg.counter(text)
    if not text:
        return 0
    return math.ceil(len(text) / cfg.chars_per_token)


def load_document(path: str | Path, converter: ConverterConfig | None = None) -> str:
    """Read a report as markdown text, running the converter for binary input."""
    p = Path(path)
    if not p.is_file():
        raise DocumentLoadError(f"not a readable file: {p}")
    looks_binary = p.suffix.lower() not in _TEXT_SUFFIXES
    if converter is not None and looks_binary:
        return _convert(p, converter)
    try:
        return p.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        if converter is not None:
            return _convert(p, converter)
        raise DocumentLoadError(f"{p}: not UTF-8 text and no converter configured") from exc
    except OSError as exc:
        raise DocumentLoadError(f"{p}: {exc}") from exc


def _convert(path: Path, converter: ConverterConfig) -> str:
    command = converter.command.format(input=str(path))
    try:
        proc = subprocess.run(
            command, shell=True, capture_output=True, timeout=converter.timeout
        )
    except subprocess.TimeoutExpired as exc:
        raise ConversionError(f"converter timed out after {converter.timeout}s") from exc
    stderr = proc.stderr.decode("utf-8", "replace")
    if proc.returncode != 0:
        raise ConversionError(
            f"converter exited with status {proc.returncode}", stderr=stderr
        )
    return proc.stdout.decode("utf-8", "replace")


def segment(doc: str) -> list[Segment]:
    """Split a document at heading boundaries, then blank-line paragraph breaks.

    Each segment's text keeps the heading line that introduced it, so the
    concatenation of segment texts reproduces the source modulo whitespace
    at the boundaries. heading_path carries the title lineage.
    """
    segments: list[Segment] = []
    stack: list[tuple[int, str]] = []
    block: list[str] = []
    block_path: list[str] = []
    in_fence = False

    def flush() -> None:
        nonlocal block
        text = "\n".join(block).strip()
        if text:
            segments.append(Segment(heading_path=list(block_path), text=text,
                                    order=len(segments)))
        block = []

    for line in doc.splitlines():
        if _FENCE_RE.match(line):
            in_fence = not in_fence
            if not block:
                block_path = [title for _, title in stack]
            block.append(line)
            continue
        heading = None if in_fence else _HEADING_RE.match(line)
        if heading:
            flush()
            level = len(heading.group(1))
            while stack and stack[-1][0] >= level:
                stack.pop()
            stack.append((level, heading.group(2)))
            block_path = [title for _, title in stack]
            block.append(line)
        elif not line.strip():
            if in_fence:
                block.append(line)
            else:
                flush()
        else:
            if not block:
                block_path = [title for _, title in stack]
            block.append(line)
    flush()
    return segments


def chunk(
    segments: list[Segment],
    chunk_length: int = DEFAULT_CHUNK_LENGTH,
    tokenizer: TokenizerConfig | None = None,
) -> list[Chunk]:
    """Greedily pack segments into chunks of at most ``chunk_length`` tokens.

    A single segment over budget is split recursively (paragraph, sentence,
    grapheme boundaries). Order is preserved and no text is lost. The only
    tolerated overflow is a lone grapheme cluster that exceeds the budget by
    itself, which is emitted intact rather than bisected.
    """
    if chunk_length < 1:
        raise ChunkConfigError(f"chunk_length must be >= 1, got {chunk_length}")
    cfg = tokenizer or TokenizerConfig()

    def count(text: str) -> int:
        return count_tokens(text, cfg)

    chunks: list[Chunk] = []

    def emit(text: str, path: list[str]) -> None:
        chunks.append(Chunk(index=len(chunks), text=text, token_count=count(text),
                            heading_path=list(path)))

    buf = ""
    buf_path: list[str] = []
    for seg in segments:
        if count(seg.text) > chunk_length:
            if buf:
                emit(buf, buf_path)
                buf = ""
            for piece in _split_recursive(seg.text, chunk_length, count):
                emit(piece, seg.heading_path)
            continue
        if not buf:
            buf, buf_path = seg.text, seg.heading_path
            continue
        candidate = buf + "\n\n" + seg.text
        if count(candidate) <= chunk_length:
            buf = candidate
        else:
            emit(buf, buf_path)
            buf, buf_path = seg.text, seg.heading_path
    if buf:
        emit(buf, buf_path)
    return chunks


def _split_paragraphs(text: str) -> list[str]:
    return _split_at(text, (m.end() for m in _PARA_BOUNDARY.finditer(text)))


def _split_sentences(text: str) -> list[str]:
    return _split_at(text, (m.end() for m in _SENTENCE_BOUNDARY.finditer(text)))


def _split_graphemes(text: str) -> list[str]:
    return _GRAPHEME.findall(text)


def _split_at(text: str, ends) -> list[str]:
    pieces = []
    last = 0
    for end in ends:
        if end <= last or end >= len(text):
            continue
        pieces.append(text[last:end])
        last = end
    if last < len(text):
        pieces.append(text[last:])
    return pieces


_SPLITTERS = (_split_paragraphs, _split_sentences, _split_graphemes)


def _split_recursive(text: str, budget: int, count, level: int = 0) -> list[str]:
    if count(text) <= budget:
        return [text]
    if level >= len(_SPLITTERS):
        # A single grapheme cluster over budget: keep it intact.
        return [text]
    pieces = _SPLITTERS[level](text)
    if len(pieces) <= 1:
        return _split_recursive(text, budget, count, level + 1)
    out: list[str] = []
    buf = ""
    for piece in pieces:
        candidate = buf + piece
        if buf and count(candidate) > budget:
            out.append(buf)
            buf = ""
            candidate = piece
        if count(candidate) > budget:
            out.extend(_split_recursive(piece, budget, count, level + 1))
            buf = ""
        else:
            buf = candidate
    if buf:
        out.append(buf)
    return out
