"""Corpus loading and request-size windowing."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

MIN_WINDOW_CHARS = 512


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    source: Path
    sector_tag: str | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"document {self.id!r} has no text")


def load_corpus(path: str | Path) -> list[Document]:
    """Load one Document per UTF-8 text file, in lexicographic path order.

    A directory is walked recursively for *.txt files; the sector tag is the
    parent directory name for files nested below the root. Empty or
    undecodable files are logged and skipped; the run continues.
    """
    root = Path(path)
    if not root.exists():
        raise FileNotFoundError(f"corpus path does not exist: {root}")

    if root.is_file():
        files = [root]
        base = root.parent
    else:
        files = sorted(p for p in root.rglob("*.txt") if p.is_file())
        base = root

    documents: list[Document] = []
    for file in files:
        try:
            text = file.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            logger.warning("skipping %s: not valid UTF-8 (%s)", file, exc)
            continue
        if not text.strip():
            logger.warning("skipping %s: file is empty", file)
            continue
        sector = None
        if root.is_dir() and file.parent != base:
            sector = file.parent.name
        documents.append(Document(id=file.stem, text=text, source=file, sector_tag=sector))
    return documents


def window(doc: Document, max_chars: int) -> list[str]:
    """Split the document text into segments of at most max_chars.

    Splits happen at the paragraph boundary (blank line) closest below the
    limit, falling back to a hard cut inside oversized paragraphs. Segments
    are contiguous slices, so their concatenation equals the input exactly.
    """
    if max_chars < MIN_WINDOW_CHARS:
        raise ValueError(f"max_chars must be >= {MIN_WINDOW_CHARS}, got {max_chars}")
    text = doc.text
    if len(text) <= max_chars:
        return [text]

    segments: list[str] = []
    start = 0
    while start < len(text):
        if len(text) - start <= max_chars:
            segments.append(text[start:])
            break
        boundary = text.rfind("\n\n", start + 1, start + max_chars - 1)
        cut = boundary + 2 if boundary != -1 else start + max_chars
        segments.append(text[start:cut])
        start = cut
    return segments
