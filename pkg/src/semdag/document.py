"""Parsed-paper representation and the external-parser interchange format.

A paper arrives as one JSON document (metadata, blocks[], figures[]) plus
image files addressed by relative path; this module validates and
cross-references it into an immutable ParsedDocument and derives the
contiguous evidence chunks used for grounding.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from .core import BlockRef
from .errors import BlockNotFoundError, FormatError, SchemaError

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_MAX_CHARS = 2000


class BlockKind(str, enum.Enum):
    PARAGRAPH = "paragraph"
    CAPTION = "caption"
    HEADING = "heading"


@dataclass(frozen=True, slots=True)
class PaperMetadata:
    paper_id: str
    title: str
    abstract: str = ""
    source_repo: str = "other"
    publication_date: str = ""
    keyword_hits: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class TextBlock:
    block_id: str
    kind: BlockKind
    text: str
    page: int
    order: int


@dataclass(frozen=True, slots=True)
class Chunk:
    chunk_id: str
    block_ids: tuple[BlockRef, ...]


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Figure location in page coordinates (points)."""

    page: int
    x0: float
    y0: float
    x1: float
    y1: float


@dataclass(frozen=True, slots=True)
class FigureAsset:
    figure_id: str
    image_ref: str
    content_hash: str
    bbox: BoundingBox
    caption_block: BlockRef | None = None


@dataclass(frozen=True, slots=True)
class ParsedDocument:
    metadata: PaperMetadata
    blocks: tuple[TextBlock, ...]
    chunks: tuple[Chunk, ...]
    figures: tuple[FigureAsset, ...]

    def block_map(self) -> dict[str, TextBlock]:
        return {b.block_id: b for b in self.blocks}


def resolve_block(doc: ParsedDocument, ref: BlockRef) -> TextBlock:
    """Return the referenced block; BlockNotFoundError when absent."""
    for block in doc.blocks:
        if block.block_id == ref:
            return block
    raise BlockNotFoundError(f"no block with id {ref!r} in paper {doc.metadata.paper_id!r}")


def chunk_blocks(blocks: Iterable[TextBlock], max_chars: int = DEFAULT_CHUNK_MAX_CHARS) -> tuple[Chunk, ...]:
    """Greedy contiguous grouping of blocks into evidence chunks.

    A new chunk starts when adding the next block would exceed max_chars or
    when a heading block begins; blocks are never split, so a block longer
    than max_chars forms a singleton chunk. Every block lands in exactly one
    chunk and chunk order preserves block order.
    """
    chunks: list[Chunk] = []
    current: list[TextBlock] = []
    current_len = 0

    def flush() -> None:
        nonlocal current, current_len
        if current:
            chunks.append(Chunk(chunk_id=f"chunk_{len(chunks):04d}", block_ids=tuple(b.block_id for b in current)))
            current = []
            current_len = 0

    for block in sorted(blocks, key=lambda b: b.order):
        if block.kind is BlockKind.HEADING or (current and current_len + len(block.text) > max_chars):
            flush()
        current.append(block)
        current_len += len(block.text)
    flush()
    return tuple(chunks)


# ---------------------------------------------------------------------------
# Interchange parsing


def _expect(obj: Any, kind: type, path: str, what: str) -> Any:
    if not isinstance(obj, kind) or (isinstance(obj, bool) and kind is not bool):
        raise SchemaError(path, f"expected {what}, got {type(obj).__name__}")
    return obj


def _string(obj: Any, path: str, *, allow_empty: bool = True) -> str:
    value = _expect(obj, str, path, "a string")
    if not allow_empty and not value.strip():
        raise SchemaError(path, "must be a non-empty string")
    return value


def _int(obj: Any, path: str, *, minimum: int | None = None) -> int:
    value = _expect(obj, int, path, "an integer")
    if minimum is not None and value < minimum:
        raise SchemaError(path, f"must be >= {minimum}")
    return value


def _number(obj: Any, path: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(obj).__name__}")
    return float(obj)


_META_KEYS = {"paper_id", "title", "abstract", "source_repo", "publication_date", "keyword_hits"}
_BLOCK_KEYS = {"block_id", "kind", "text", "page", "order"}
_FIGURE_KEYS = {"figure_id", "image_ref", "content_hash", "bbox", "caption_block"}
_BBOX_KEYS = {"page", "x0", "y0", "x1", "y1"}


def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}", "unknown field")


def metadata_from_dict(obj: Any, path: str = "$") -> PaperMetadata:
    data = _expect(obj, dict, path, "an object")
    _reject_unknown(data, _META_KEYS, path)
    return PaperMetadata(
        paper_id=_string(data.get("paper_id"), f"{path}.paper_id", allow_empty=False),
        title=_string(data.get("title"), f"{path}.title", allow_empty=False),
        abstract=_string(data.get("abstract", ""), f"{path}.abstract"),
        source_repo=_string(data.get("source_repo", "other"), f"{path}.source_repo", allow_empty=False),
        publication_date=_string(data.get("publication_date", ""), f"{path}.publication_date"),
        keyword_hits=tuple(
            _string(h, f"{path}.keyword_hits[{i}]") for i, h in enumerate(_expect(data.get("keyword_hits", []), list, f"{path}.keyword_hits", "a list"))
        ),
    )


def _block_from_dict(obj: Any, path: str) -> TextBlock:
    data = _expect(obj, dict, path, "an object")
    _reject_unknown(data, _BLOCK_KEYS, path)
    kind_raw = _string(data.get("kind"), f"{path}.kind", allow_empty=False)
    try:
        kind = BlockKind(kind_raw)
    except ValueError:
        raise SchemaError(f"{path}.kind", f"must be one of {[k.value for k in BlockKind]}, got {kind_raw!r}")
    return TextBlock(
        block_id=_string(data.get("block_id"), f"{path}.block_id", allow_empty=False),
        kind=kind,
        text=_string(data.get("text", ""), f"{path}.text"),
        page=_int(data.get("page"), f"{path}.page", minimum=1),
        order=_int(data.get("order"), f"{path}.order", minimum=0),
    )


def _figure_from_dict(obj: Any, path: str) -> FigureAsset:
    data = _expect(obj, dict, path, "an object")
    _reject_unknown(data, _FIGURE_KEYS, path)
    bbox_obj = _expect(data.get("bbox"), dict, f"{path}.bbox", "an object")
    _reject_unknown(bbox_obj, _BBOX_KEYS, f"{path}.bbox")
    bbox = BoundingBox(
        page=_int(bbox_obj.get("page"), f"{path}.bbox.page", minimum=1),
        x0=_number(bbox_obj.get("x0"), f"{path}.bbox.x0"),
        y0=_number(bbox_obj.get("y0"), f"{path}.bbox.y0"),
        x1=_number(bbox_obj.get("x1"), f"{path}.bbox.x1"),
        y1=_number(bbox_obj.get("y1"), f"{path}.bbox.y1"),
    )
    if not (bbox.x0 < bbox.x1 and bbox.y0 < bbox.y1):
        raise SchemaError(f"{path}.bbox", "must be well-ordered (x0 < x1 and y0 < y1)")
    caption = data.get("caption_block")
    if caption is not None:
        caption = _string(caption, f"{path}.caption_block", allow_empty=False)
    return FigureAsset(
        figure_id=_string(data.get("figure_id"), f"{path}.figure_id", allow_empty=False),
        image_ref=_string(data.get("image_ref"), f"{path}.image_ref", allow_empty=False),
        content_hash=_string(data.get("content_hash"), f"{path}.content_hash", allow_empty=False),
        bbox=bbox,
        caption_block=caption,
    )


def document_from_dict(obj: Any, max_chars: int = DEFAULT_CHUNK_MAX_CHARS) -> ParsedDocument:
    """Validate and cross-reference one interchange document."""
    data = _expect(obj, dict, "$", "an object")
    _reject_unknown(data, {"metadata", "blocks", "figures"}, "$")
    metadata = metadata_from_dict(data.get("metadata"), "$.metadata")

    blocks_obj = _expect(data.get("blocks", []), list, "$.blocks", "a list")
    blocks = tuple(_block_from_dict(b, f"$.blocks[{i}]") for i, b in enumerate(blocks_obj))

    seen_ids: set[str] = set()
    last_order = -1
    for i, block in enumerate(blocks):
        if block.block_id in seen_ids:
            raise SchemaError(f"$.blocks[{i}].block_id", f"duplicate block id {block.block_id!r}")
        seen_ids.add(block.block_id)
        if block.order <= last_order:
            raise SchemaError(f"$.blocks[{i}].order", "order must be strictly increasing with document position")
        last_order = block.order

    figures_obj = _expect(data.get("figures", []), list, "$.figures", "a list")
    figures = tuple(_figure_from_dict(f, f"$.figures[{i}]") for i, f in enumerate(figures_obj))
    seen_figures: set[str] = set()
    block_map = {b.block_id: b for b in blocks}
    for i, figure in enumerate(figures):
        if figure.figure_id in seen_figures:
            raise SchemaError(f"$.figures[{i}].figure_id", f"duplicate figure id {figure.figure_id!r}")
        seen_figures.add(figure.figure_id)
        if figure.caption_block is not None:
            block = block_map.get(figure.caption_block)
            if block is None:
                raise SchemaError(f"$.figures[{i}].caption_block", f"references unknown block {figure.caption_block!r}")
            if block.kind is not BlockKind.CAPTION:
                raise SchemaError(
                    f"$.figures[{i}].caption_block",
                    f"block {figure.caption_block!r} has kind {block.kind.value!r}, expected caption",
                )

    if not blocks:
        logger.warning("document %s has no text blocks", metadata.paper_id)

    return ParsedDocument(
        metadata=metadata,
        blocks=blocks,
        chunks=chunk_blocks(blocks, max_chars),
        figures=figures,
    )


def ingest_parsed_document(path: str | Path, max_chars: int = DEFAULT_CHUNK_MAX_CHARS) -> ParsedDocument:
    """Read, validate, and chunk one interchange file."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return document_from_dict(obj, max_chars)


def document_to_dict(doc: ParsedDocument) -> dict[str, Any]:
    """Re-emit the interchange fields; lossless inverse of ingestion."""
    return {
        "metadata": {
            "paper_id": doc.metadata.paper_id,
            "title": doc.metadata.title,
            "abstract": doc.metadata.abstract,
            "source_repo": doc.metadata.source_repo,
            "publication_date": doc.metadata.publication_date,
            "keyword_hits": list(doc.metadata.keyword_hits),
        },
        "blocks": [
            {
                "block_id": b.block_id,
                "kind": b.kind.value,
                "text": b.text,
                "page": b.page,
                "order": b.order,
            }
            for b in doc.blocks
        ],
        "figures": [
            {
                "figure_id": f.figure_id,
                "image_ref": f.image_ref,
                "content_hash": f.content_hash,
                "bbox": {"page": f.bbox.page, "x0": f.bbox.x0, "y0": f.bbox.y0, "x1": f.bbox.x1, "y1": f.bbox.y1},
                **({"caption_block": f.caption_block} if f.caption_block is not None else {}),
            }
            for f in doc.figures
        ],
    }
