"""Geometry primitives and the OCR document data model.

Coordinates are stored raw (page pixels). Normalization to the 0..1000
integer grid happens only at the embedding boundary, so clustering radii
keep their page-space meaning.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


class DocumentParseError(ValueError):
    """Raised when a document JSON record violates the schema."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle with x0 <= x1 and y0 <= y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"invalid box: ({self.x0},{self.y0},{self.x1},{self.y1})")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0.0 for disjoint or fully degenerate pairs."""
    ix = min(a.x1, b.x1) - max(a.x0, b.x0)
    iy = min(a.y1, b.y1) - max(a.y0, b.y0)
    inter = max(ix, 0.0) * max(iy, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def boundary_distance(a: BBox, b: BBox) -> float:
    """Euclidean combination of the per-axis gaps between two rectangles.

    Zero whenever the boxes overlap or touch on both axes.
    """
    dx = max(max(a.x0, b.x0) - min(a.x1, b.x1), 0.0)
    dy = max(max(a.y0, b.y0) - min(a.y1, b.y1), 0.0)
    return math.hypot(dx, dy)


def union_box(boxes: list[BBox]) -> BBox:
    """Smallest rectangle covering every input box."""
    if not boxes:
        raise ValueError("empty region")
    return BBox(
        min(b.x0 for b in boxes),
        min(b.y0 for b in boxes),
        max(b.x1 for b in boxes),
        max(b.y1 for b in boxes),
    )


def normalize_box(b: BBox, page_w: float, page_h: float) -> BBox:
    """Quantize a page-space box onto the 0..1000 integer grid.

    The box is clamped into the page first; each coordinate maps by
    floor(v * 1000 / page_dim) and is clamped to [0, 1000].
    """
    if page_w <= 0 or page_h <= 0:
        raise ValueError(f"non-positive page dimensions: {page_w}x{page_h}")

    def scale(v: float, dim: float) -> float:
        v = min(max(v, 0.0), dim)
        return float(min(max(math.floor(v * 1000.0 / dim), 0), 1000))

    return BBox(scale(b.x0, page_w), scale(b.y0, page_h), scale(b.x1, page_w), scale(b.y1, page_h))


@dataclass(frozen=True)
class Word:
    text: str
    bbox: BBox
    segment_id: int


@dataclass(frozen=True)
class Segment:
    text: str
    bbox: BBox
    word_ids: tuple[int, ...]


@dataclass
class Page:
    """A parsed OCR page: words in reading order, segments, optional raster.

    ``labels`` carries one BIO tag per word when the page is annotated.
    ``image`` is an in-memory (height, width, 3) array; ``image_path``
    points at an on-disk raster referenced from the JSON form.
    """

    width: int
    height: int
    words: list[Word] = field(default_factory=list)
    segments: list[Segment] = field(default_factory=list)
    labels: list[str] | None = None
    image_path: str | None = None
    image: object | None = None  # numpy (H, W, 3) array, kept out of JSON

    @property
    def n_words(self) -> int:
        return len(self.words)

    @property
    def n_segments(self) -> int:
        return len(self.segments)


# Envelope validation tolerance, pixels per edge.
_ENVELOPE_TOL = 1.0


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise DocumentParseError(message)


def _parse_bbox(raw: object, where: str) -> BBox:
    _require(isinstance(raw, (list, tuple)) and len(raw) == 4, f"bad bbox at {where}")
    try:
        return BBox(*[float(v) for v in raw])  # type: ignore[misc]
    except (TypeError, ValueError) as exc:
        raise DocumentParseError(f"bad bbox at {where}: {exc}") from None


def parse_document(data: bytes | str | dict) -> Page:
    """Parse and validate the document JSON interchange format.

    Raises DocumentParseError naming the offending record on any schema or
    consistency violation.
    """
    if isinstance(data, (bytes, str)):
        try:
            raw = json.loads(data)
        except json.JSONDecodeError as exc:
            raise DocumentParseError(f"invalid JSON: {exc}") from None
    else:
        raw = data
    _require(isinstance(raw, dict), "document must be a JSON object")
    for key in ("width", "height", "words", "segments"):
        _require(key in raw, f"missing field '{key}'")
    width, height = raw["width"], raw["height"]
    _require(isinstance(width, int) and isinstance(height, int), "width/height must be integers")
    _require(width > 0 and height > 0, f"non-positive page dimensions: {width}x{height}")

    segments_raw = raw["segments"]
    words_raw = raw["words"]
    _require(isinstance(segments_raw, list), "'segments' must be a list")
    _require(isinstance(words_raw, list), "'words' must be a list")

    words: list[Word] = []
    for i, w in enumerate(words_raw):
        _require(isinstance(w, dict), f"words[{i}] must be an object")
        text = w.get("text")
        _require(isinstance(text, str) and text.strip() != "", f"empty text at words[{i}]")
        seg_id = w.get("segment_id")
        _require(isinstance(seg_id, int), f"missing segment_id at words[{i}]")
        _require(0 <= seg_id < len(segments_raw), f"dangling segment_id at words[{i}]")
        words.append(Word(text=text, bbox=_parse_bbox(w.get("bbox"), f"words[{i}]"), segment_id=seg_id))

    segments: list[Segment] = []
    for i, s in enumerate(segments_raw):
        _require(isinstance(s, dict), f"segments[{i}] must be an object")
        text = s.get("text")
        _require(isinstance(text, str), f"missing text at segments[{i}]")
        word_ids = s.get("word_ids")
        _require(isinstance(word_ids, list) and len(word_ids) > 0, f"empty segment at segments[{i}]")
        for wid in word_ids:
            _require(isinstance(wid, int) and 0 <= wid < len(words), f"bad word id {wid} at segments[{i}]")
            _require(words[wid].segment_id == i, f"segments[{i}] lists word {wid} whose segment_id is {words[wid].segment_id}")
        bbox = _parse_bbox(s.get("bbox"), f"segments[{i}]")
        envelope = union_box([words[wid].bbox for wid in word_ids])
        for got, want, edge in (
            (bbox.x0, envelope.x0, "x0"),
            (bbox.y0, envelope.y0, "y0"),
            (bbox.x1, envelope.x1, "x1"),
            (bbox.y1, envelope.y1, "y1"),
        ):
            _require(abs(got - want) <= _ENVELOPE_TOL, f"segments[{i}].bbox {edge} deviates from word envelope by more than 1 pixel")
        segments.append(Segment(text=text, bbox=bbox, word_ids=tuple(word_ids)))

    # Segments must partition the words.
    seen: set[int] = set()
    for i, s in enumerate(segments):
        for wid in s.word_ids:
            _require(wid not in seen, f"word {wid} listed by more than one segment")
            seen.add(wid)
    _require(len(seen) == len(words), "segments do not cover every word")

    labels = raw.get("labels")
    if labels is not None:
        _require(isinstance(labels, list) and all(isinstance(t, str) for t in labels), "'labels' must be a list of strings")
        _require(len(labels) == len(words), f"labels length {len(labels)} != word count {len(words)}")
        labels = list(labels)

    image_path = raw.get("image")
    if image_path is not None:
        _require(isinstance(image_path, str), "'image' must be a path string")

    return Page(width=width, height=height, words=words, segments=segments, labels=labels, image_path=image_path)


def serialize_document(page: Page) -> dict:
    """Inverse of parse_document for valid pages."""
    out: dict = {
        "width": page.width,
        "height": page.height,
        "words": [
            {"text": w.text, "bbox": w.bbox.as_list(), "segment_id": w.segment_id}
            for w in page.words
        ],
        "segments": [
            {"text": s.text, "bbox": s.bbox.as_list(), "word_ids": list(s.word_ids)}
            for s in page.segments
        ],
    }
    if page.labels is not None:
        out["labels"] = list(page.labels)
    if page.image_path is not None:
        out["image"] = page.image_path
    return out


def document_to_json(page: Page) -> str:
    return json.dumps(serialize_document(page), indent=None, separators=(",", ":"))


def load_document(path: str) -> Page:
    with open(path, "rb") as fh:
        return parse_document(fh.read())


def save_document(page: Page, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(document_to_json(page))
