"""Input representations: textual, visual, and layout embeddings.

The token-type and 1D-position tables are shared by the text and visual
paths. Layout embeddings concatenate six coordinate lookups (x0, x1,
width from the x table; y0, y1, height from the y table), each d//6 wide;
when 6 does not divide d the remaining columns are zero so the layout
term still adds cleanly to the d-dimensional content embeddings.

The visual backbone is a deterministic patch featurizer: per-patch mean
RGB plus normalized center/size, linearly projected to width d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .document import BBox, Page, normalize_box
from .graph import patch_boxes
from .tensor import Tensor, add, concat_cols, concat_rows, gather, matmul
from .vocab import TokenSeq

TEXT_TYPE = 0
VISUAL_TYPE = 1

COORD_RANGE = 1001  # normalized coordinates and extents live in 0..1000

PATCH_RAW_DIM = 7  # mean R, G, B, center x, center y, width, height


@dataclass
class EmbeddingTables:
    """All learnable input tables. ``position`` and ``token_type`` are the
    same objects for both modalities by construction."""

    word: Tensor
    token_type: Tensor
    position: Tensor
    coord_x: Tensor
    coord_y: Tensor
    patch_proj_w: Tensor
    patch_proj_b: Tensor

    @property
    def d(self) -> int:
        return self.word.shape[1]

    @property
    def coord_width(self) -> int:
        return self.coord_x.shape[1]

    @property
    def max_len(self) -> int:
        return self.position.shape[0]


def embed_text(token_ids: list[int], tables: EmbeddingTables) -> Tensor:
    """Word + token-type + 1D-position rows, positions starting at 0."""
    n = len(token_ids)
    if n > tables.max_len:
        raise ValueError(f"{n} text positions exceed max_len {tables.max_len}")
    ids = np.asarray(token_ids, dtype=np.int64)
    if n and ids.max() >= tables.word.shape[0]:
        raise ValueError("token id out of vocabulary range")
    out = gather(tables.word, ids)
    out = add(out, gather(tables.token_type, np.full(n, TEXT_TYPE, dtype=np.int64)))
    return add(out, gather(tables.position, np.arange(n, dtype=np.int64)))


@dataclass
class VisualGrid:
    grid_w: int
    grid_h: int
    features: Tensor  # (grid_w * grid_h, d), already projected
    bboxes: list[BBox]  # page-space patch boxes, raster order


def embed_visual(grid: VisualGrid, tables: EmbeddingTables) -> Tensor:
    """Patch features + the shared token-type and position tables.

    Visual positions restart at 0 with their own numbering.
    """
    n = grid.features.shape[0]
    if n > tables.max_len:
        raise ValueError(f"{n} visual positions exceed max_len {tables.max_len}")
    out = add(grid.features, gather(tables.token_type, np.full(n, VISUAL_TYPE, dtype=np.int64)))
    return add(out, gather(tables.position, np.arange(n, dtype=np.int64)))


def embed_layout(boxes: list[BBox], tables: EmbeddingTables) -> Tensor:
    """Six concatenated coordinate lookups per normalized box."""
    coords = np.zeros((len(boxes), 4), dtype=np.int64)
    for i, b in enumerate(boxes):
        coords[i] = (int(b.x0), int(b.y0), int(b.x1), int(b.y1))
    if len(boxes) and (coords.min() < 0 or coords.max() >= COORD_RANGE):
        raise ValueError("layout coordinates out of the 0..1000 range; normalize boxes first")
    x0, y0, x1, y1 = coords[:, 0], coords[:, 1], coords[:, 2], coords[:, 3]
    parts = [
        gather(tables.coord_x, x0),
        gather(tables.coord_x, x1),
        gather(tables.coord_x, x1 - x0),
        gather(tables.coord_y, y0),
        gather(tables.coord_y, y1),
        gather(tables.coord_y, y1 - y0),
    ]
    pad = tables.d - 6 * tables.coord_width
    if pad:
        parts.append(Tensor(np.zeros((len(boxes), pad))))
    return concat_cols(parts)


def _pixel_ranges(n_pixels: int, n_cells: int) -> list[tuple[int, int]]:
    # Pixel px belongs to cell c when the pixel center (px + 0.5) falls in
    # [n_pixels * c / n_cells, n_pixels * (c + 1) / n_cells).
    bounds = [math.ceil(n_pixels * c / n_cells - 0.5) for c in range(n_cells + 1)]
    return [(max(bounds[c], 0), min(bounds[c + 1], n_pixels)) for c in range(n_cells)]


def patch_raw_features(page: Page, grid_w: int, grid_h: int) -> np.ndarray:
    """Per-patch [mean R, G, B, cx, cy, w, h] in raster order.

    Color means are over pixel centers inside the patch, scaled to [0, 1];
    geometry is normalized by the page dimensions. Pages without an image
    get zero color channels.
    """
    if grid_w < 1 or grid_h < 1:
        raise ValueError(f"grid must be at least 1x1, got {grid_w}x{grid_h}")
    image = _page_image(page)
    feats = np.zeros((grid_w * grid_h, PATCH_RAW_DIM))
    if image is not None:
        img_h, img_w = image.shape[0], image.shape[1]
        col_ranges = _pixel_ranges(img_w, grid_w)
        row_ranges = _pixel_ranges(img_h, grid_h)
    for row in range(grid_h):
        for col in range(grid_w):
            k = row * grid_w + col
            if image is not None:
                c0, c1 = col_ranges[col]
                r0, r1 = row_ranges[row]
                if c1 > c0 and r1 > r0:
                    feats[k, 0:3] = image[r0:r1, c0:c1].reshape(-1, 3).mean(axis=0)
            feats[k, 3] = (col + 0.5) / grid_w
            feats[k, 4] = (row + 0.5) / grid_h
            feats[k, 5] = 1.0 / grid_w
            feats[k, 6] = 1.0 / grid_h
    return feats


def patch_features(page: Page, grid_w: int, grid_h: int, tables: EmbeddingTables) -> VisualGrid:
    """Project raw patch features to d; boxes come from the uniform tiling."""
    raw = Tensor(patch_raw_features(page, grid_w, grid_h))
    projected = add(matmul(raw, tables.patch_proj_w), tables.patch_proj_b)
    return VisualGrid(
        grid_w=grid_w,
        grid_h=grid_h,
        features=projected,
        bboxes=patch_boxes(page.width, page.height, grid_w, grid_h),
    )


def _page_image(page: Page) -> np.ndarray | None:
    if page.image is not None:
        image = np.asarray(page.image, dtype=np.float64)
        if image.ndim != 3 or image.shape[2] != 3:
            raise ValueError(f"page image must be (H, W, 3), got {image.shape}")
        return image if image.max() <= 1.0 else image / 255.0
    if page.image_path is not None:
        return load_image(page.image_path)
    return None


def load_image(path: str) -> np.ndarray:
    """Read an RGB raster as float64 in [0, 1]. PPM natively, PIL if present."""
    if path.lower().endswith((".ppm", ".pnm")):
        return _read_ppm(path)
    try:
        from PIL import Image  # type: ignore
    except ImportError:
        raise ValueError(f"cannot read image '{path}': only PPM is supported without Pillow") from None
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def _read_ppm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    magic, width, height, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic == b"P6":
        data = np.frombuffer(raw, dtype=np.uint8, count=width * height * 3, offset=pos + 1)
        pixels = data.reshape(height, width, 3).astype(np.float64)
    elif magic == b"P3":
        values = [int(v) for v in raw[pos:].split()]
        pixels = np.asarray(values, dtype=np.float64).reshape(height, width, 3)
    else:
        raise ValueError(f"cannot read image '{path}': unsupported PPM magic {magic!r}")
    return pixels / float(maxval)


@dataclass
class FineInput:
    """Concatenated fine-grained input: text block, then visual block."""

    tensor: Tensor  # (L + WH, d)
    boxes: list[BBox]  # normalized, aligned with rows
    positions: np.ndarray  # 1D indices: 0..L-1 then 0..WH-1
    n_text: int


def build_fine_input(tokens: TokenSeq, grid: VisualGrid, tables: EmbeddingTables, page: Page) -> FineInput:
    """Sum content and layout embeddings for both modalities and stack them."""
    n_text = len(tokens)
    n_visual = grid.features.shape[0]
    if n_text + n_visual > tables.max_len:
        raise ValueError(
            f"{n_text} text + {n_visual} visual tokens exceed max_len {tables.max_len}"
        )
    text_boxes = [normalize_box(b, page.width, page.height) for b in tokens.bboxes]
    visual_boxes = [normalize_box(b, page.width, page.height) for b in grid.bboxes]
    text = add(embed_text(tokens.ids, tables), embed_layout(text_boxes, tables))
    visual = add(embed_visual(grid, tables), embed_layout(visual_boxes, tables))
    positions = np.concatenate([np.arange(n_text), np.arange(n_visual)]).astype(np.int64)
    return FineInput(
        tensor=concat_rows([text, visual]),
        boxes=text_boxes + visual_boxes,
        positions=positions,
        n_text=n_text,
    )
