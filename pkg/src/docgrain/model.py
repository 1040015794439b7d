"""The four-stage multi-grained document model.

Stages: spatial fine-grained encoding over words and patches, aggregation
of fine features into segment and region nodes along the graph's parent
edges, knowledge-enhanced coarse encoding with canonical attention, and
fusion of each coarse feature back onto its fine children. Coordinates
reach the model only through the shared layout tables.
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass

import numpy as np

from .attention import (
    AttentionConfig,
    LayerParams,
    RelativeBiasTables,
    SpatialIndices,
    spatial_indices,
    transformer_layer,
)
from .clustering import ClusterParams
from .commonsense import CommonSenseInventory, make_inventory
from .document import BBox, Page, normalize_box
from .embeddings import (
    COORD_RANGE,
    PATCH_RAW_DIM,
    EmbeddingTables,
    VisualGrid,
    embed_layout,
    embed_text,
    embed_visual,
    patch_raw_features,
)
from .graph import DocumentGraph, build_graph
from .labeling import BioTagSet, labeling_head
from .tensor import (
    IGNORE_INDEX,
    Tensor,
    add,
    concat_rows,
    cross_entropy,
    gather,
    matmul,
    slice_rows,
)
from .vocab import TokenSeq, Vocab, tokenize


@dataclass
class ModelConfig:
    """Every architectural hyperparameter; JSON configs mirror these names."""

    d: int = 64
    heads: int = 4
    fine_layers: int = 2
    coarse_layers: int = 1
    ffn_width: int | None = None
    vocab_size: int = 2048
    max_len: int = 512
    grid: tuple[int, int] = (7, 7)
    commonsense_k: int = 8
    commonsense_dim: int | None = None
    radius: float = 30.0
    min_pts: int = 1
    rel_buckets: int = 32
    rel_max_distance: int = 1000
    dropout: float = 0.0
    seed: int = 0
    aggregation: str = "sum"
    use_cross_grained: bool = True
    activation: str = "gelu"

    def __post_init__(self) -> None:
        self.grid = (int(self.grid[0]), int(self.grid[1]))
        if self.d < 6:
            raise ValueError(f"model width must be at least 6, got {self.d}")
        if self.d % self.heads != 0:
            raise ValueError(f"width {self.d} not divisible by {self.heads} heads")
        if self.fine_layers < 1:
            raise ValueError("at least one fine layer is required")
        if not 0 <= self.coarse_layers <= 5:
            raise ValueError(f"coarse_layers must be in [0, 5], got {self.coarse_layers}")
        if self.commonsense_k < 0:
            raise ValueError("commonsense_k must be >= 0")
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.grid}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.aggregation not in ("sum", "mean"):
            raise ValueError(f"aggregation must be 'sum' or 'mean', got '{self.aggregation}'")
        if self.activation not in ("gelu", "relu"):
            raise ValueError(f"activation must be 'gelu' or 'relu', got '{self.activation}'")

    @property
    def ffn(self) -> int:
        return self.ffn_width if self.ffn_width is not None else 4 * self.d

    @property
    def cs_dim(self) -> int:
        return self.commonsense_dim if self.commonsense_dim is not None else self.d

    @property
    def coord_width(self) -> int:
        return self.d // 6

    @property
    def attention_config(self) -> AttentionConfig:
        return AttentionConfig(self.heads, self.rel_buckets, self.rel_max_distance)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["grid"] = list(self.grid)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown model config fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "grid" in kwargs:
            kwargs["grid"] = tuple(kwargs["grid"])
        return cls(**kwargs)


def gradcheck_config(seed: int = 0) -> ModelConfig:
    """Small width/depth configuration for finite-difference verification."""
    return ModelConfig(
        d=16,
        heads=2,
        fine_layers=2,
        coarse_layers=1,
        vocab_size=64,
        max_len=32,
        grid=(2, 2),
        commonsense_k=4,
        seed=seed,
    )


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal samples resampled until within two standard deviations."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


@dataclass
class EncodedDoc:
    """Everything about one page that is constant across forward passes."""

    page: Page
    graph: DocumentGraph
    tokens: TokenSeq
    patch_raw: np.ndarray  # (WH, PATCH_RAW_DIM)
    text_boxes: list[BBox]  # normalized, one per token
    visual_boxes: list[BBox]  # normalized, one per patch
    positions: np.ndarray
    fine_indices: SpatialIndices
    agg_text: np.ndarray  # (Z, L)
    agg_visual: np.ndarray  # (P, WH)
    cs_bits: np.ndarray  # (Z, K)
    coarse_text_boxes: list[BBox]
    coarse_visual_boxes: list[BBox]
    parent_row: np.ndarray  # (L + WH,) rows into the coarse stack
    targets: np.ndarray | None  # per-token tag ids, IGNORE_INDEX on continuations

    @property
    def n_text(self) -> int:
        return len(self.tokens)

    @property
    def n_visual(self) -> int:
        return self.patch_raw.shape[0]


class Model:
    """Parameter store plus the full forward computation."""

    def __init__(
        self,
        config: ModelConfig,
        vocab: Vocab,
        tag_set: BioTagSet | None = None,
        inventory: CommonSenseInventory | None = None,
    ):
        if len(vocab) > config.vocab_size:
            raise ValueError(f"vocabulary size {len(vocab)} exceeds configured {config.vocab_size}")
        self.config = config
        self.vocab = vocab
        self.tag_set = tag_set if tag_set is not None else BioTagSet()
        self.inventory = inventory if inventory is not None else make_inventory(None, config.commonsense_k)
        if self.inventory.size != config.commonsense_k:
            raise ValueError(f"inventory size {self.inventory.size} != configured k {config.commonsense_k}")
        self.params: dict[str, Tensor] = {}
        # Dropout fires only during training passes; evaluation stays exact.
        self.train_mode = False
        self._dropout_rng = np.random.default_rng([config.seed, 0xD0])
        self._build_params()

    # -- parameter construction -------------------------------------------

    def _param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(value, requires_grad=True)
        self.params[name] = t
        return t

    def _rng_for(self, name: str) -> np.random.Generator:
        # One stream per parameter name: init values do not depend on how
        # many other parameters the architecture happens to have.
        digest = zlib.crc32(name.encode("utf-8"))
        return np.random.default_rng([self.config.seed, digest])

    def _weight(self, name: str, shape) -> Tensor:
        return self._param(name, trunc_normal(self._rng_for(name), shape))

    def _zeros(self, name: str, shape) -> Tensor:
        return self._param(name, np.zeros(shape))

    def _ones(self, name: str, shape) -> Tensor:
        return self._param(name, np.ones(shape))

    def _layer(self, prefix: str) -> LayerParams:
        d, ffn = self.config.d, self.config.ffn
        return LayerParams(
            wq=self._weight(f"{prefix}.wq", (d, d)),
            bq=self._zeros(f"{prefix}.bq", (d,)),
            wk=self._weight(f"{prefix}.wk", (d, d)),
            bk=self._zeros(f"{prefix}.bk", (d,)),
            wv=self._weight(f"{prefix}.wv", (d, d)),
            bv=self._zeros(f"{prefix}.bv", (d,)),
            wo=self._weight(f"{prefix}.wo", (d, d)),
            bo=self._zeros(f"{prefix}.bo", (d,)),
            ln1_gain=self._ones(f"{prefix}.ln1_gain", (d,)),
            ln1_bias=self._zeros(f"{prefix}.ln1_bias", (d,)),
            ln2_gain=self._ones(f"{prefix}.ln2_gain", (d,)),
            ln2_bias=self._zeros(f"{prefix}.ln2_bias", (d,)),
            ffn_w1=self._weight(f"{prefix}.ffn_w1", (d, ffn)),
            ffn_b1=self._zeros(f"{prefix}.ffn_b1", (ffn,)),
            ffn_w2=self._weight(f"{prefix}.ffn_w2", (ffn, d)),
            ffn_b2=self._zeros(f"{prefix}.ffn_b2", (d,)),
        )

    def _build_params(self) -> None:
        cfg = self.config
        self.tables = EmbeddingTables(
            word=self._weight("emb.word", (cfg.vocab_size, cfg.d)),
            token_type=self._weight("emb.token_type", (2, cfg.d)),
            position=self._weight("emb.position", (cfg.max_len, cfg.d)),
            coord_x=self._weight("emb.coord_x", (COORD_RANGE, cfg.coord_width)),
            coord_y=self._weight("emb.coord_y", (COORD_RANGE, cfg.coord_width)),
            patch_proj_w=self._weight("emb.patch_w", (PATCH_RAW_DIM, cfg.d)),
            patch_proj_b=self._zeros("emb.patch_b", (cfg.d,)),
        )
        self.bias_tables = RelativeBiasTables(
            rel_1d=self._zeros("bias.rel_1d", (cfg.rel_buckets, cfg.heads)),
            rel_x=self._zeros("bias.rel_x", (cfg.rel_buckets, cfg.heads)),
            rel_y=self._zeros("bias.rel_y", (cfg.rel_buckets, cfg.heads)),
        )
        self.fine_stack = [self._layer(f"fine.{i}") for i in range(cfg.fine_layers)]
        self.coarse_stack = [self._layer(f"coarse.{i}") for i in range(cfg.coarse_layers)]
        if cfg.commonsense_k > 0:
            self.cs_emb = self._weight("cs.emb", (cfg.commonsense_k, cfg.cs_dim))
            # Near-identity start so the knowledge term begins as a gentle additive hint.
            proj = np.zeros((cfg.cs_dim, cfg.d))
            np.fill_diagonal(proj, 1.0)
            self.cs_proj = self._param("cs.proj", proj + trunc_normal(self._rng_for("cs.proj"), (cfg.cs_dim, cfg.d)))
        else:
            self.cs_emb = None
            self.cs_proj = None
        self.head_w = self._weight("head.w", (cfg.d, self.tag_set.n_tags))
        self.head_b = self._zeros("head.b", (self.tag_set.n_tags,))

    # -- page encoding (constant per document) ----------------------------

    def cluster_params(self) -> ClusterParams:
        return ClusterParams(radius=self.config.radius, min_pts=self.config.min_pts)

    def encode_page(self, page: Page) -> EncodedDoc:
        cfg = self.config
        graph = build_graph(page, self.cluster_params(), cfg.grid)
        tokens = tokenize(page.words, self.vocab, cfg.max_len)
        patch_raw = patch_raw_features(page, cfg.grid[0], cfg.grid[1])
        n_text, n_visual = len(tokens), patch_raw.shape[0]
        if n_text + n_visual > cfg.max_len:
            raise ValueError(f"{n_text} text + {n_visual} visual tokens exceed max_len {cfg.max_len}")
        text_boxes = [normalize_box(b, page.width, page.height) for b in tokens.bboxes]
        visual_boxes = [normalize_box(b, page.width, page.height) for b in graph.patch_bboxes]
        positions = np.concatenate([np.arange(n_text), np.arange(n_visual)]).astype(np.int64)
        fine_idx = spatial_indices(text_boxes + visual_boxes, positions, cfg.attention_config)

        n_seg, n_reg = graph.n_coarse_text, graph.n_coarse_visual
        agg_text = np.zeros((n_seg, n_text))
        for t in range(n_text):
            agg_text[graph.text_parent[tokens.word_index[t]], t] = 1.0
        agg_visual = np.zeros((n_reg, n_visual))
        for p in range(n_visual):
            agg_visual[graph.visual_parent[p], p] = 1.0
        if cfg.aggregation == "mean":
            for mat in (agg_text, agg_visual):
                counts = mat.sum(axis=1, keepdims=True)
                np.divide(mat, counts, out=mat, where=counts > 0)

        cs_bits = self.inventory.detect_all([s.text for s in page.segments])
        coarse_text_boxes = [normalize_box(s.bbox, page.width, page.height) for s in page.segments]
        coarse_visual_boxes = [normalize_box(r.bbox, page.width, page.height) for r in graph.regions]

        parent_row = np.zeros(n_text + n_visual, dtype=np.int64)
        for t in range(n_text):
            parent_row[t] = graph.text_parent[tokens.word_index[t]]
        for p in range(n_visual):
            parent_row[n_text + p] = n_seg + graph.visual_parent[p]

        targets = None
        if page.labels is not None:
            targets = np.full(n_text, IGNORE_INDEX, dtype=np.int64)
            for t in range(n_text):
                if tokens.first_subtoken[t]:
                    targets[t] = self.tag_set.tag_id(page.labels[tokens.word_index[t]])

        return EncodedDoc(
            page=page,
            graph=graph,
            tokens=tokens,
            patch_raw=patch_raw,
            text_boxes=text_boxes,
            visual_boxes=visual_boxes,
            positions=positions,
            fine_indices=fine_idx,
            agg_text=agg_text,
            agg_visual=agg_visual,
            cs_bits=cs_bits,
            coarse_text_boxes=coarse_text_boxes,
            coarse_visual_boxes=coarse_visual_boxes,
            parent_row=parent_row,
            targets=targets,
        )

    # -- forward stages ----------------------------------------------------

    def fine_input(self, enc: EncodedDoc) -> Tensor:
        grid = VisualGrid(
            grid_w=self.config.grid[0],
            grid_h=self.config.grid[1],
            features=add(matmul(Tensor(enc.patch_raw), self.tables.patch_proj_w), self.tables.patch_proj_b),
            bboxes=enc.graph.patch_bboxes,
        )
        text = add(embed_text(enc.tokens.ids, self.tables), embed_layout(enc.text_boxes, self.tables))
        visual = add(embed_visual(grid, self.tables), embed_layout(enc.visual_boxes, self.tables))
        return concat_rows([text, visual])

    def fine_encode(self, h: Tensor, enc: EncodedDoc) -> Tensor:
        rate = self.config.dropout if self.train_mode else 0.0
        for layer in self.fine_stack:
            h = transformer_layer(
                h, layer, self.config.heads, self.bias_tables, enc.fine_indices,
                self.config.activation, rate, self._dropout_rng,
            )
        return h

    def aggregate(self, h_fine: Tensor, enc: EncodedDoc) -> tuple[Tensor, Tensor]:
        h_text = slice_rows(h_fine, 0, enc.n_text)
        h_visual = slice_rows(h_fine, enc.n_text, enc.n_text + enc.n_visual)
        return matmul(Tensor(enc.agg_text), h_text), matmul(Tensor(enc.agg_visual), h_visual)

    def commonsense_embed(self, cs_bits: np.ndarray) -> Tensor:
        if self.cs_emb is None:
            raise ValueError("common-sense subsystem is disabled (k = 0)")
        return matmul(matmul(Tensor(cs_bits), self.cs_emb), self.cs_proj)

    def coarse_input(self, agg_text: Tensor, agg_visual: Tensor, enc: EncodedDoc) -> Tensor:
        if self.config.commonsense_k > 0:
            agg_text = add(agg_text, self.commonsense_embed(enc.cs_bits))
        text = add(agg_text, embed_layout(enc.coarse_text_boxes, self.tables))
        visual = add(agg_visual, embed_layout(enc.coarse_visual_boxes, self.tables))
        return concat_rows([text, visual])

    def coarse_encode(self, h: Tensor) -> Tensor:
        rate = self.config.dropout if self.train_mode else 0.0
        for layer in self.coarse_stack:
            h = transformer_layer(
                h, layer, self.config.heads, activation=self.config.activation,
                dropout_rate=rate, dropout_rng=self._dropout_rng,
            )
        return h

    def fuse(self, h_fine: Tensor, h_coarse: Tensor, enc: EncodedDoc) -> Tensor:
        return add(h_fine, gather(h_coarse, enc.parent_row))

    def forward_encoded(self, enc: EncodedDoc, collect: bool = False) -> tuple[Tensor, dict]:
        stages: dict[str, Tensor] = {}
        h0 = self.fine_input(enc)
        h_fine = self.fine_encode(h0, enc)
        if collect:
            stages["fine_input"] = h0
            stages["fine_encoded"] = h_fine
        if not self.config.use_cross_grained:
            if collect:
                stages["fused"] = h_fine
            return h_fine, stages
        agg_text, agg_visual = self.aggregate(h_fine, enc)
        h_c0 = self.coarse_input(agg_text, agg_visual, enc)
        h_coarse = self.coarse_encode(h_c0)
        fused = self.fuse(h_fine, h_coarse, enc)
        if collect:
            stages["aggregated_text"] = agg_text
            stages["aggregated_visual"] = agg_visual
            stages["coarse_input"] = h_c0
            stages["coarse_encoded"] = h_coarse
            stages["fused"] = fused
        return fused, stages

    def forward(self, page: Page, collect: bool = False) -> tuple[Tensor, dict]:
        """Full pipeline from a parsed page; returns fused features and,
        when requested, every intermediate stage tensor."""
        return self.forward_encoded(self.encode_page(page), collect)

    # -- heads and losses ---------------------------------------------------

    def logits_encoded(self, enc: EncodedDoc) -> Tensor:
        fused, _ = self.forward_encoded(enc)
        return labeling_head(slice_rows(fused, 0, enc.n_text), self.head_w, self.head_b)

    def loss_encoded(self, enc: EncodedDoc) -> Tensor:
        if enc.targets is None:
            raise ValueError("document has no labels")
        return cross_entropy(self.logits_encoded(enc), enc.targets)

    def predict_word_tags(self, enc: EncodedDoc) -> list[str]:
        """Argmax tag per word, read from its first sub-token."""
        from .tensor import no_grad

        with no_grad():
            logits = self.logits_encoded(enc).data
        tags = []
        for t in range(enc.n_text):
            if enc.tokens.first_subtoken[t]:
                tags.append(self.tag_set.id_tag(int(logits[t].argmax())))
        return tags

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    # -- persistence ---------------------------------------------------------

    def save(self, path: str) -> None:
        from .checkpoint import save_checkpoint

        config = {
            "model": self.config.to_dict(),
            "vocab": self.vocab.tokens,
            "label_types": list(self.tag_set.types),
            "categories": list(self.inventory.categories),
        }
        save_checkpoint(path, {name: t.data for name, t in self.params.items()}, config)


def load_model(path: str) -> Model:
    from .checkpoint import CheckpointError, load_checkpoint

    tensors, config = load_checkpoint(path)
    cfg = ModelConfig.from_dict(config["model"])
    model = Model(
        cfg,
        Vocab(config["vocab"]),
        BioTagSet(tuple(config["label_types"])),
        CommonSenseInventory(tuple(config["categories"])),
    )
    for name, param in model.params.items():
        if name not in tensors:
            raise CheckpointError(f"checkpoint missing tensor '{name}'")
        if tensors[name].shape != param.data.shape:
            raise CheckpointError(
                f"tensor '{name}' has shape {tensors[name].shape}, expected {param.data.shape}"
            )
        param.data = tensors[name]
    extra = set(tensors) - set(model.params)
    if extra:
        raise CheckpointError(f"checkpoint has unexpected tensors: {sorted(extra)}")
    return model


def stage_summary(stages: dict[str, Tensor]) -> dict:
    """Shapes and norms per stage, for the intermediates dump."""
    return {
        name: {"shape": list(t.shape), "norm": float(np.linalg.norm(t.data))}
        for name, t in stages.items()
    }


def finite_difference_check(
    model: Model,
    page: Page,
    samples_per_group: int = 8,
    h: float = 1e-5,
) -> tuple[float, dict[str, float]]:
    """Compare reverse-mode gradients with central differences.

    Every parameter group is probed at its samples_per_group
    largest-|gradient| coordinates: those dominate the update and are the
    ones central differences can measure above float64 cancellation
    noise. Returns the max relative error overall and per group.
    """
    from .tensor import grad_check

    enc = model.encode_page(page)
    model.zero_grad()
    loss = model.loss_encoded(enc)
    loss.backward()
    grads = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for name, p in model.params.items()}
    model.zero_grad()

    per_group: dict[str, float] = {}
    for name, p in model.params.items():
        magnitudes = np.abs(grads[name]).reshape(-1)
        k = min(samples_per_group, magnitudes.size)
        flat_coords = [int(c) for c in np.argsort(-magnitudes, kind="stable")[:k]]
        # Coordinates with near-zero gradients need a wider step: at h=1e-5
        # the f(x+h)-f(x-h) cancellation noise (~eps*|f|/h) swamps them.
        buckets: dict[float, list] = {}
        for c in flat_coords:
            step = h if magnitudes[c] >= 1e-6 else max(h, 1e-3)
            buckets.setdefault(step, []).append(np.unravel_index(c, p.data.shape))
        err = 0.0
        for step, coords in buckets.items():
            err = max(err, grad_check(lambda _: model.loss_encoded(enc), p, h=step, coords=coords))
        per_group[name] = err
    return max(per_group.values()), per_group


