import numpy as np
import pytest

from docgrain.document import BBox, Page, Word, normalize_box
from docgrain.embeddings import (
    COORD_RANGE,
    PATCH_RAW_DIM,
    EmbeddingTables,
    VisualGrid,
    build_fine_input,
    embed_layout,
    embed_text,
    embed_visual,
    patch_features,
    patch_raw_features,
)
from docgrain.tensor import Tensor, add
from docgrain.vocab import SPECIALS, Vocab, build_vocab, tokenize, word_pieces


def make_tables(d=12, vocab=16, max_len=24, rng=None):
    rng = rng or np.random.default_rng(0)
    c = d // 6
    return EmbeddingTables(
        word=Tensor(rng.normal(size=(vocab, d)), requires_grad=True),
        token_type=Tensor(rng.normal(size=(2, d)), requires_grad=True),
        position=Tensor(rng.normal(size=(max_len, d)), requires_grad=True),
        coord_x=Tensor(rng.normal(size=(COORD_RANGE, c)), requires_grad=True),
        coord_y=Tensor(rng.normal(size=(COORD_RANGE, c)), requires_grad=True),
        patch_proj_w=Tensor(rng.normal(size=(PATCH_RAW_DIM, d)), requires_grad=True),
        patch_proj_b=Tensor(np.zeros(d), requires_grad=True),
    )


class TestTokenizer:
    def test_splitting_rule(self):
        assert word_pieces("fax:") == ["fax", ":"]
        assert word_pieces("123") == ["123"]
        assert word_pieces("(202)") == ["(", "202", ")"]
        assert word_pieces("778-5212") == ["778", "-", "5212"]

    def test_unknown_maps_to_unk(self):
        v = Vocab(list(SPECIALS) + ["fax", ":"])
        assert v.token_to_id("zzz") == v.unk_id

    def test_roundtrip_in_vocab(self):
        v = Vocab(list(SPECIALS) + ["fax", ":", "123"])
        for tok in ("fax", ":", "123"):
            assert v.id_to_token(v.token_to_id(tok)) == tok

    def test_tokenize_carries_boxes_and_word_index(self):
        words = [
            Word("Fax:", BBox(0, 0, 28, 14), 0),
            Word("123", BBox(32, 0, 53, 14), 0),
        ]
        v = Vocab(list(SPECIALS) + ["fax", ":", "123"])
        seq = tokenize(words, v, max_len=16)
        assert seq.pieces == ["fax", ":", "123"]
        assert seq.word_index == [0, 0, 1]
        assert seq.first_subtoken == [True, False, True]
        assert seq.bboxes[0] == seq.bboxes[1] == words[0].bbox

    def test_tokenize_over_max_len(self):
        words = [Word("a b", BBox(0, 0, 5, 5), 0)]
        v = Vocab(list(SPECIALS) + ["a", "b"])
        with pytest.raises(ValueError, match="truncate the document"):
            tokenize(words * 9, v, max_len=2)

    def test_build_vocab_rank_order(self):
        page = Page(
            width=100,
            height=100,
            words=[
                Word("b b", BBox(0, 0, 10, 10), 0),
                Word("a", BBox(0, 0, 10, 10), 0),
                Word("b", BBox(0, 0, 10, 10), 0),
            ],
            segments=[],
        )
        v = build_vocab([page], size=10)
        assert v.tokens[: len(SPECIALS)] == list(SPECIALS)
        assert v.tokens[len(SPECIALS)] == "b"  # most frequent first

    def test_build_vocab_truncates(self):
        page = Page(
            width=10, height=10,
            words=[Word(t, BBox(0, 0, 1, 1), 0) for t in "abcdefgh"],
            segments=[],
        )
        assert len(build_vocab([page], size=4)) == 4

    def test_vocab_file_roundtrip(self, tmp_path):
        v = Vocab(list(SPECIALS) + ["alpha", "beta"])
        path = str(tmp_path / "vocab.txt")
        v.save(path)
        assert Vocab.load(path).tokens == v.tokens


class TestEmbedText:
    def test_single_token_is_sum_of_three_rows(self):
        t = make_tables()
        out = embed_text([5], t).data
        want = t.word.data[5] + t.token_type.data[0] + t.position.data[0]
        assert np.array_equal(out[0], want)

    def test_identical_tokens_differ_by_position(self):
        t = make_tables()
        out = embed_text([3, 3], t).data
        diff = out[0] - out[1]
        assert np.allclose(diff, t.position.data[0] - t.position.data[1])

    def test_zero_tables_zero_output(self):
        t = make_tables()
        for tensor in (t.word, t.token_type, t.position):
            tensor.data[:] = 0.0
        assert np.all(embed_text([1, 2], t).data == 0.0)


class TestEmbedLayout:
    def test_origin_box_uses_index_zero(self):
        t = make_tables(d=12)
        out = embed_layout([BBox(0, 0, 0, 0)], t).data[0]
        want = np.concatenate([t.coord_x.data[0]] * 3 + [t.coord_y.data[0]] * 3)
        assert np.array_equal(out, want)

    def test_width_height_slices(self):
        t = make_tables(d=12)
        out = embed_layout([BBox(10, 20, 110, 70)], t).data[0]
        c = 2
        assert np.array_equal(out[2 * c : 3 * c], t.coord_x.data[100])  # width slice
        assert np.array_equal(out[5 * c : 6 * c], t.coord_y.data[50])  # height slice

    def test_equal_boxes_equal_rows(self):
        t = make_tables()
        out = embed_layout([BBox(1, 2, 3, 4), BBox(1, 2, 3, 4)], t).data
        assert np.array_equal(out[0], out[1])

    def test_out_of_range_rejected(self):
        t = make_tables()
        with pytest.raises(ValueError, match="0..1000"):
            embed_layout([BBox(0, 0, 1500, 10)], t)

    def test_zero_padding_when_not_divisible(self):
        t = make_tables(d=16)  # coord width 2, 6*2=12 < 16
        out = embed_layout([BBox(1, 2, 3, 4)], t).data
        assert out.shape == (1, 16)
        assert np.all(out[:, 12:] == 0.0)


class TestPatchFeatures:
    def test_no_image_fallback(self):
        page = Page(width=100, height=50)
        raw = patch_raw_features(page, 2, 2)
        assert raw.shape == (4, PATCH_RAW_DIM)
        assert np.all(raw[:, :3] == 0.0)
        assert raw[0, 3:].tolist() == [0.25, 0.25, 0.5, 0.5]

    def test_uniform_image_identical_color(self):
        page = Page(width=40, height=40, image=np.full((40, 40, 3), 128, dtype=np.uint8))
        raw = patch_raw_features(page, 2, 2)
        assert np.allclose(raw[:, :3], 128 / 255.0)
        assert len({tuple(r) for r in np.round(raw[:, :3], 12)}) == 1

    def test_checker_image_matches_pixel_loop(self):
        rng = np.random.default_rng(7)
        img = rng.integers(0, 256, size=(12, 16, 3)).astype(np.uint8)
        page = Page(width=16, height=12, image=img)
        grid_w, grid_h = 3, 2
        raw = patch_raw_features(page, grid_w, grid_h)
        scaled = img.astype(np.float64) / 255.0
        for row in range(grid_h):
            for col in range(grid_w):
                sums = np.zeros(3)
                count = 0
                for py in range(12):
                    for px in range(16):
                        in_col = col <= (px + 0.5) * grid_w / 16 < col + 1
                        in_row = row <= (py + 0.5) * grid_h / 12 < row + 1
                        if in_col and in_row:
                            sums += scaled[py, px]
                            count += 1
                want = sums / count
                got = raw[row * grid_w + col, :3]
                assert np.max(np.abs(got - want)) < 1e-12

    def test_projection_shape(self):
        t = make_tables()
        page = Page(width=100, height=100)
        grid = patch_features(page, 3, 3, t)
        assert grid.features.shape == (9, 12)
        assert len(grid.bboxes) == 9


class TestEmbedVisual:
    def test_zero_everything(self):
        t = make_tables()
        t.token_type.data[:] = 0.0
        t.position.data[:] = 0.0
        grid = VisualGrid(2, 1, Tensor(np.zeros((2, 12))), [BBox(0, 0, 1, 1)] * 2)
        assert np.all(embed_visual(grid, t).data == 0.0)

    def test_shared_tables_alias_text_and_visual(self):
        t = make_tables()
        grid = VisualGrid(1, 1, Tensor(np.zeros((1, 12))), [BBox(0, 0, 1, 1)])
        text_before = embed_text([0], t).data.copy()
        visual_before = embed_visual(grid, t).data.copy()
        t.position.data[0] += 1.0
        assert not np.array_equal(embed_text([0], t).data, text_before)
        assert not np.array_equal(embed_visual(grid, t).data, visual_before)


class TestPermutationStructure:
    def test_identical_tokens_identical_rows_after_position_removed(self):
        # equivariance over text tokens holds up to the position term
        t = make_tables()
        out = embed_text([4, 4], t).data
        stripped = out - t.position.data[:2]
        assert np.max(np.abs(stripped[0] - stripped[1])) < 1e-12

    def test_swapping_patch_features_permutes_rows(self):
        t = make_tables()
        rng = np.random.default_rng(5)
        feats = rng.normal(size=(3, 12))
        boxes = [BBox(0, 0, 1, 1)] * 3
        base = embed_visual(VisualGrid(3, 1, Tensor(feats), boxes), t).data
        swapped = embed_visual(VisualGrid(3, 1, Tensor(feats[[1, 0, 2]]), boxes), t).data
        pos = t.position.data
        assert np.max(np.abs((base[0] - pos[0]) - (swapped[1] - pos[1]))) < 1e-12
        assert np.max(np.abs((base[1] - pos[1]) - (swapped[0] - pos[0]))) < 1e-12


class TestBuildFineInput:
    def make_page(self):
        words = [
            Word("fax:", BBox(10, 10, 38, 24), 0),
            Word("123", BBox(42, 10, 63, 24), 0),
        ]
        from docgrain.document import Segment

        seg = Segment("fax: 123", BBox(10, 10, 63, 24), (0, 1))
        return Page(width=200, height=100, words=words, segments=[seg])

    def test_shape_and_order(self):
        t = make_tables()
        page = self.make_page()
        v = Vocab(list(SPECIALS) + ["fax", ":", "123"])
        seq = tokenize(page.words, v, 24)
        grid = patch_features(page, 2, 2, t)
        fine = build_fine_input(seq, grid, t, page)
        assert fine.tensor.shape == (3 + 4, 12)
        assert fine.n_text == 3
        assert list(fine.positions) == [0, 1, 2, 0, 1, 2, 3]

    def test_matches_composed_ops(self):
        t = make_tables()
        page = self.make_page()
        v = Vocab(list(SPECIALS) + ["fax", ":", "123"])
        seq = tokenize(page.words, v, 24)
        grid = patch_features(page, 2, 2, t)
        fine = build_fine_input(seq, grid, t, page)
        text_boxes = [normalize_box(b, page.width, page.height) for b in seq.bboxes]
        visual_boxes = [normalize_box(b, page.width, page.height) for b in grid.bboxes]
        want_text = add(embed_text(seq.ids, t), embed_layout(text_boxes, t)).data
        want_visual = add(embed_visual(grid, t), embed_layout(visual_boxes, t)).data
        assert np.array_equal(fine.tensor.data[:3], want_text)
        assert np.array_equal(fine.tensor.data[3:], want_visual)

    def test_budget_enforced(self):
        t = make_tables(max_len=5)
        page = self.make_page()
        v = Vocab(list(SPECIALS) + ["fax", ":", "123"])
        seq = tokenize(page.words, v, 5)
        grid = patch_features(page, 2, 2, t)
        with pytest.raises(ValueError, match="exceed max_len"):
            build_fine_input(seq, grid, t, page)
