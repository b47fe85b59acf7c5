import numpy as np
import pytest
import torch

from facerep.encoders import (
    ImageEncoder,
    ModelConfig,
    ProjectionHead,
    TextTokenizer,
    TextTokens,
    VisualLinguisticModel,
    build_miniature,
    interpolate_pos_embeddings,
)
from facerep.encoders.tokenizer import BOS, CONTEXT_LENGTH, EOS, PAD
from facerep.errors import InputError, NumericalError

TOKENIZER = TextTokenizer()


@pytest.fixture(scope="module")
def mini():
    torch.manual_seed(0)
    model = build_miniature(TOKENIZER.vocab_size)
    model.eval()
    return model


def mini_images(batch=2, size=32, seed=0):
    rng = np.random.default_rng(seed)
    arr = rng.uniform(0.1, 0.9, size=(batch, 3, size, size))
    return torch.tensor(arr, dtype=torch.float32)


class TestImageEncoder:
    def test_mini_layer_shapes(self, mini):
        feats = mini.encode_image(mini_images())
        assert len(feats) == 2
        for layer in feats:
            assert layer.shape == (2, 5, 64)

    def test_token_count_and_positions(self):
        enc = ImageEncoder(depth=1, width=64, heads=4, patch_size=16, image_size=224)
        assert enc.num_patches == 196
        assert enc.pos_embedding.shape == (197, 64)

    def test_zero_image_gives_equal_patch_embeddings(self, mini):
        tokens = mini.image_encoder.embed_tokens(torch.zeros(1, 3, 32, 32))
        patches = tokens[0, 1:]
        assert torch.equal(patches, patches[0].expand_as(patches))

    def test_indivisible_size_rejected(self):
        with pytest.raises(InputError):
            ImageEncoder(depth=1, width=64, heads=4, patch_size=16, image_size=100)

    def test_wrong_input_size_rejected(self, mini):
        with pytest.raises(InputError):
            mini.encode_image(torch.zeros(1, 3, 48, 48))

    def test_pixel_range_enforced(self, mini):
        bad = torch.full((1, 3, 32, 32), 1.5)
        with pytest.raises(InputError):
            mini.encode_image(bad)

    def test_deterministic(self, mini):
        images = mini_images()
        with torch.no_grad():
            a = mini.encode_image(images)
            b = mini.encode_image(images)
        for x, y in zip(a, b):
            assert torch.equal(x, y)

    def test_layer_slice_matches_truncated_forward(self, mini):
        images = mini_images(seed=3)
        with torch.no_grad():
            feats = mini.encode_image(images)
            enc = mini.image_encoder
            x = enc.embed_tokens(images) + enc.pos_embedding
            for k, block in enumerate(enc.blocks):
                x = block(x)
                assert torch.equal(x, feats[k])


class TestTextEncoder:
    def test_mini_layer_shapes(self, mini):
        ids, _ = TOKENIZER.tokenize_batch(["a young woman smiling", "hello world"])
        feats = mini.encode_text(torch.tensor(ids))
        assert len(feats) == 2
        for layer in feats:
            assert layer.shape == (2, 77, 64)

    def test_padding_after_eos_cannot_affect_eos_feature(self, mini):
        toks = TOKENIZER.tokenize("a portrait of a man")
        ids_a = torch.tensor(toks.ids[None])
        ids_b = ids_a.clone()
        ids_b[0, toks.eos_position + 1 :] = 7  # arbitrary junk past eos
        with torch.no_grad():
            feat_a = mini.text_encoder.pool_eos(mini.encode_text(ids_a), torch.tensor([toks.eos_position]))
            feat_b = mini.text_encoder.pool_eos(mini.encode_text(ids_b), torch.tensor([toks.eos_position]))
        assert torch.allclose(feat_a, feat_b, atol=1e-6)

    def test_empty_string_encodes(self, mini):
        toks = TOKENIZER.tokenize("")
        emb = mini.embed_text(
            torch.tensor(toks.ids[None]), torch.tensor([toks.eos_position])
        )
        assert emb.shape == (1, 64)

    def test_bad_eos_position_rejected(self, mini):
        ids, _ = TOKENIZER.tokenize_batch(["hello"])
        feats = mini.encode_text(torch.tensor(ids))
        with pytest.raises(InputError):
            mini.text_encoder.pool_eos(feats, torch.tensor([77]))

    def test_out_of_range_ids_rejected(self, mini):
        ids = torch.full((1, 77), TOKENIZER.vocab_size, dtype=torch.long)
        with pytest.raises(InputError):
            mini.encode_text(ids)


class TestProjection:
    def test_unit_norm(self, mini):
        emb = mini.embed_image(mini_images())
        norms = emb.norm(dim=-1)
        assert torch.allclose(norms, torch.ones_like(norms), atol=1e-5)

    def test_scale_invariance_of_final_normalize(self):
        torch.manual_seed(0)
        head = ProjectionHead(16, 8, depth=1)  # bias starts at zero
        f = torch.randn(4, 16)
        assert torch.allclose(head(f), head(2 * f), atol=1e-6)

    def test_zero_vector_raises_numerical_error(self):
        head = ProjectionHead(8, 8, depth=1)
        with torch.no_grad():
            head.mlp[0].weight.zero_()
        with pytest.raises(NumericalError):
            head(torch.ones(1, 8))

    def test_cross_tower_dot_bounded(self, mini):
        img = mini.embed_image(mini_images())
        ids, eos = TOKENIZER.tokenize_batch(["a face", "hello world"])
        txt = mini.embed_text(torch.tensor(ids), torch.tensor(eos))
        dots = (img * txt).sum(dim=-1)
        assert torch.all(dots <= 1.0 + 1e-6) and torch.all(dots >= -1.0 - 1e-6)


class TestPosInterpolation:
    def test_upsample_doubles_grid_and_keeps_cls(self):
        torch.manual_seed(0)
        pe = torch.randn(197, 32)
        out = interpolate_pos_embeddings(pe, 28)
        assert out.shape == (1 + 784, 32)
        assert torch.equal(out[0], pe[0])

    def test_same_grid_is_identity(self):
        torch.manual_seed(1)
        pe = torch.randn(17, 8)
        assert torch.allclose(interpolate_pos_embeddings(pe, 4), pe, atol=1e-6)

    def test_constant_channel_stays_constant(self):
        pe = torch.ones(1 + 49, 4) * 3.25
        out = interpolate_pos_embeddings(pe, 14)
        assert torch.allclose(out, torch.full_like(out, 3.25), atol=1e-5)

    def test_non_square_rejected(self):
        with pytest.raises(InputError):
            interpolate_pos_embeddings(torch.randn(1 + 12, 4), 6)

    def test_shrink_rejected(self):
        with pytest.raises(InputError):
            interpolate_pos_embeddings(torch.randn(1 + 196, 4), 7)

    def test_model_resolution_switch(self):
        torch.manual_seed(2)
        model = build_miniature(TOKENIZER.vocab_size, image_size=32, patch_size=16)
        model.resize_image_resolution(64)
        assert model.image_encoder.pos_embedding.shape == (1 + 16, 64)
        emb = model.embed_image(mini_images(size=64))
        assert emb.shape == (2, 64)


class TestTokenizer:
    def test_fixed_length_and_layout(self):
        toks = TOKENIZER.tokenize("a man wearing glasses")
        assert toks.ids.shape == (77,)
        assert toks.ids[0] == BOS
        assert toks.ids[toks.eos_position] == EOS
        assert np.all(toks.ids[toks.eos_position + 1 :] == PAD)

    def test_long_caption_truncates_with_eos_last(self):
        text = " ".join(["face"] * 200)
        toks = TOKENIZER.tokenize(text)
        assert toks.eos_position == 76
        assert toks.ids[76] == EOS

    def test_empty_string(self):
        toks = TOKENIZER.tokenize("")
        assert toks.eos_position == 1
        assert toks.ids[0] == BOS and toks.ids[1] == EOS

    def test_round_trip_known_words(self):
        text = "a young woman with long black hair"
        assert TOKENIZER.detokenize(TOKENIZER.tokenize(text)) == text

    def test_round_trip_byte_fallback(self):
        text = "zyzzyva qwfpgj"  # neither word in the vocabulary
        assert TOKENIZER.detokenize(TOKENIZER.tokenize(text)) == text

    def test_round_trip_mixed(self):
        text = "hello zyzzyva world"
        assert TOKENIZER.detokenize(TOKENIZER.tokenize(text)) == text

    def test_deterministic(self):
        a = TOKENIZER.tokenize("a face")
        b = TOKENIZER.tokenize("a face")
        np.testing.assert_array_equal(a.ids, b.ids)

    def test_batch_stacks(self):
        ids, eos = TOKENIZER.tokenize_batch(["a face", "a man with a hat"])
        assert ids.shape == (2, 77) and eos.shape == (2,)

    def test_token_validation(self):
        ids = np.full(77, PAD, dtype=np.int64)
        ids[0] = BOS
        ids[3] = EOS
        ids[5] = 9  # junk after eos
        with pytest.raises(InputError):
            TextTokens(ids=ids, eos_position=3)
        with pytest.raises(InputError):
            TextTokens(ids=np.zeros(10, dtype=np.int64), eos_position=1)

    def test_vocab_size_covers_bytes(self):
        assert TOKENIZER.vocab_size >= 259
        assert CONTEXT_LENGTH == 77


class TestFullSizeShapes:
    def test_default_config_dimensions(self):
        torch.manual_seed(0)
        model = VisualLinguisticModel(
            ModelConfig(vocab_size=TOKENIZER.vocab_size)
        )
        model.eval()
        assert model.image_encoder.pos_embedding.shape[0] == 197
        with torch.no_grad():
            img = torch.rand(1, 3, 224, 224)
            feats = model.encode_image(img)
            assert len(feats) == 12 and feats[0].shape == (1, 197, 768)
            ids, eos = TOKENIZER.tokenize_batch(["a portrait"])
            tfeats = model.encode_text(torch.tensor(ids))
            assert len(tfeats) == 12 and tfeats[0].shape == (1, 77, 512)
            assert model.embed_image(img).shape == (1, 512)
            assert model.embed_text(torch.tensor(ids), torch.tensor(eos)).shape == (1, 512)


class TestGradientsFlow:
    def test_backward_produces_finite_grads(self, mini):
        model = build_miniature(TOKENIZER.vocab_size)
        images = mini_images()
        ids, eos = TOKENIZER.tokenize_batch(["a face", "a man"])
        loss = (
            model.embed_image(images).sum()
            + model.embed_text(torch.tensor(ids), torch.tensor(eos)).sum()
        )
        loss.backward()
        for name, p in model.named_parameters():
            if p.grad is not None:
                assert torch.all(torch.isfinite(p.grad)), name
