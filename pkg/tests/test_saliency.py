"""Text-conditioned Grad-CAM: placement, gradients, normalization, export."""

import numpy as np
import pytest
import torch

from facerep.data.images import load_image
from facerep.encoders.model import build_miniature
from facerep.encoders.tokenizer import TextTokenizer
from facerep.errors import InputError
from facerep.saliency import (
    SaliencyMap,
    gradcam,
    save_overlay,
    save_saliency_grid,
    staged_image_forward,
)

TOKENIZER = TextTokenizer()


def make_model(image_size=32, seed=0):
    torch.manual_seed(seed)
    return build_miniature(TOKENIZER.vocab_size, image_size=image_size)


def make_image(size=32, seed=1):
    torch.manual_seed(seed)
    return torch.rand(3, size, size)


class TestSaliencyMap:
    def test_valid_grid_accepted(self):
        s = SaliencyMap(values=np.array([[0.0, 1.0], [0.5, 0.25]]), degenerate=False)
        assert s.values.dtype == np.float64

    def test_non_square_rejected(self):
        with pytest.raises(InputError):
            SaliencyMap(values=np.zeros((2, 3)), degenerate=False)

    def test_out_of_range_rejected(self):
        with pytest.raises(InputError):
            SaliencyMap(values=np.array([[0.0, 1.5], [0.0, 0.0]]), degenerate=False)

    def test_degenerate_must_be_all_zero(self):
        with pytest.raises(InputError):
            SaliencyMap(values=np.array([[0.0, 0.1], [0.0, 0.0]]), degenerate=True)


class TestGradcam:
    def test_shape_and_range_contract(self):
        model = make_model(image_size=64)
        saliency = gradcam(model, make_image(64), "a smiling face", TOKENIZER)
        assert saliency.values.shape == (4, 4)
        assert float(saliency.values.min()) >= 0.0
        assert float(saliency.values.max()) <= 1.0
        if not saliency.degenerate:
            assert float(saliency.values.min()) == 0.0
            assert float(saliency.values.max()) == 1.0

    def test_deterministic_rerun(self):
        model = make_model()
        image = make_image()
        first = gradcam(model, image, "short hair", TOKENIZER)
        second = gradcam(model, image, "short hair", TOKENIZER)
        assert first.degenerate == second.degenerate
        assert np.array_equal(first.values, second.values)

    def test_query_changes_map(self):
        model = make_model(image_size=64, seed=3)
        image = make_image(64, seed=4)
        a = gradcam(model, image, "red lipstick", TOKENIZER)
        b = gradcam(model, image, "wearing eyeglasses", TOKENIZER)
        assert not np.array_equal(a.values, b.values)

    def test_constant_activation_gradient_degenerates(self):
        model = make_model(seed=5)
        # Zeroed attention output removes every path from the tapped
        # activation to the embedding, so its gradient is identically zero.
        last = model.image_encoder.blocks[-1]
        with torch.no_grad():
            last.attn.out_proj.weight.zero_()
            last.attn.out_proj.bias.zero_()
        saliency = gradcam(model, make_image(seed=6), "a face", TOKENIZER)
        assert saliency.degenerate
        assert not saliency.values.any()

    def test_input_validation(self):
        model = make_model()
        with pytest.raises(InputError):
            gradcam(model, make_image(), "   ", TOKENIZER)
        with pytest.raises(InputError):
            gradcam(model, torch.rand(2, 3, 32, 32), "a face", TOKENIZER)
        with pytest.raises(InputError):
            gradcam(model, torch.rand(1, 32, 32), "a face", TOKENIZER)

    def test_accepts_unbatched_and_batched(self):
        model = make_model(seed=7)
        image = make_image(seed=8)
        a = gradcam(model, image, "a face", TOKENIZER)
        b = gradcam(model, image[None], "a face", TOKENIZER)
        assert np.array_equal(a.values, b.values)


class TestHookPlacement:
    def test_tap_is_first_norm_of_final_block(self):
        model = make_model(seed=9)
        image = make_image(seed=10)[None]
        captured = []
        handle = model.image_encoder.blocks[-1].ln_1.register_forward_hook(
            lambda module, args, output: captured.append(output.detach())
        )
        try:
            with torch.no_grad():
                expected = model.embed_image(image)
        finally:
            handle.remove()
        embedding, normed = staged_image_forward(model, image)
        assert torch.equal(captured[0], normed.detach())
        assert torch.equal(embedding.detach(), expected)

    def test_hook_gradient_matches_finite_differences(self):
        model = make_model(seed=11).double()
        enc = model.image_encoder
        torch.manual_seed(12)
        image = torch.rand(1, 3, 32, 32, dtype=torch.float64)
        tokens = TOKENIZER.tokenize("an old photo of a face")
        with torch.no_grad():
            text_embed = model.embed_text(
                torch.from_numpy(tokens.ids)[None],
                torch.tensor([tokens.eos_position]),
            )
            x = enc.embed_tokens(image) + enc.pos_embedding
            for block in enc.blocks[:-1]:
                x = block(x)
        normed = enc.blocks[-1].ln_1(x).detach().clone().requires_grad_(True)

        def objective():
            out = enc.blocks[-1].finish(x, normed)
            embedding = model.image_proj(enc.ln_post(out[:, 0]))
            return (embedding * text_embed).sum()

        (grad,) = torch.autograd.grad(objective(), normed)
        flat = normed.data.view(-1)
        gflat = grad.reshape(-1)
        eps = 1e-5
        for k in range(0, flat.numel(), 37):
            orig = float(flat[k])
            flat[k] = orig + eps
            up = float(objective().detach())
            flat[k] = orig - eps
            down = float(objective().detach())
            flat[k] = orig
            fd = (up - down) / (2 * eps)
            an = float(gflat[k])
            assert abs(an - fd) <= 1e-3 * max(1.0, abs(fd)), (k, an, fd)


class TestExport:
    def test_grid_round_trips_as_text(self, tmp_path):
        model = make_model(seed=13)
        saliency = gradcam(model, make_image(seed=14), "a face", TOKENIZER)
        path = tmp_path / "saliency.txt"
        save_saliency_grid(path, saliency)
        loaded = np.loadtxt(path)
        assert loaded.shape == saliency.values.shape
        assert np.allclose(loaded, saliency.values, atol=1e-6)

    def test_overlay_written_losslessly(self, tmp_path):
        image = make_image(seed=15)
        saliency = SaliencyMap(values=np.zeros((2, 2)), degenerate=True)
        path = tmp_path / "overlay.png"
        save_overlay(path, saliency, image)
        loaded = load_image(path)
        assert loaded.shape == (32, 32, 3)
        # Zero saliency leaves the image untouched up to 8-bit rounding.
        original = image.permute(1, 2, 0).numpy()
        assert np.abs(loaded - original).max() <= 0.5 / 255 + 1e-9

    def test_overlay_tints_salient_regions(self, tmp_path):
        image = torch.full((3, 32, 32), 0.5)
        values = np.zeros((2, 2))
        values[0, 0] = 1.0
        saliency = SaliencyMap(values=values, degenerate=False)
        path = tmp_path / "tinted.png"
        save_overlay(path, saliency, image)
        loaded = load_image(path)
        assert loaded[0, 0, 0] > 0.5  # red boosted
        assert loaded[0, 0, 1] < 0.5  # green attenuated

    def test_overlay_rejects_bad_image(self, tmp_path):
        saliency = SaliencyMap(values=np.zeros((2, 2)), degenerate=True)
        with pytest.raises(InputError):
            save_overlay(tmp_path / "x.png", saliency, torch.rand(1, 32, 32))
