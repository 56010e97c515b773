import numpy as np
import pytest

from patchgraph import autodiff as ad
from patchgraph.config import TrainConfig
from patchgraph.errors import ShapeError
from patchgraph.networks import Discriminator, Encoder, Generator, discriminate, encode_taps, generate


@pytest.fixture(scope="module")
def nets():
    r = np.random.default_rng(0)
    return Encoder(3, (32, 64, 64), r), Generator(3, 8, 1, r), Discriminator(3, 8, r)


def test_tap_shapes_for_default_size(nets):
    enc, _, _ = nets
    taps = encode_taps(enc, ad.Tensor(np.random.default_rng(1).uniform(-1, 1, (3, 64, 64))))
    assert [t.shape for t in taps] == [(32, 32, 32), (64, 16, 16), (64, 16, 16)]


def test_zero_image_gives_constant_maps(nets):
    enc, _, _ = nets
    for t in encode_taps(enc, ad.Tensor(np.zeros((3, 16, 16)))):
        np.testing.assert_array_equal(t.data, 0.0)  # zero biases propagate zeros


def test_encoder_is_bitwise_repeatable_and_frozen(nets):
    enc, _, _ = nets
    x = ad.Tensor(np.random.default_rng(2).uniform(-1, 1, (3, 16, 16)))
    a, b = encode_taps(enc, x), encode_taps(enc, x)
    assert all(u.data.tobytes() == v.data.tobytes() for u, v in zip(a, b))
    assert not any(p.requires_grad for p in enc.parameters())
    ad.sum(a[2]).backward()
    assert all(p.grad is None for p in enc.parameters())


def test_indivisible_sizes_rejected(nets):
    enc, gen, disc = nets
    odd = ad.Tensor(np.zeros((3, 18, 18)))
    for fn in (enc.taps, gen, disc):
        with pytest.raises(ShapeError):
            fn(odd)


def test_generator_shape_and_bounds(nets):
    _, gen, _ = nets
    x = ad.Tensor(np.random.default_rng(3).uniform(-1, 1, (3, 16, 16)) * 5)
    out = generate(gen, x)
    assert out.shape == x.shape
    assert np.all(np.abs(out.data) <= 1.0)


def test_untrained_generator_is_near_identity(nets):
    _, gen, _ = nets
    x = np.random.default_rng(4).uniform(-0.9, 0.9, (3, 16, 16))
    assert np.abs(generate(gen, ad.Tensor(x)).data - x).mean() < 0.1


def test_discriminator_patch_map(nets):
    _, _, disc = nets
    assert discriminate(disc, ad.Tensor(np.zeros((3, 64, 64)))).shape == (1, 16, 16)
    assert discriminate(disc, ad.Tensor(np.zeros((3, 16, 16)))).shape == (1, 4, 4)


def test_gradient_reaches_every_generator_tensor(nets):
    _, gen, disc = nets
    x = ad.Tensor(np.random.default_rng(5).uniform(-1, 1, (3, 16, 16)))
    gen_params = gen.parameters()
    for p in gen_params:
        p.grad = None
    ad.mean(discriminate(disc, generate(gen, x))).backward()
    assert all(p.grad is not None and np.any(p.grad) for p in gen_params if p.name.endswith("weight"))


def test_parameter_names_unique():
    from patchgraph.model import PatchGraphModel
    model = PatchGraphModel(TrainConfig(image_size=16, num_patches=16, embed_dim=8, head_dim=8))
    named = model.named_parameters()
    assert len({id(t) for t in named.values()}) == len(named)
    trainable = model.generator_side_parameters() + model.discriminator_parameters()
    assert len({id(t) for t in trainable}) == len(trainable)
    assert {id(t) for t in trainable} == {id(t) for n, t in named.items() if not n.startswith("E.")}
