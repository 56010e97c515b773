import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from patchgraph import autodiff as ad
from patchgraph.config import TrainConfig, toy_config
from patchgraph.data import SyntheticDomainPair
from patchgraph.errors import ContractError
from patchgraph.losses import (LossConfig, graph_loss, info_nce, lsgan_d, lsgan_g,
                               nce_from_logits, total_generator_loss)
from patchgraph.model import GraphBranch, PatchGraphModel

from conftest import check_grad


def patch_nce_oracle(src, out, indices, branch, tau):
    """Plain-numpy patch contrastive loss: head, one linear map, cosine logits."""
    c = src.shape[0]
    fa = src.reshape(c, -1).T[indices]
    fb = out.reshape(c, -1).T[indices]
    h = branch.head

    def project(f):
        hidden = np.maximum(f @ h.w1.data + h.b1.data, 0.0)
        return (hidden @ h.w2.data + h.b2.data) @ branch.gnn.hop_weights[0].data

    za, zb = project(fa), project(fb)
    # dead rows (all-zero projection) stay zero instead of dividing by 0
    za /= np.maximum(np.linalg.norm(za, axis=1, keepdims=True), 1e-12)
    zb /= np.maximum(np.linalg.norm(zb, axis=1, keepdims=True), 1e-12)
    logits = za @ zb.T / tau
    return float(np.mean(logsumexp(logits, axis=1) - np.diag(logits)))


def test_uniform_logits_give_log_m():
    for m in (2, 64, 256):
        loss = nce_from_logits(ad.Tensor(np.full((m, m), 0.37))).item()
        assert abs(loss - np.log(m)) < 1e-12


def test_two_by_two_closed_form():
    logits = ad.Tensor(np.array([[2.0, 0.0], [0.0, 2.0]]))
    assert abs(nce_from_logits(logits).item() - np.log1p(np.exp(-2.0))) < 1e-15
    assert abs(nce_from_logits(logits).item() - 0.126928) < 1e-6


def test_info_nce_unnormalised_tau_one_matches_logits():
    z = ad.Tensor(np.array([[np.sqrt(2), 0.0], [0.0, np.sqrt(2)]]))
    assert abs(info_nce(z, z, 1.0, normalize=False).item() - np.log1p(np.exp(-2.0))) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 20), st.floats(-1e3, 1e3), st.integers(0, 2**31))
def test_row_shift_invariance(m, shift, seed):
    r = np.random.default_rng(seed)
    logits = r.normal(size=(m, m)) * 5
    shifts = shift * r.uniform(size=(m, 1))
    a = nce_from_logits(ad.Tensor(logits)).item()
    b = nce_from_logits(ad.Tensor(logits + shifts)).item()
    assert abs(a - b) < 1e-12 * max(1.0, abs(a))


def test_huge_logits_are_stable():
    logits = np.array([[1e4, 0.0], [0.0, 1e4]])
    assert nce_from_logits(ad.Tensor(logits)).item() == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 16), st.integers(0, 2**31))
def test_info_nce_nonnegative_when_normalised(m, seed):
    r = np.random.default_rng(seed)
    z, v = ad.Tensor(r.normal(size=(m, 4))), ad.Tensor(r.normal(size=(m, 4)))
    assert info_nce(z, v, 0.07).item() >= 0.0


def test_info_nce_limit_goes_to_zero():
    z = ad.Tensor(np.eye(3))
    assert info_nce(z, z, 1e-3).item() < 1e-12


def test_info_nce_needs_a_negative():
    with pytest.raises(ContractError):
        info_nce(ad.Tensor(np.ones((1, 3))), ad.Tensor(np.ones((1, 3))), 0.07)


def test_info_nce_gradient(rng):
    v = ad.Tensor(rng.normal(size=(5, 3)))
    assert check_grad(lambda z: info_nce(z, v, 0.5), rng.normal(size=(5, 3))) < 1e-6


def test_loss_config_invariants():
    with pytest.raises(ContractError):
        LossConfig(temperature=0.0)
    with pytest.raises(ContractError):
        LossConfig(pooling_levels=-1)


def _branch_case(seed, hops=0, levels=0, ratio=0.25):
    r = np.random.default_rng(seed)
    cfg = TrainConfig(hops=hops, pooling_levels=levels, keep_ratio=ratio, head_dim=6,
                      embed_dim=5, num_patches=int(r.integers(4, 30)))
    c = int(r.integers(2, 6))
    src, out = r.normal(size=(c, 6, 6)), r.normal(size=(c, 6, 6))
    branch = GraphBranch(c, cfg, r, 0)
    return cfg, src, out, branch


def test_zero_hops_no_pooling_equals_patch_nce_oracle():
    worst = 0.0
    for seed in range(100):
        cfg, src, out, branch = _branch_case(seed)
        loss_cfg = LossConfig.from_config(cfg)
        memo = {}
        loss = graph_loss([ad.Tensor(src)], [ad.Tensor(out)], [branch], loss_cfg, seed, memo)
        indices = memo[("layer", 0)][0]
        ref = patch_nce_oracle(src, out, indices, branch, cfg.temperature)
        assert np.isfinite(ref)
        worst = max(worst, abs(loss.total.item() - ref))
    assert worst < 1e-12


def test_no_pooling_keeps_only_base_level():
    cfg, src, out, branch = _branch_case(3, hops=2)
    loss = graph_loss([ad.Tensor(src)], [ad.Tensor(out)], [branch], LossConfig.from_config(cfg), 0)
    assert len(loss.levels) == 1
    assert loss.total is loss.levels[0]


def test_levels_sum_to_total():
    cfg, src, out, branch = _branch_case(4, hops=2, levels=2, ratio=0.5)
    cfg = cfg.replace(num_patches=24)
    loss = graph_loss([ad.Tensor(src)] * 2, [ad.Tensor(out)] * 2, [branch, branch],
                      LossConfig.from_config(cfg), 0)
    assert len(loss.levels) == 3
    assert loss.total.item() == pytest.approx(sum(t.item() for t in loss.levels), rel=1e-14)


def test_equal_branches_beat_uniform_baseline():
    cfg, src, _, branch = _branch_case(5, hops=2, levels=1)
    cfg = cfg.replace(num_patches=24)
    loss = graph_loss([ad.Tensor(src)], [ad.Tensor(src)], [branch], LossConfig.from_config(cfg), 0)
    assert loss.levels[0].item() < np.log(24)
    assert loss.levels[1].item() < np.log(6)


def test_aligned_output_beats_random_generators():
    """Feeding x itself as the output should beat a freshly seeded generator on average."""
    data = SyntheticDomainPair(16, 0)
    aligned, translated = [], []
    for seed in range(50):
        cfg = toy_config(TrainConfig(model_seed=seed))
        model = PatchGraphModel(cfg)
        x = ad.Tensor(data.x(seed))
        taps = model.encoder.taps(x)
        loss_cfg = LossConfig.from_config(cfg)
        aligned.append(graph_loss(taps, taps, model.branches, loss_cfg, seed).total.item())
        fake_taps = model.encoder.taps(model.generator(x))
        translated.append(graph_loss(taps, fake_taps, model.branches, loss_cfg, seed).total.item())
    assert np.mean(aligned) <= np.mean(translated)


def test_lsgan_examples(rng):
    ones, zeros = ad.Tensor(np.ones((1, 4, 4))), ad.Tensor(np.zeros((1, 4, 4)))
    assert lsgan_d(ones, zeros).item() == 0.0
    assert lsgan_d(zeros, ones).item() == 2.0
    assert lsgan_g(ones).item() == 0.0
    assert lsgan_g(zeros).item() == 1.0
    real, fake = rng.normal(size=(1, 5, 5)), rng.normal(size=(1, 5, 5))
    expected = np.mean((real - 1) ** 2) + np.mean(fake ** 2)
    assert lsgan_d(ad.Tensor(real), ad.Tensor(fake)).item() == pytest.approx(expected, rel=1e-14)


def test_lsgan_g_gradient(rng):
    d = rng.normal(size=(1, 3, 3))
    t = ad.Tensor(d, requires_grad=True)
    lsgan_g(t).backward()
    np.testing.assert_allclose(t.grad, 2 * (d - 1) / d.size, rtol=1e-14)
    assert check_grad(lsgan_g, d) < 1e-7


def _toy_model(lambda_g=1.0):
    cfg = toy_config(TrainConfig(lambda_g=lambda_g))
    data = SyntheticDomainPair(16, 0)
    return cfg, PatchGraphModel(cfg), ad.Tensor(data.x(0)), ad.Tensor(data.y(0))


def test_zero_lambda_is_pure_adversarial():
    cfg, model, x, y = _toy_model(0.0)
    loss = total_generator_loss(x, y, model, LossConfig.from_config(cfg), 0)
    assert loss.total.item() == loss.gan.item()


def test_total_is_sum_of_nonnegative_terms():
    cfg, model, x, y = _toy_model(1.0)
    loss = total_generator_loss(x, y, model, LossConfig.from_config(cfg), 0)
    parts = [loss.gan.item(), loss.graph.total.item(), loss.identity.total.item()]
    assert min(parts) >= 0
    assert loss.total.item() == pytest.approx(sum(parts), rel=1e-14)


def test_identity_term_uses_the_same_path():
    cfg, model, x, y = _toy_model(1.0)
    loss_cfg = LossConfig.from_config(cfg)
    # an integer seed re-seeds every sampling call, so call order does not matter
    swapped = total_generator_loss(y, x, model, loss_cfg, 1)
    direct = graph_loss(model.encoder.taps(x), model.encoder.taps(model.generator(x)),
                        model.branches, loss_cfg, 1)
    ref = total_generator_loss(x, y, model, loss_cfg, 1)
    assert swapped.identity.total.item() == ref.graph.total.item() == direct.total.item()
