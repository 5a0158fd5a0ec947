import math

import pytest
import torch

from utils.errors import DegenerateNorm, EmptyNegatives
from utils.losses import LossConfig, cosine_similarity, nt_xent_loss, triplet_loss


def _t(*values):
    return torch.tensor(values, dtype=torch.float64)


def _unit(shape, generator):
    x = torch.randn(shape, dtype=torch.float64, generator=generator)
    return x / torch.linalg.vector_norm(x, dim=-1, keepdim=True)


def test_cosine_similarity():
    u = _t(0.6, 0.8)
    assert cosine_similarity(u, u).item() == pytest.approx(1.0)
    assert cosine_similarity(u, -u).item() == pytest.approx(-1.0)
    assert cosine_similarity(_t(1.0, 0.0), _t(0.0, 1.0)).item() == pytest.approx(0.0)
    with pytest.raises(DegenerateNorm):
        cosine_similarity(u, _t(0.0, 0.0))


def test_triplet_loss_examples():
    a = _t(1.0, 0.0)
    assert triplet_loss(a, a, -a).item() == pytest.approx(0.0)
    assert triplet_loss(a, a, a).item() == pytest.approx(0.2)
    anchor = _t(0.0, 0.0)
    assert triplet_loss(anchor, _t(1.0, 0.0), _t(math.sqrt(0.5), 0.0)).item() == pytest.approx(0.7)


def test_triplet_loss_inactive_hinge_has_zero_gradient():
    a = _t(1.0, 0.0).requires_grad_()
    triplet_loss(a, _t(1.0, 0.0), _t(-1.0, 0.0)).backward()
    assert torch.equal(a.grad, torch.zeros(2, dtype=torch.float64))


def test_nt_xent_examples():
    a = _t(1.0, 0.0)
    negatives_only = LossConfig(temperature=1.0, denominator_includes_positive=False)
    assert nt_xent_loss(a, a, a.unsqueeze(0), negatives_only).item() == pytest.approx(0.0)
    assert nt_xent_loss(a, a, a.repeat(4, 1), negatives_only).item() == pytest.approx(math.log(4))
    assert nt_xent_loss(a, a, (-a).unsqueeze(0), negatives_only).item() == pytest.approx(-2.0)
    standard = LossConfig(temperature=1.0)
    assert nt_xent_loss(a, a, (-a).unsqueeze(0), standard).item() == pytest.approx(
        math.log(1 + math.exp(-2)), abs=1e-6
    )


def test_nt_xent_is_non_negative_by_default():
    generator = torch.Generator().manual_seed(0)
    anchors, positives = _unit((32, 16), generator), _unit((32, 16), generator)
    negatives = _unit((32, 8, 16), generator)
    losses = nt_xent_loss(anchors, positives, negatives)
    assert losses.shape == (32,)
    assert torch.all(losses >= 0)


def test_nt_xent_survives_tiny_temperature():
    a = _t(1.0, 0.0)
    loss = nt_xent_loss(a, (-a), a.unsqueeze(0), LossConfig(temperature=1e-4))
    assert torch.isfinite(loss)
    assert loss.item() == pytest.approx(2e4, rel=1e-6)


def test_nt_xent_needs_negatives():
    a = _t(1.0, 0.0)
    with pytest.raises(EmptyNegatives):
        nt_xent_loss(a, a, torch.zeros((0, 2), dtype=torch.float64))


@pytest.mark.parametrize(
    "kwargs", [{"margin": -0.1}, {"temperature": 0.0}, {"negatives": 0}]
)
def test_loss_config_validation(kwargs):
    with pytest.raises(ValueError):
        LossConfig(**kwargs)


def test_triplet_gradcheck():
    generator = torch.Generator().manual_seed(1)
    for _ in range(100):
        a, p, n = (_unit((4,), generator).requires_grad_() for _ in range(3))
        gap = ((a - p) ** 2).sum() - ((a - n) ** 2).sum() + 0.2
        if abs(gap.item()) < 1e-3:
            continue
        assert torch.autograd.gradcheck(lambda a, p, n: triplet_loss(a, p, n), (a, p, n), eps=1e-6, atol=1e-5)


def test_nt_xent_gradcheck():
    generator = torch.Generator().manual_seed(2)
    for flag in (True, False):
        config = LossConfig(temperature=0.5, denominator_includes_positive=flag)
        for _ in range(50):
            a, p = _unit((4,), generator).requires_grad_(), _unit((4,), generator).requires_grad_()
            n = _unit((3, 4), generator).requires_grad_()
            assert torch.autograd.gradcheck(
                lambda a, p, n: nt_xent_loss(a, p, n, config), (a, p, n), eps=1e-6, atol=1e-5
            )
