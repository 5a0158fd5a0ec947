"""
Metric-learning losses over encoder embeddings (torch tensors, last dim = features).

All functions broadcast over leading batch dimensions and return per-example
values; callers reduce with .mean().
"""

from dataclasses import dataclass

import torch

from utils.errors import DegenerateNorm, EmptyNegatives

NORM_EPS = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """
    Attributes:
        margin (float): Triplet margin M
        temperature (float): NT-Xent temperature tau
        negatives (int): Hard negatives per anchor (b_n)
        denominator_includes_positive (bool): Add the positive term to the
            NT-Xent denominator (standard softmax cross-entropy form). When
            False the denominator sums negatives only and the loss can go negative.
    """

    margin: float = 0.2
    temperature: float = 0.1
    negatives: int = 8
    denominator_includes_positive: bool = True

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.negatives < 1:
            raise ValueError(f"negatives must be >= 1, got {self.negatives}")


def cosine_similarity(u, v):
    """u.v / (|u| |v|) along the last dimension."""
    u_norm = torch.linalg.vector_norm(u, dim=-1)
    v_norm = torch.linalg.vector_norm(v, dim=-1)
    if (u_norm <= NORM_EPS).any() or (v_norm <= NORM_EPS).any():
        raise DegenerateNorm("Cosine similarity of a zero vector is undefined")
    return (u * v).sum(dim=-1) / (u_norm * v_norm)


def squared_distance(u, v):
    return ((u - v) ** 2).sum(dim=-1)


def triplet_loss(anchor, positive, negative, config=LossConfig()):
    """max(|a - p|^2 - |a - n|^2 + M, 0); zero gradient while the hinge is inactive."""
    gap = squared_distance(anchor, positive) - squared_distance(anchor, negative)
    return torch.clamp(gap + config.margin, min=0.0)


def nt_xent_loss(anchor, positive, negatives, config=LossConfig()):
    """
    NT-Xent loss of one anchor/positive pair against a set of negatives.

    Args:
        anchor (Tensor): (..., D)
        positive (Tensor): (..., D)
        negatives (Tensor): (..., K, D), K >= 1
        config (LossConfig): temperature and denominator form

    Returns:
        Tensor: (...) per-example loss
    """
    if negatives.shape[-2] == 0:
        raise EmptyNegatives("NT-Xent needs at least one negative")
    tau = config.temperature
    positive_logit = cosine_similarity(anchor, positive) / tau
    negative_logits = cosine_similarity(anchor.unsqueeze(-2), negatives) / tau
    if config.denominator_includes_positive:
        logits = torch.cat([positive_logit.unsqueeze(-1), negative_logits], dim=-1)
    else:
        logits = negative_logits
    # logsumexp shifts by the max before exponentiating
    return torch.logsumexp(logits, dim=-1) - positive_logit
