"""
Metric-learning training loop for the swype encoder.

Each step renders a batch of (typo, source) pairs with stream noise, embeds
both sides, mines the hardest negatives for every anchor from a reference
bank of checking-list embeddings, and applies one Adam update under either
the NT-Xent ("nl") or the triplet ("tl") loss. The bank is a detached
snapshot refreshed on the first step and every `refresh_interval` steps after.
"""

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
import torch

from swype import RenderConfig, render_batch
from utils.encoder import EncoderConfig, SwypeEncoder, forward_batch, init_weights, save_weights
from utils.errors import BankTooSmall, EmptyDataset, NonFiniteLoss, UnknownLabel
from utils.io import save_json
from utils.logger import logger
from utils.losses import LossConfig, nt_xent_loss, triplet_loss

LOSS_KINDS = ("nl", "tl")


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: str = "nl"
    batch_size: int = 64
    refresh_interval: int = 100
    epochs: int = 1
    learning_rate: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.refresh_interval < 1:
            raise ValueError(f"refresh_interval must be >= 1, got {self.refresh_interval}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class ReferenceBank:
    domains: list
    vectors: np.ndarray  # (len(domains), embedding_dim), unit rows
    refreshed_at_step: int = 0

    def __len__(self):
        return len(self.domains)


@dataclass
class TrainState:
    model: SwypeEncoder
    optimizer: torch.optim.Optimizer
    checking_list: list
    label_index: dict
    rng: np.random.Generator
    bank: Optional[ReferenceBank] = None
    step: int = 0
    refreshes: int = 0


@dataclass
class TrainReport:
    steps: int
    epochs: int
    pairs: int
    checking_list_size: int
    seed: int
    wall_time_seconds: float
    loss_curve: list
    config: dict

    @property
    def final_loss(self):
        return self.loss_curve[-1]["mean_loss"] if self.loss_curve else float("nan")

    def to_dict(self):
        return asdict(self)


def refresh_reference_bank(domains, model, render_config=RenderConfig(), step=0):
    """
    Embed every checking-list domain with canonical noise and the current weights.

    Returns:
        ReferenceBank: rows in input order
    """
    if len(domains) == 0:
        raise EmptyDataset("Cannot build a reference bank from an empty checking list")
    canonical = replace(render_config, seed_mode="canonical")
    images = render_batch(domains, canonical)
    vectors = forward_batch(images, model)
    logger.debug(f"Refreshed reference bank of {len(domains)} domains at step {step}")
    return ReferenceBank(domains=list(domains), vectors=vectors, refreshed_at_step=step)


def mine_hard_negatives(anchor, bank, label_index, k):
    """
    Indices of the k bank rows nearest to `anchor`, excluding the label row.

    Ascending by Euclidean distance, ties broken by lower index.

    Raises:
        BankTooSmall: if k is not in [1, len(bank) - 1]
    """
    if not 1 <= k <= len(bank) - 1:
        raise BankTooSmall(f"Cannot mine {k} negatives from a bank of {len(bank)}")
    if not 0 <= label_index < len(bank):
        raise UnknownLabel(f"Label index {label_index} outside bank of {len(bank)}")
    distances = np.linalg.norm(
        bank.vectors.astype(np.float64) - np.asarray(anchor, dtype=np.float64), axis=1
    )
    distances[label_index] = np.inf
    return [int(i) for i in np.argsort(distances, kind="stable")[:k]]


def _embed(model, images):
    dtype = next(model.parameters()).dtype
    return model(torch.from_numpy(np.stack(images)).to(dtype))


def train_step(batch, state, config):
    """
    Run one optimisation step.

    Returns:
        tuple: (state, mean batch loss, mean anchor-to-hardest-negative distance)
    """
    if len(batch) == 0:
        raise EmptyDataset("Empty training batch")
    if state.bank is None or state.step % config.refresh_interval == 0:
        state.bank = refresh_reference_bank(
            state.checking_list, state.model, config.render, step=state.step + 1
        )
        state.refreshes += 1

    try:
        labels = [state.label_index[pair.source_domain] for pair in batch]
    except KeyError as e:
        raise UnknownLabel(f"Source {e.args[0]!r} is not in the checking list") from None

    stream = replace(config.render, seed_mode="stream")
    anchor_images = render_batch([pair.typo_domain for pair in batch], stream, state.rng)
    positive_images = render_batch([pair.source_domain for pair in batch], stream, state.rng)

    state.model.train()
    anchors = _embed(state.model, anchor_images)
    positives = _embed(state.model, positive_images)

    k = config.loss.negatives
    anchor_values = anchors.detach().cpu().numpy()
    negative_index = np.array(
        [mine_hard_negatives(anchor_values[i], state.bank, labels[i], k) for i in range(len(batch))]
    )
    bank_negatives = state.bank.vectors[negative_index]  # (B, k, D), constants
    hardest_distance = float(
        np.linalg.norm(anchor_values - bank_negatives[:, 0, :], axis=1).mean()
    )
    negatives = torch.from_numpy(bank_negatives).to(anchors.dtype)

    if config.loss_kind == "nl":
        losses = nt_xent_loss(anchors, positives, negatives, config.loss)
    else:
        choice = state.rng.integers(0, k, size=len(batch))
        picked = negatives[torch.arange(len(batch)), torch.from_numpy(choice)]
        losses = triplet_loss(anchors, positives, picked, config.loss)
    loss = losses.mean()

    if not torch.isfinite(loss):
        worst = [batch[i] for i in torch.nonzero(~torch.isfinite(losses)).flatten().tolist()]
        logger.error(f"Non-finite loss at step {state.step + 1}; offending pairs: {worst[:5]}")
        raise NonFiniteLoss(f"Non-finite loss at step {state.step + 1}")

    state.optimizer.zero_grad()
    loss.backward()
    state.optimizer.step()
    state.step += 1
    return state, float(loss.item()), hardest_distance


def new_train_state(checking_list, config, model=None):
    model = model if model is not None else init_weights(config.encoder, config.seed)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.learning_rate, betas=config.betas, eps=config.eps
    )
    return TrainState(
        model=model,
        optimizer=optimizer,
        checking_list=list(checking_list),
        label_index={domain: i for i, domain in enumerate(checking_list)},
        rng=np.random.default_rng(config.seed),
    )


def train(pairs, checking_list, config=TrainConfig()):
    """
    Train an encoder on typo pairs against a checking list.

    Args:
        pairs (list[TypoPair]): Training pairs; every source must be in the checking list
        checking_list (list[str]): Protected domains (reference bank contents)
        config (TrainConfig): Hyperparameters

    Returns:
        tuple: (SwypeEncoder, TrainReport)
    """
    if len(pairs) == 0:
        raise EmptyDataset("No training pairs")
    known = set(checking_list)
    unknown = sorted({p.source_domain for p in pairs if p.source_domain not in known})
    if unknown:
        logger.error(f"{len(unknown)} pair sources missing from the checking list, e.g. {unknown[:3]}")
        raise UnknownLabel(f"Pair sources missing from the checking list: {unknown[:3]}")

    torch.manual_seed(config.seed)
    state = new_train_state(checking_list, config)
    logger.info(
        f"Training {config.loss_kind.upper()} on {len(pairs)} pairs, "
        f"{len(checking_list)} reference domains, batch {config.batch_size}"
    )

    started = time.perf_counter()
    curve = []
    window_losses, window_distances = [], []

    def flush():
        if window_losses:
            curve.append(
                {
                    "step": state.step,
                    "mean_loss": float(np.mean(window_losses)),
                    "mean_hardest_negative_distance": float(np.mean(window_distances)),
                }
            )
            logger.info(
                f"step {state.step}: loss {curve[-1]['mean_loss']:.4f}, "
                f"hardest negative distance {curve[-1]['mean_hardest_negative_distance']:.4f}"
            )
            window_losses.clear()
            window_distances.clear()

    for epoch in range(config.epochs):
        order = state.rng.permutation(len(pairs))
        for start in range(0, len(order), config.batch_size):
            batch = [pairs[i] for i in order[start : start + config.batch_size]]
            state, loss, hardest = train_step(batch, state, config)
            window_losses.append(loss)
            window_distances.append(hardest)
            if state.step % config.refresh_interval == 0:
                flush()
        logger.info(f"Finished epoch {epoch + 1}/{config.epochs}")
    flush()

    report = TrainReport(
        steps=state.step,
        epochs=config.epochs,
        pairs=len(pairs),
        checking_list_size=len(checking_list),
        seed=config.seed,
        wall_time_seconds=time.perf_counter() - started,
        loss_curve=curve,
        config=asdict(config),
    )
    return state.model, report


def save_training_run(model, report, path):
    """Write the TSW1 weights to `path` and the report to `<path>.report.json`."""
    save_weights(model, path)
    report_path = f"{path}.report.json"
    save_json(report_path, report.to_dict())
    logger.success(f"Saved training report to {report_path}")
    return report_path
