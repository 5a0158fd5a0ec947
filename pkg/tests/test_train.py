import json

import numpy as np
import pytest
import torch

import train as train_module
from generate_data import fuzz_domain
from swype import RenderConfig
from train import (
    ReferenceBank,
    TrainConfig,
    mine_hard_negatives,
    new_train_state,
    refresh_reference_bank,
    save_training_run,
    train,
    train_step,
)
from utils.domains import DomainRecord, TypoPair
from utils.encoder import load_weights, weights_fingerprint
from utils.errors import BankTooSmall, EmptyDataset, UnknownLabel


def _pairs(domains, per_domain):
    pairs = []
    for rank, name in enumerate(domains, start=1):
        pairs.extend(fuzz_domain(DomainRecord(rank, name), rules=("omission", "repetition"))[:per_domain])
    return pairs


def _bank(vectors):
    return ReferenceBank(domains=[str(i) for i in range(len(vectors))], vectors=np.asarray(vectors))


def _oracle(anchor, vectors, label, k):
    distances = np.linalg.norm(vectors - anchor, axis=1)
    scored = sorted((float(distances[i]), i) for i in range(len(vectors)) if i != label)
    return [i for _, i in scored[:k]]


def test_mining_excludes_label():
    e = np.eye(3)
    assert mine_hard_negatives(e[1], _bank(e), label_index=0, k=1) == [1]
    nearest_other = mine_hard_negatives(e[1], _bank(e), label_index=1, k=1)
    assert nearest_other == [0]


def test_mining_all_negatives_sorted():
    vectors = np.array([[0.0, 1.0], [1.0, 0.0], [0.6, 0.8], [-1.0, 0.0]])
    assert mine_hard_negatives(np.array([1.0, 0.0]), _bank(vectors), 1, 3) == [2, 0, 3]


def test_mining_ties_go_to_lower_index():
    vectors = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
    assert mine_hard_negatives(np.array([0.0, 1.0]), _bank(vectors), 0, 2) == [1, 2]


def test_mining_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        size = int(rng.integers(2, 1000))
        k = int(rng.integers(1, min(16, size - 1) + 1))
        vectors = rng.normal(size=(size, 8))
        vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
        anchor = vectors[rng.integers(size)] + rng.normal(scale=0.1, size=8)
        label = int(rng.integers(size))
        assert mine_hard_negatives(anchor, _bank(vectors), label, k) == _oracle(anchor, vectors, label, k)


def test_mining_bank_too_small():
    with pytest.raises(BankTooSmall):
        mine_hard_negatives(np.zeros(2), _bank(np.eye(2)), 0, 2)
    with pytest.raises(BankTooSmall):
        mine_hard_negatives(np.zeros(2), _bank(np.eye(2)), 0, 0)


def test_refresh_reference_bank(tiny_model, checklist):
    first = refresh_reference_bank(checklist[:1], tiny_model)
    assert first.vectors.shape == (1, 8)
    assert np.allclose(np.linalg.norm(first.vectors, axis=1), 1.0, atol=1e-5)

    a = refresh_reference_bank(checklist, tiny_model)
    b = refresh_reference_bank(checklist, tiny_model)
    assert np.array_equal(a.vectors, b.vectors)
    with torch.no_grad():
        tiny_model.blocks[-2].weight.add_(0.05)
    c = refresh_reference_bank(checklist, tiny_model)
    assert np.linalg.norm(c.vectors - a.vectors, axis=1).max() > 0


def test_refresh_every_step(tiny_config, checklist):
    config = TrainConfig(refresh_interval=1, encoder=tiny_config)
    state = new_train_state(checklist, config)
    batch = _pairs(checklist, 2)
    state, _, _ = train_step(batch, state, config)
    state, _, _ = train_step(batch, state, config)
    assert state.refreshes == 2
    assert state.step == 2


def test_refresh_schedule(tiny_config, checklist):
    config = TrainConfig(refresh_interval=2, encoder=tiny_config)
    state = new_train_state(checklist, config)
    batch = _pairs(checklist, 1)
    for _ in range(3):
        state, _, _ = train_step(batch, state, config)
    # refreshed before steps 1 and 3
    assert state.refreshes == 2
    assert state.bank.refreshed_at_step == 3


def test_nl_step_loss_is_finite_and_non_negative(tiny_config, checklist):
    config = TrainConfig(loss_kind="nl", encoder=tiny_config)
    state = new_train_state(checklist, config)
    state, loss, hardest = train_step(_pairs(checklist, 3), state, config)
    assert np.isfinite(loss) and loss >= 0
    assert 0 <= hardest <= 2


def test_tl_identical_pair_is_bounded_by_margin(tiny_config, checklist):
    config = TrainConfig(
        loss_kind="tl", encoder=tiny_config, render=RenderConfig(noise_amplitude=0.0)
    )
    state = new_train_state(checklist, config)
    _, loss, _ = train_step([TypoPair("google.com", "google.com")], state, config)
    assert loss <= config.loss.margin + 1e-6


def test_step_renders_both_sides_with_stream_noise(tiny_config, checklist, monkeypatch):
    calls = []
    original = train_module.render_batch

    def recording(domains, config, rng=None):
        calls.append((list(domains), config.seed_mode))
        return original(domains, config, rng)

    monkeypatch.setattr(train_module, "render_batch", recording)
    config = TrainConfig(encoder=tiny_config)
    state = new_train_state(checklist, config)
    train_step([TypoPair("gogle.com", "google.com")], state, config)
    assert calls[-2:] == [(["gogle.com"], "stream"), (["google.com"], "stream")]


def test_step_updates_weights(tiny_config, checklist):
    config = TrainConfig(encoder=tiny_config)
    state = new_train_state(checklist, config)
    before = weights_fingerprint(state.model)
    state, _, _ = train_step(_pairs(checklist, 2), state, config)
    assert weights_fingerprint(state.model) != before


def test_unknown_label(tiny_config, checklist):
    config = TrainConfig(encoder=tiny_config)
    with pytest.raises(UnknownLabel):
        train([TypoPair("gogle.com", "not-listed.com")], checklist, config)
    state = new_train_state(checklist, config)
    with pytest.raises(UnknownLabel):
        train_step([TypoPair("gogle.com", "not-listed.com")], state, config)


def test_empty_pairs(tiny_config, checklist):
    with pytest.raises(EmptyDataset):
        train([], checklist, TrainConfig(encoder=tiny_config))


def test_step_count(tiny_config, checklist):
    pairs = _pairs(checklist, 20)[:128]
    assert len(pairs) == 128
    _, report = train(pairs, checklist, TrainConfig(batch_size=64, encoder=tiny_config))
    assert report.steps == 2
    assert report.pairs == 128
    assert len(report.loss_curve) == 1
    assert report.loss_curve[0]["step"] == 2
    assert np.isfinite(report.final_loss)


def test_training_is_reproducible(tiny_config, checklist):
    pairs = _pairs(checklist, 4)
    config = TrainConfig(batch_size=8, refresh_interval=2, encoder=tiny_config, seed=5)
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        model_a, report_a = train(pairs, checklist, config)
        model_b, report_b = train(pairs, checklist, config)
    finally:
        torch.set_num_threads(threads)
    assert weights_fingerprint(model_a) == weights_fingerprint(model_b)
    assert report_a.loss_curve == report_b.loss_curve


def test_tl_training_runs(tiny_config, checklist):
    config = TrainConfig(loss_kind="tl", batch_size=8, encoder=tiny_config)
    _, report = train(_pairs(checklist, 2), checklist, config)
    assert report.steps == 3
    assert report.final_loss >= 0


def test_save_training_run(tiny_config, checklist, tmp_path):
    model, report = train(_pairs(checklist, 1), checklist, TrainConfig(encoder=tiny_config))
    path = str(tmp_path / "model.tsw")
    report_path = save_training_run(model, report, path)
    assert weights_fingerprint(load_weights(path)) == weights_fingerprint(model)
    with open(report_path, encoding="utf-8") as f:
        saved = json.load(f)
    assert saved["steps"] == 1
    assert saved["config"]["loss_kind"] == "nl"
    assert "mean_hardest_negative_distance" in saved["loss_curve"][0]


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(loss_kind="xent")
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
