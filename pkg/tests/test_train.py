import dataclasses
import math

import numpy as np
import pytest

from emocause.data import build_vocabulary, load_dataset
from emocause.model import ResponseModel
from emocause.nn import ParamRegistry, load_checkpoint, no_grad, ops
from emocause.pipeline import prepare_split
from emocause.store import load_store
from emocause.train import (
    Adam,
    TrainingDiverged,
    compute_losses,
    learning_rate,
    teacher_forced_stats,
    train,
)

from conftest import make_tiny_config


@pytest.fixture(scope="module")
def world(request, tmp_path_factory):
    store_files = request.getfixturevalue("store_files")
    corpus20 = request.getfixturevalue("corpus20")
    out = tmp_path_factory.mktemp("train-world")
    cfg = make_tiny_config(store_files, corpus20[1], out, detector="oracle",
                           annotations_path=corpus20[2])
    store = load_store(cfg.store_path, cfg.embeddings_path)
    vocab = build_vocabulary(load_dataset(cfg.dataset_path, "train"),
                             cfg.vocab_size)
    examples, _ = prepare_split(cfg, "train", vocab, store)
    return cfg, store, vocab, examples


class TestComputeLosses:
    def test_uniform_emotion_prediction_costs_log_32(self, world):
        cfg, store, vocab, examples = world
        model = ResponseModel(cfg, vocab, store)  # zero-init emotion head
        fp = model.forward(examples[0])
        l_e, l_g, total = compute_losses(fp, examples[0], 1.0)
        assert abs(l_e.item() - math.log(32)) < 1e-6

    def test_zero_weight_gives_generation_loss_exactly(self, world):
        cfg, store, vocab, examples = world
        model = ResponseModel(cfg, vocab, store)
        fp = model.forward(examples[0])
        l_e, l_g, total = compute_losses(fp, examples[0], 0.0)
        assert total.item() == l_g.item()

    def test_total_is_weighted_sum_to_machine_precision(self, world):
        cfg, store, vocab, examples = world
        model = ResponseModel(cfg, vocab, store)
        for lam in (0.5, 1.0, 2.0):
            fp = model.forward(examples[1])
            l_e, l_g, total = compute_losses(fp, examples[1], lam)
            # single-precision model: machine precision of float32 values
            assert total.item() == pytest.approx(
                l_g.item() + lam * l_e.item(), rel=1e-6)

    def test_near_perfect_predictions_cost_near_zero(self, world):
        cfg, store, vocab, examples = world

        class Sharp:
            def __init__(self, ex):
                t = len(ex.target_ids)
                probs = np.full((t, len(vocab)), 1e-9, dtype=np.float64)
                probs[np.arange(t), ex.target_ids] = 1.0
                self.mix = type("M", (), {"mixed": ops.as_constant(probs)})()
                emo = np.full(32, 1e-12)
                emo[ex.emotion_label] = 1.0
                self.emotion_probs = ops.as_constant(emo)

        ex = examples[0]
        l_e, l_g, total = compute_losses(Sharp(ex), ex, 1.0)
        assert total.item() < 1e-6


class TestLearningRate:
    def test_constant_by_default(self, world):
        cfg = dataclasses.replace(world[0], lr=1e-4, lr_decay=1.0)
        assert learning_rate(cfg, 1) == learning_rate(cfg, 5000) == 1e-4

    def test_paper_style_decay_with_floor(self, world):
        cfg = dataclasses.replace(world[0], lr=0.1, lr_decay=0.1,
                                  lr_decay_interval=500, lr_floor=1e-5)
        assert learning_rate(cfg, 1) == pytest.approx(0.1)
        assert learning_rate(cfg, 500) == pytest.approx(0.01)
        assert learning_rate(cfg, 1500) == pytest.approx(1e-4)
        assert learning_rate(cfg, 5000) == pytest.approx(1e-5)


class TestAdam:
    def test_minimizes_a_quadratic(self):
        reg = ParamRegistry()
        t = reg.add("x", np.array([5.0, -3.0], dtype=np.float64))
        opt = Adam(reg)
        for _ in range(800):
            reg.zero_grads()
            loss = ops.sum_all(ops.mul(t, t))
            loss.backward()
            opt.step(0.05)
        assert np.abs(t.data).max() < 1e-3

    def test_skips_frozen_parameters(self):
        reg = ParamRegistry()
        live = reg.add("a", np.ones(2, dtype=np.float64))
        frozen = reg.add("b", np.ones(2, dtype=np.float64), trainable=False)
        opt = Adam(reg)
        reg.zero_grads()
        ops.sum_all(ops.mul(ops.add(live, frozen), ops.add(live, frozen))).backward()
        opt.step(0.1)
        np.testing.assert_array_equal(frozen.data, np.ones(2))
        assert not np.array_equal(live.data, np.ones(2))


class TestTrainLoop:
    def test_single_example_memorization(self, world, tmp_path):
        # capacity sanity for the seq2seq backbone: the reply avoids store
        # concepts, so nothing caps the gold probability short of 1 (gold
        # probability at concept positions is bounded by the pointer mix)
        import csv

        cfg, store, vocab, examples = world
        path = tmp_path / "one.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=[
                "conv_id", "utterance_idx", "context", "prompt", "utterance",
                "split"])
            writer.writeheader()
            prompt = "my door alpha saw the shadow near the market monday ."
            writer.writerow(dict(conv_id="m1", utterance_idx=1, context="sad",
                                 prompt=prompt, split="train",
                                 utterance="the shadow appeared because of the"
                                           " dust _comma_ i feel so scared ."))
            writer.writerow(dict(conv_id="m1", utterance_idx=2, context="sad",
                                 prompt=prompt, split="train",
                                 utterance="oh alpha _comma_ you did well"
                                           " _comma_ take it easy now ."))
        cfg1 = dataclasses.replace(cfg, max_steps=1500, batch_size=1, lr=5e-3,
                                   validate_every=0, dataset_path=str(path),
                                   detector="lexical", annotations_path="")
        one, _ = prepare_split(cfg1, "train", vocab, store)
        assert len(one) == 1
        model = ResponseModel(cfg1, vocab, store)
        train(model, one, cfg1)
        fp = model.forward(one[0])
        _, l_g, _ = compute_losses(fp, one[0], cfg1.loss_weight)
        assert l_g.item() < 0.01

    def test_same_seed_gives_identical_loss_sequences(self, world):
        cfg, store, vocab, examples = world
        cfg2 = dataclasses.replace(cfg, max_steps=12, validate_every=0)
        r1 = train(ResponseModel(cfg2, vocab, store), examples, cfg2)
        r2 = train(ResponseModel(cfg2, vocab, store), examples, cfg2)
        assert r1.history == r2.history

    def test_divergence_aborts_and_saves_last_good(self, world, tmp_path):
        cfg, store, vocab, examples = world
        # an absurd learning rate blows the parameters up after one update
        cfg3 = dataclasses.replace(cfg, max_steps=30, validate_every=0, lr=1e12)
        model = ResponseModel(cfg3, vocab, store)
        ckpt = tmp_path / "aborted.ckpt"
        with pytest.raises(TrainingDiverged, match="non-finite"):
            train(model, examples, cfg3, checkpoint_path=str(ckpt))
        state = load_checkpoint(str(ckpt))
        for arr in state.values():
            assert np.isfinite(arr).all()

    def test_metrics_log_lines(self, world, tmp_path):
        import io

        cfg, store, vocab, examples = world
        cfg4 = dataclasses.replace(cfg, max_steps=3, validate_every=0)
        stream = io.StringIO()
        train(ResponseModel(cfg4, vocab, store), examples, cfg4,
              log_stream=stream)
        lines = stream.getvalue().strip().splitlines()
        assert lines[0] == "step, total, L_g, L_e, lr"
        assert len(lines) == 4
        step, total, lg, le, lr = lines[1].split(", ")
        assert int(step) == 1 and float(lr) == cfg4.lr
        assert abs(float(total) - (float(lg) + cfg4.loss_weight * float(le))) < 1e-4


def test_teacher_forced_stats_consistency(world):
    cfg, store, vocab, examples = world
    model = ResponseModel(cfg, vocab, store)
    stats = teacher_forced_stats(model, examples[:4])
    assert stats["ppl"] == pytest.approx(
        math.exp(stats["nll"] / stats["tokens"]), rel=1e-9)
    assert 0 <= stats["token_accuracy"] <= 1
    assert 0 <= stats["emotion_accuracy"] <= 1
