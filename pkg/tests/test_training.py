"""Loss, Adam, metrics, and the two-pass protocol."""

import math

import numpy as np
import pytest

from stgnn import data, training
from stgnn.errors import ContractError
from stgnn.model import Model, ModelConfig
from stgnn.rng import Rng
from stgnn.tensor import Tensor


def test_uniform_logits_loss_is_ln3():
    logits = Tensor(np.zeros((4, 3)))
    loss = training.cross_entropy_loss(logits, np.array([0, 1, 2, 1]))
    assert np.isclose(loss.item(), math.log(3.0), atol=1e-12)


def test_perfect_logits_drive_loss_to_zero():
    labels = np.array([0, 1, 2])
    previous = None
    for scale in (1.0, 5.0, 20.0):
        logits = Tensor(np.eye(3) * scale)
        value = training.cross_entropy_loss(logits, labels).item()
        if previous is not None:
            assert value < previous
        previous = value
    assert previous < 1e-8


def test_l2_penalty_arithmetic():
    logits = Tensor(np.zeros((1, 3)))
    params = [Tensor([1.0], requires_grad=True), Tensor([2.0], requires_grad=True)]
    loss = training.cross_entropy_loss(logits, np.array([0]), params, 2e-7)
    assert np.isclose(loss.item() - math.log(3.0), 1e-6, rtol=1e-9)


def test_label_out_of_range_rejected():
    with pytest.raises(ContractError):
        training.cross_entropy_loss(Tensor(np.zeros((2, 3))), np.array([0, 3]))


def test_adam_zero_gradient_is_fixed_point():
    p = Tensor([1.5, -2.0], requires_grad=True)
    p.grad = np.zeros(2)
    opt = training.Adam([p], lr=0.1)
    opt.step()
    assert np.array_equal(p.data, [1.5, -2.0])


def test_adam_first_step_is_signed_lr():
    rng = np.random.default_rng(0)
    g = rng.normal(size=5)
    p = Tensor(np.zeros(5), requires_grad=True)
    p.grad = g.copy()
    opt = training.Adam([p], lr=1e-3)
    opt.step()
    assert np.allclose(p.data, -1e-3 * np.sign(g), atol=1e-3 * 1e-6)


def test_adam_matches_scalar_oracle_over_five_steps():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    grads = [0.3, -1.2, 0.05, 0.9, -0.4]

    theta, m, v = 2.0, 0.0, 0.0
    trace = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
        trace.append(theta)

    p = Tensor([2.0], requires_grad=True)
    opt = training.Adam([p], lr=lr, beta1=b1, beta2=b2, epsilon=eps)
    for g, expected in zip(grads, trace):
        p.grad = np.array([g])
        opt.step()
        assert np.isclose(p.data[0], expected, rtol=1e-12)


def test_metrics_perfect_case():
    acc, f1 = training.metrics([0, 1, 2, 1], [0, 1, 2, 1])
    assert acc == 1.0 and f1 == 1.0


def test_metrics_worked_example():
    acc, f1 = training.metrics([0, 0, 0], [0, 1, 2])
    assert np.isclose(acc, 1 / 3)
    assert np.isclose(f1, (0.5 + 0.0 + 0.0) / 3)


def test_metrics_permutation_invariant():
    rng = np.random.default_rng(1)
    preds = rng.integers(0, 3, 40)
    labels = rng.integers(0, 3, 40)
    base = training.metrics(preds, labels)
    order = rng.permutation(40)
    assert training.metrics(preds[order], labels[order]) == base


def test_metrics_empty_rejected():
    with pytest.raises(ContractError):
        training.metrics([], [])


def oracle_metrics(preds, labels):
    """Confusion-matrix metrics via explicit python loops."""
    pairs = list(zip(preds, labels))
    acc = sum(1 for p, l in pairs if p == l) / len(pairs)
    f1s = []
    for c in range(3):
        tp = sum(1 for p, l in pairs if p == c and l == c)
        fp = sum(1 for p, l in pairs if p == c and l != c)
        fn = sum(1 for p, l in pairs if p != c and l == c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall)
                   if precision + recall else 0.0)
    return acc, sum(f1s) / 3


def test_metrics_against_brute_force_oracle():
    rng = np.random.default_rng(2)
    for _ in range(300):
        n = int(rng.integers(1, 30))
        preds = rng.integers(0, 3, n)
        labels = rng.integers(0, 3, n)
        got = training.metrics(preds, labels)
        expected = oracle_metrics(preds.tolist(), labels.tolist())
        assert np.allclose(got, expected)


def test_choose_epoch_tie_rule():
    assert training.choose_epoch([0.5, 0.5, 0.5]) == 1
    assert training.choose_epoch([0.1, 0.9, 0.9, 0.2]) == 2
    assert training.choose_epoch([0.3]) == 1
    with pytest.raises(ContractError):
        training.choose_epoch([])


def tiny_setup(n=24, h=8, seed=5):
    examples = data.synthesize(n, "separable", h=h, seed=seed,
                               test_fraction=0.25)
    train, test = data.split_examples(examples)
    mc = ModelConfig(hidden_dim=h,
                     max_seq_len=max(ex.seq_len for ex in examples))
    return train, test, mc


def test_fit_two_pass_is_bitwise_deterministic():
    train, test, mc = tiny_setup()
    tc = training.TrainConfig(lr=1e-3, l2_weight=1e-6, batch_size=8,
                              max_epochs=4, num_runs=2, seed_base=11)
    a = training.fit_two_pass(train, test, mc, tc)
    b = training.fit_two_pass(train, test, mc, tc)
    assert a.to_json() == b.to_json()


def test_fit_two_pass_parallel_equals_serial():
    train, test, mc = tiny_setup()
    tc = training.TrainConfig(lr=1e-3, l2_weight=0.0, batch_size=8,
                              max_epochs=3, num_runs=2, seed_base=3)
    serial = training.fit_two_pass(train, test, mc, tc, jobs=1)
    parallel = training.fit_two_pass(train, test, mc, tc, jobs=2)
    assert serial.to_json() == parallel.to_json()


def test_chosen_epoch_matches_recorded_curve():
    train, test, mc = tiny_setup()
    tc = training.TrainConfig(lr=1e-3, l2_weight=0.0, batch_size=8,
                              max_epochs=5, num_runs=2, seed_base=7)
    report = training.fit_two_pass(train, test, mc, tc)
    for run in report.runs:
        assert run.chosen_epoch == training.choose_epoch(run.val_accuracy)
        assert len(run.pass2_losses) == run.chosen_epoch


def test_single_run_aggregate_equals_run():
    train, test, mc = tiny_setup()
    tc = training.TrainConfig(lr=1e-3, l2_weight=0.0, batch_size=8,
                              max_epochs=3, num_runs=1, seed_base=2)
    report = training.fit_two_pass(train, test, mc, tc)
    run = report.runs[0]
    assert report.aggregate["test_accuracy"] == run.test_accuracy
    assert report.aggregate["test_macro_f1"] == run.test_macro_f1


def test_aggregate_is_exact_arithmetic_mean():
    train, test, mc = tiny_setup()
    tc = training.TrainConfig(lr=1e-3, l2_weight=0.0, batch_size=8,
                              max_epochs=3, num_runs=3, seed_base=9)
    report = training.fit_two_pass(train, test, mc, tc)
    values = [r.test_accuracy for r in report.runs]
    assert report.aggregate["test_accuracy"] == float(np.mean(values))


def test_two_pass_on_separable_data_reaches_full_test_accuracy():
    examples = data.synthesize(64, "separable", h=16, seed=21,
                               test_fraction=0.25)
    train, test = data.split_examples(examples)
    mc = ModelConfig(hidden_dim=16,
                     max_seq_len=max(ex.seq_len for ex in examples))
    tc = training.TrainConfig(lr=1e-3, l2_weight=1e-7, batch_size=16,
                              max_epochs=80, num_runs=1, seed_base=0)
    report = training.fit_two_pass(train, test, mc, tc)
    assert report.runs[0].test_accuracy == 1.0


def test_empty_train_set_rejected():
    _, test, mc = tiny_setup()
    tc = training.TrainConfig()
    with pytest.raises(ContractError):
        training.fit_two_pass([], test, mc, tc)


def test_loss_decreases_monotonically_when_overfitting():
    examples = data.synthesize(32, "separable", h=8, seed=6, test_fraction=0.0)
    mc = ModelConfig(hidden_dim=8, max_seq_len=max(ex.seq_len for ex in examples))
    tc = training.TrainConfig(lr=1e-3, l2_weight=0.0, batch_size=32,
                              max_epochs=10)
    model = Model(mc, seed=1)
    losses = training.train_epochs(model, examples, tc, 10, Rng(4), "overfit")
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_huge_l2_shrinks_parameter_norms():
    examples = data.synthesize(16, "separable", h=6, seed=7, test_fraction=0.0)
    mc = ModelConfig(hidden_dim=6, max_seq_len=max(ex.seq_len for ex in examples))
    tc = training.TrainConfig(lr=1e-2, l2_weight=1e3, batch_size=16,
                              max_epochs=8)
    model = Model(mc, seed=2)
    optimizer = training.Adam(model.parameters(), tc.lr)
    norms = [sum(float(np.sum(p.data ** 2)) for p in model.parameters())]
    rng = Rng(8)
    for epoch in range(8):
        training.train_one_epoch(model, optimizer, examples, tc,
                                 rng.child(f"e{epoch}"))
        norms.append(sum(float(np.sum(p.data ** 2)) for p in model.parameters()))
    # the l2 term dominates every gradient, so the norm must fall each epoch
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 0.75 * norms[0]


def test_identical_seed_gives_bitwise_identical_trajectories():
    examples = data.synthesize(16, "separable", h=6, seed=9, test_fraction=0.0)
    mc = ModelConfig(hidden_dim=6, max_seq_len=max(ex.seq_len for ex in examples))
    tc = training.TrainConfig(lr=1e-3, l2_weight=1e-6, batch_size=8,
                              max_epochs=3)

    def run():
        model = Model(mc, seed=31)
        training.train_epochs(model, examples, tc, 3, Rng(31), "traj")
        return {name: p.data.copy() for name, p in model.params.items()}

    first, second = run(), run()
    for name in first:
        assert np.array_equal(first[name], second[name]), name


def test_predict_is_batch_size_invariant():
    examples = data.synthesize(20, "separable", h=8, seed=10,
                               test_fraction=0.5)
    _, test = data.split_examples(examples)
    model = Model(ModelConfig(hidden_dim=8,
                              max_seq_len=max(ex.seq_len for ex in examples)),
                  seed=12)
    a = training.predict(model, test, 3)
    b = training.predict(model, test, 32)
    assert np.array_equal(a, b)
