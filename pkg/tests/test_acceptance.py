"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Tolerances are fixed here and nowhere else.
"""

import json
import time

import numpy as np
import pytest

from stgnn import cli, data, gradcheck, spectral, training
from stgnn.errors import TruncatedFileError
from stgnn.model import Model, ModelConfig
from stgnn.rng import Rng
from stgnn.tensor import Tensor

GRADCHECK_TOLERANCE = 1e-4
SPECTRAL_TOLERANCE = 1e-8
ROUNDTRIP_TOLERANCE = 1e-9
PSD_SLACK = 1e-9
ATTENTION_ROW_TOLERANCE = 1e-12
GRADCHECK_BUDGET_SECONDS = 120.0
OVERFIT_BUDGET_SECONDS = 300.0
OVERFIT_MAX_EPOCHS = 200
OVERFIT_LR = 1e-3


def report(name: str, passed: bool, detail: str = ""):
    line = f"[{'PASS' if passed else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert passed, line


def test_criterion_gradcheck_suite():
    start = time.time()
    results = gradcheck.operation_suite()
    elapsed = time.time() - start
    worst_op = max(results, key=results.get)
    ok = all(err < GRADCHECK_TOLERANCE for err in results.values())
    ok = ok and elapsed < GRADCHECK_BUDGET_SECONDS
    report("gradcheck suite (all ops + full forward, rel err < 1e-4)",
           ok, f"worst {worst_op}={results[worst_op]:.2e}, {elapsed:.0f}s")


def naive_dft(x):
    n = x.shape[-1]
    j = np.arange(n)
    return x @ np.exp(-2j * np.pi * np.outer(j, j) / n).T


def test_criterion_spectral_oracles():
    rng = np.random.default_rng(0)

    dft_err = 0.0
    for s in range(1, 65):
        x = rng.normal(size=(2, s))
        sp = spectral.dft(Tensor(x), axis=1)
        expected = naive_dft(x)
        dft_err = max(dft_err,
                      np.abs(sp.real.data - expected.real).max(),
                      np.abs(sp.imag.data - expected.imag).max())

    roundtrip_err = 0.0
    for s in (1, 7, 8, 85):
        x = rng.normal(size=(3, s))
        back = spectral.idft(spectral.dft(Tensor(x), axis=1))
        roundtrip_err = max(roundtrip_err, np.abs(back.data - x).max())

    cheb_err = 0.0
    eigen_rt_err = 0.0
    for h in (4, 8, 16):
        for k in (2, 3, 5):
            w = rng.random((h, h)) + 1e-3
            w /= w.sum(axis=1, keepdims=True)
            graph = spectral.build_laplacian(Tensor(w))
            basis = spectral.chebyshev_basis(graph, k)
            x = rng.normal(size=(2, 5, h))
            out = spectral.chebyshev_gft(basis, Tensor(x)).data

            # direct matrix-polynomial evaluation
            rescaled = graph.laplacian.data - np.eye(h)
            terms = [np.eye(h), rescaled]
            for _ in range(2, k):
                terms.append(2 * rescaled @ terms[-1] - terms[-2])
            for n in range(k):
                cheb_err = max(cheb_err,
                               np.abs(out[:, n] - x @ terms[n].T).max())

            # eigen-GFT filter path
            eigvals, u = spectral.eigen_decompose(graph)
            coeffs = rng.normal(size=k)
            via_basis = np.tensordot(coeffs, out, axes=([0], [1]))
            lam = eigvals - 1.0
            cheb_lam = [np.ones_like(lam), lam]
            for _ in range(2, k):
                cheb_lam.append(2 * lam * cheb_lam[-1] - cheb_lam[-2])
            p_lam = sum(c * t for c, t in zip(coeffs, cheb_lam))
            via_eigen = (x @ u) * p_lam @ u.T
            cheb_err = max(cheb_err, np.abs(via_basis - via_eigen).max())

            xt = Tensor(rng.normal(size=(2, 4, h)))
            rt = spectral.eigen_igft(graph, spectral.eigen_gft(graph, xt))
            eigen_rt_err = max(eigen_rt_err, np.abs(rt.data - xt.data).max())

    ok = (dft_err < SPECTRAL_TOLERANCE
          and roundtrip_err < ROUNDTRIP_TOLERANCE
          and cheb_err < SPECTRAL_TOLERANCE
          and eigen_rt_err < ROUNDTRIP_TOLERANCE)
    report("spectral oracles (naive DFT, roundtrips, Chebyshev vs eigen)",
           ok, f"dft={dft_err:.1e} rt={roundtrip_err:.1e} "
               f"cheb={cheb_err:.1e} eig_rt={eigen_rt_err:.1e}")


def test_criterion_laplacian_properties():
    rng = np.random.default_rng(1)
    worst_asym, worst_min, worst_max = 0.0, 0.0, 0.0
    total = 0
    for h in (4, 8, 16):
        for _ in range(334):
            w = rng.random((h, h)) + 1e-6
            w /= w.sum(axis=1, keepdims=True)
            lap = spectral.build_laplacian(Tensor(w)).laplacian.data
            worst_asym = max(worst_asym, np.abs(lap - lap.T).max())
            eigvals = np.linalg.eigvalsh(lap)
            worst_min = min(worst_min, eigvals.min())
            worst_max = max(worst_max, eigvals.max())
            total += 1

    path = np.array([[0.0, 1, 0], [1, 0, 1], [0, 1, 0]])
    path_eigvals, _ = spectral.eigen_decompose(spectral.build_laplacian(
        Tensor(path)))
    path_err = np.abs(path_eigvals - [0.0, 1.0, 2.0]).max()

    ok = (total >= 1000 and worst_asym < 1e-12
          and worst_min > -PSD_SLACK and worst_max <= 2.0 + PSD_SLACK
          and path_err < 1e-9)
    report("laplacian properties (1000+ random graphs, path eigenvalues)",
           ok, f"min_eig={worst_min:.1e} max_eig={worst_max:.6f} "
               f"path_err={path_err:.1e}")


def test_criterion_shape_contracts():
    rng = np.random.default_rng(2)
    shapes_ok = True
    for _ in range(8):
        b = int(rng.integers(1, 4))
        s = int(rng.integers(3, 10))
        h = int(rng.integers(4, 12))
        k = int(rng.integers(1, 5))
        model = Model(ModelConfig(hidden_dim=h, max_seq_len=s, cheb_order=k),
                      seed=int(rng.integers(0, 100)))
        x = Tensor(rng.normal(size=(b, s, h)))
        graph = spectral.build_laplacian(
            model.attention_adjacency(model.encode_latent(x)))
        basis = spectral.chebyshev_basis(graph, k)
        shapes_ok = shapes_ok and (
            model.spectral_block(x, basis, 0).shape == (b, s, h))
        shapes_ok = shapes_ok and model.forward(x).shape == (b, 3)

    model = Model(ModelConfig(hidden_dim=8, max_seq_len=8), seed=3)
    adjacency = model.attention_adjacency(
        model.encode_latent(Tensor(rng.normal(size=(3, 6, 8)))))
    rows_err = np.abs(adjacency.data.sum(axis=1) - 1.0).max()

    zero_model = Model(ModelConfig(hidden_dim=8, max_seq_len=8), seed=4)
    for p in zero_model.params.values():
        p.data[...] = 0.0
    a = zero_model.forward(Tensor(rng.normal(size=(2, 6, 8)))).data
    b = zero_model.forward(Tensor(rng.normal(size=(2, 6, 8)) * 7)).data
    constant = np.array_equal(a, b)

    ok = shapes_ok and rows_err < ATTENTION_ROW_TOLERANCE and constant
    report("shape contracts (block preserves bxsxh, attention rows, "
           "zero-model constant)", ok, f"row_err={rows_err:.1e}")


def test_criterion_overfit_sanity(tmp_path):
    start = time.time()
    dataset_dir = str(tmp_path / "sep")
    assert cli.main(["synth", "--n", "64", "--mode", "separable", "--h", "16",
                     "--seed", "33", "--test-fraction", "0", "--out",
                     dataset_dir]) == 0
    examples = data.load_dataset(dataset_dir)
    assert len(examples) == 64

    config = ModelConfig(hidden_dim=16, encoder_kind="gru",
                         max_seq_len=max(ex.seq_len for ex in examples))
    train_config = training.TrainConfig(lr=OVERFIT_LR, l2_weight=0.0,
                                        batch_size=32,
                                        max_epochs=OVERFIT_MAX_EPOCHS)
    model = Model(config, seed=5)
    optimizer = training.Adam(model.parameters(), train_config.lr)
    labels = np.array([ex.label_index for ex in examples])
    rng = Rng(6)
    reached = None
    for epoch in range(1, OVERFIT_MAX_EPOCHS + 1):
        training.train_one_epoch(model, optimizer, examples, train_config,
                                 rng.child(f"epoch{epoch}"))
        preds = training.predict(model, examples, train_config.batch_size)
        if np.array_equal(preds, labels):
            reached = epoch
            break
    elapsed = time.time() - start
    ok = reached is not None and elapsed < OVERFIT_BUDGET_SECONDS
    report("overfit sanity (100% train accuracy on 64 separable examples)",
           ok, f"epoch={reached} in {elapsed:.0f}s")


def test_criterion_protocol_determinism():
    examples = data.synthesize(40, "separable", h=8, seed=44,
                               test_fraction=0.3)
    train, test = data.split_examples(examples)
    model_config = ModelConfig(hidden_dim=8,
                               max_seq_len=max(ex.seq_len for ex in examples))
    train_config = training.TrainConfig(lr=1e-3, l2_weight=1e-7, batch_size=8,
                                        max_epochs=4, num_runs=5, seed_base=50)
    first = training.fit_two_pass(train, test, model_config, train_config)
    second = training.fit_two_pass(train, test, model_config, train_config)

    identical = first.to_json() == second.to_json()
    tie_rule = all(run.chosen_epoch == training.choose_epoch(run.val_accuracy)
                   for run in first.runs)
    mean_exact = (first.aggregate["test_accuracy"]
                  == float(np.mean([r.test_accuracy for r in first.runs])))
    mean_exact = mean_exact and (
        first.aggregate["test_macro_f1"]
        == float(np.mean([r.test_macro_f1 for r in first.runs])))

    ok = identical and tie_rule and mean_exact
    report("protocol determinism (bitwise reports, tie rule, exact means)",
           ok, f"identical={identical} tie={tie_rule} mean={mean_exact}")


def test_criterion_hard_slice_and_metrics_oracles():
    rng = np.random.default_rng(7)

    def group(sentence, labels, split="test"):
        return [data.EmbeddedExample(
            id=f"{sentence}-{i}", sentence_key=sentence, aspect=f"a{i}",
            label=label, split=split, seq=np.zeros((3, 2), dtype=np.float32))
            for i, label in enumerate(labels)]

    slice_ok = True
    for trial in range(50):
        examples = []
        for i in range(int(rng.integers(3, 12))):
            labels = [data.LABELS[int(rng.integers(0, 3))]
                      for _ in range(int(rng.integers(1, 4)))]
            split = "test" if rng.random() < 0.8 else "train"
            examples.extend(group(f"t{trial}-s{i}", labels, split))
        got = [ex.id for ex in data.hard_slice(examples)]
        test_set = [ex for ex in examples if ex.split == "test"]
        expected = []
        for ex in test_set:
            members = [e for e in test_set
                       if e.sentence_key == ex.sentence_key]
            if len(members) >= 2 and len({e.label for e in members}) >= 2:
                expected.append(ex.id)
        slice_ok = slice_ok and got == expected

    metrics_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        preds = rng.integers(0, 3, n)
        labels = rng.integers(0, 3, n)
        got_acc, got_f1 = training.metrics(preds, labels)

        pairs = list(zip(preds.tolist(), labels.tolist()))
        acc = sum(1 for p, l in pairs if p == l) / n
        f1s = []
        for c in range(3):
            tp = sum(1 for p, l in pairs if p == c and l == c)
            fp = sum(1 for p, l in pairs if p == c and l != c)
            fn = sum(1 for p, l in pairs if p != c and l == c)
            precision = tp / (tp + fp) if tp + fp else 0.0
            recall = tp / (tp + fn) if tp + fn else 0.0
            f1s.append(2 * precision * recall / (precision + recall)
                       if precision + recall else 0.0)
        metrics_ok = metrics_ok and np.isclose(got_acc, acc)
        metrics_ok = metrics_ok and np.isclose(got_f1, sum(f1s) / 3)

    worked_acc, worked_f1 = training.metrics([0, 0, 0], [0, 1, 2])
    worked_ok = (np.isclose(worked_acc, 1 / 3)
                 and np.isclose(worked_f1, 1 / 6, atol=5e-5))

    ok = slice_ok and metrics_ok and worked_ok
    report("hard-slice and metrics oracles (group-by + confusion matrix)",
           ok, f"worked f1={worked_f1:.4f}")


def test_criterion_interchange_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    examples = []
    for i in range(23):
        s = int(rng.integers(3, 11))
        examples.append(data.EmbeddedExample(
            id=f"rt-{i}", sentence_key=f"sentence {i % 7}", aspect=f"a{i}",
            label=data.LABELS[int(rng.integers(0, 3))],
            split="train" if i % 3 else "test",
            seq=rng.normal(size=(s, 6)).astype(np.float32)))

    out = str(tmp_path / "rt")
    data.write_dataset(examples, "roundtrip", 6, out)
    loaded = data.load_dataset(out)
    bitwise = len(loaded) == len(examples) and all(
        a.id == b.id and a.sentence_key == b.sentence_key
        and a.aspect == b.aspect and a.label == b.label and a.split == b.split
        and np.array_equal(a.seq, b.seq)
        for a, b in zip(examples, loaded))

    blob_path = tmp_path / "rt" / "tensors.bin"
    blob = blob_path.read_bytes()
    blob_path.write_bytes(blob[:-1])
    try:
        data.load_dataset(out)
        truncation_ok = False
    except TruncatedFileError as err:
        truncation_ok = examples[-1].id in str(err)

    ok = bitwise and truncation_ok
    report("interchange round-trip (bitwise) and truncation rejection",
           ok, f"bitwise={bitwise} truncation_names_id={truncation_ok}")
