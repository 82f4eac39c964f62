"""Optimization and the two-pass evaluation protocol.

Pass 1 trains on train-minus-heldout and records the validation-accuracy
curve; the epoch with the best validation accuracy (lowest index on ties)
is then replayed in pass 2 from an identical initialization on the full
training set before scoring the test set and its hard slice.  The whole
procedure repeats over `num_runs` seeds and reports arithmetic means.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import data
from .errors import ConfigError, ContractError
from .model import Model, ModelConfig, save_checkpoint
from .rng import Rng
from .tensor import Tensor, log_softmax

NUM_CLASSES = 3


@dataclass
class TrainConfig:
    lr: float = 1e-5
    l2_weight: float = 2e-7
    dropout: float = 0.0
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 50
    heldout_fraction: float = 0.15
    num_runs: int = 5
    seed_base: int = 0

    def validate(self):
        if self.lr <= 0 or self.l2_weight < 0 or self.batch_size < 1:
            raise ConfigError("lr must be positive, l2 nonnegative, batch >= 1")
        if not 0.0 < self.heldout_fraction < 1.0:
            raise ConfigError("heldout_fraction must lie in (0, 1)")
        if self.max_epochs < 1 or self.num_runs < 1:
            raise ConfigError("max_epochs and num_runs must be >= 1")


# -- loss and optimizer ---------------------------------------------------------

def cross_entropy_loss(logits: Tensor, labels: np.ndarray,
                       params=None, l2_weight: float = 0.0) -> Tensor:
    """Mean categorical cross-entropy plus l2_weight * sum of squared params."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or logits.shape[0] != labels.shape[0]:
        raise ContractError(
            f"loss: logits {logits.shape} vs labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
        raise ContractError(f"loss: labels outside 0..{NUM_CLASSES - 1}")
    b = labels.shape[0]
    onehot = np.zeros((b, NUM_CLASSES))
    onehot[np.arange(b), labels] = 1.0
    ce = (log_softmax(logits, axis=1) * Tensor(onehot)).sum() * (-1.0 / b)
    if l2_weight and params:
        penalty = None
        for p in params:
            term = (p * p).sum()
            penalty = term if penalty is None else penalty + term
        ce = ce + penalty * l2_weight
    return ce


class Adam:
    """Bias-corrected Adam; epsilon is added outside the square root."""

    def __init__(self, params, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1.0 - self.beta2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


# -- metrics -------------------------------------------------------------------

def metrics(predictions, labels):
    """Accuracy and macro-F1; a class absent from both sides scores F1 = 0."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0 or predictions.shape != labels.shape:
        raise ContractError(
            f"metrics: need equal nonempty vectors, got {predictions.shape} "
            f"and {labels.shape}")
    accuracy = float((predictions == labels).mean())
    f1_per_class = []
    for cls in range(NUM_CLASSES):
        tp = int(np.sum((predictions == cls) & (labels == cls)))
        fp = int(np.sum((predictions == cls) & (labels != cls)))
        fn = int(np.sum((predictions != cls) & (labels == cls)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        f1_per_class.append(f1)
    return accuracy, float(np.mean(f1_per_class))


def predict(model: Model, examples, batch_size: int) -> np.ndarray:
    """Deterministic class predictions in input order (no shuffling).

    Batches are padded to the set-wide max length so the result does not
    depend on how examples are grouped.
    """
    was_training = model.training
    model.eval()
    pad_to = max((ex.seq_len for ex in examples), default=1)
    preds = []
    for batch in data.make_batches(examples, batch_size, pad_to=pad_to):
        logits = model.forward(Tensor(batch.x))
        preds.append(np.argmax(logits.data, axis=1))
    if was_training:
        model.train()
    return np.concatenate(preds) if preds else np.empty(0, dtype=np.int64)


def evaluate(model: Model, examples, batch_size: int):
    """(accuracy, macro_f1) on `examples`, or (None, None) when empty."""
    if not examples:
        return None, None
    preds = predict(model, examples, batch_size)
    labels = np.array([ex.label_index for ex in examples])
    return metrics(preds, labels)


# -- training loops ---------------------------------------------------------------

def train_one_epoch(model: Model, optimizer: Adam, examples,
                    config: TrainConfig, shuffle_rng: Rng) -> float:
    """One seeded-shuffle pass; returns the mean batch loss."""
    model.train()
    total, count = 0.0, 0
    for batch in data.make_batches(examples, config.batch_size, shuffle_rng):
        model.zero_grad()
        logits = model.forward(Tensor(batch.x))
        loss = cross_entropy_loss(logits, batch.labels, model.parameters(),
                                  config.l2_weight)
        loss.backward()
        optimizer.step()
        total += loss.item()
        count += 1
    return total / count


def train_epochs(model: Model, examples, config: TrainConfig, epochs: int,
                 run_rng: Rng, stage: str):
    losses = []
    optimizer = Adam(model.parameters(), config.lr, config.beta1,
                     config.beta2, config.epsilon)
    for epoch in range(1, epochs + 1):
        shuffle_rng = run_rng.child(f"{stage}/epoch{epoch}")
        losses.append(train_one_epoch(model, optimizer, examples, config,
                                      shuffle_rng))
    return losses


# -- two-pass protocol ---------------------------------------------------------------

def choose_epoch(val_curve) -> int:
    """1-indexed epoch of the best validation accuracy; ties pick the lowest."""
    if not len(val_curve):
        raise ContractError("choose_epoch: empty validation curve")
    return int(np.argmax(val_curve)) + 1


@dataclass
class RunResult:
    seed: int
    pass1_losses: list
    val_accuracy: list
    chosen_epoch: int
    pass2_losses: list
    test_accuracy: float | None
    test_macro_f1: float | None
    hard_accuracy: float | None
    hard_macro_f1: float | None


@dataclass
class TrainReport:
    model_config: dict
    train_config: dict
    runs: list
    aggregate: dict = field(default_factory=dict)
    context: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "model_config": self.model_config,
            "train_config": self.train_config,
            "runs": [asdict(r) for r in self.runs],
            "aggregate": self.aggregate,
            "context": self.context,
        }
        return json.dumps(payload, indent=1, sort_keys=True)

    def to_table(self) -> str:
        """Plain-text summary in the accuracy / F1 (hard in parens) layout."""
        name = f"STGNN-{self.model_config['encoder_kind'].upper()}"

        def cell(value, hard):
            if value is None:
                return "-"
            text = f"{100 * value:.2f}"
            if hard is not None:
                text += f" ({100 * hard:.2f})"
            return text

        agg = self.aggregate
        header = f"{'model':<14} {'accuracy':<16} {'macro_f1':<16}"
        row = (f"{name:<14} "
               f"{cell(agg['test_accuracy'], agg['hard_accuracy']):<16} "
               f"{cell(agg['test_macro_f1'], agg['hard_macro_f1']):<16}")
        return header + "\n" + row + "\n"


def _mean_or_none(values):
    if any(v is None for v in values):
        return None
    return float(np.mean(values))


def _aggregate(runs):
    fields = ("test_accuracy", "test_macro_f1", "hard_accuracy",
              "hard_macro_f1")
    agg = {f: _mean_or_none([getattr(r, f) for r in runs]) for f in fields}
    agg["chosen_epochs"] = [r.chosen_epoch for r in runs]
    return agg


def run_two_pass_once(train_examples, test_examples, model_config: ModelConfig,
                      train_config: TrainConfig, seed: int,
                      checkpoint_path: str | None = None) -> RunResult:
    """Both passes for one seed; optionally saves the pass-2 model."""
    run_rng = Rng(seed)
    inner, heldout = data.heldout_split(train_examples,
                                        train_config.heldout_fraction,
                                        run_rng.child("heldout"))

    model = Model(model_config, seed=seed)
    optimizer = Adam(model.parameters(), train_config.lr, train_config.beta1,
                     train_config.beta2, train_config.epsilon)
    pass1_losses, val_curve = [], []
    for epoch in range(1, train_config.max_epochs + 1):
        loss = train_one_epoch(model, optimizer, inner, train_config,
                               run_rng.child(f"pass1/epoch{epoch}"))
        accuracy, _ = evaluate(model, heldout, train_config.batch_size)
        pass1_losses.append(loss)
        val_curve.append(accuracy)
    chosen_epoch = choose_epoch(val_curve)

    # pass 2: same seed => identical initialization, full training set
    model = Model(model_config, seed=seed)
    pass2_losses = train_epochs(model, train_examples, train_config,
                                chosen_epoch, run_rng, "pass2")

    test_accuracy, test_f1 = evaluate(model, test_examples,
                                      train_config.batch_size)
    hard = data.hard_slice(test_examples)
    hard_accuracy, hard_f1 = evaluate(model, hard, train_config.batch_size)

    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)

    return RunResult(
        seed=seed,
        pass1_losses=pass1_losses,
        val_accuracy=val_curve,
        chosen_epoch=chosen_epoch,
        pass2_losses=pass2_losses,
        test_accuracy=test_accuracy,
        test_macro_f1=test_f1,
        hard_accuracy=hard_accuracy,
        hard_macro_f1=hard_f1,
    )


def _run_worker(args):
    return run_two_pass_once(*args)


def fit_two_pass(train_examples, test_examples, model_config: ModelConfig,
                 train_config: TrainConfig, checkpoint_dir: str | None = None,
                 jobs: int = 1) -> TrainReport:
    """The full protocol over `num_runs` seeds (seed_base + i)."""
    train_config.validate()
    model_config.validate()
    if not train_examples:
        raise ContractError("fit_two_pass: empty training set")

    tasks = []
    for i in range(train_config.num_runs):
        seed = train_config.seed_base + i
        path = (os.path.join(checkpoint_dir, f"run{i}.ckpt")
                if checkpoint_dir is not None else None)
        tasks.append((train_examples, test_examples, model_config,
                      train_config, seed, path))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_worker, tasks))
    else:
        runs = [run_two_pass_once(*task) for task in tasks]

    return TrainReport(
        model_config=asdict(model_config),
        train_config=asdict(train_config),
        runs=runs,
        aggregate=_aggregate(runs),
    )
