"""Dataset plumbing: the embedding interchange format, deterministic hash
embeddings for dependency-free runs, batching, and the hard-slice filter.

Interchange layout (bit-exact):
  manifest.json  UTF-8 JSON: name, hidden_dim, counts per split/label, and an
                 examples array carrying byte offsets into the tensor file.
  tensors.bin    magic ``STGE``, little-endian uint32 version (=1), then one
                 record per example: uint32 seq_len, uint32 hidden_dim,
                 seq_len * hidden_dim float32 values, row-major.  Manifest
                 offsets point at each record's seq_len field.
"""

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadMagicError, ContractError, CountMismatchError,
                     DatasetError, TruncatedFileError)
from .rng import Rng, derive_seed

TENSOR_MAGIC = b"STGE"
TENSOR_VERSION = 1

LABELS = ("positive", "neutral", "negative")
LABEL_TO_INDEX = {name: i for i, name in enumerate(LABELS)}
SPLITS = ("train", "test")

CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"


@dataclass
class EmbeddedExample:
    """One review/aspect pair as an embedded token sequence."""

    id: str
    sentence_key: str
    aspect: str
    label: str
    split: str
    seq: np.ndarray  # (s, hidden_dim) float32

    @property
    def seq_len(self) -> int:
        return self.seq.shape[0]

    @property
    def label_index(self) -> int:
        return LABEL_TO_INDEX[self.label]


def _check_example(ex: EmbeddedExample):
    if ex.label not in LABEL_TO_INDEX:
        raise ContractError(f"example {ex.id}: unknown label {ex.label!r}")
    if ex.split not in SPLITS:
        raise ContractError(f"example {ex.id}: unknown split {ex.split!r}")
    if ex.seq_len < 3:
        raise ContractError(
            f"example {ex.id}: sequence length {ex.seq_len} < 3 "
            "(needs CLS, a token, and a separator)")


# -- interchange reader/writer -------------------------------------------------

def write_dataset(examples, name: str, hidden_dim: int, out_dir: str):
    """Write manifest.json + tensors.bin; returns the two paths."""
    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(out_dir, "manifest.json")
    tensor_path = os.path.join(out_dir, "tensors.bin")

    counts = {split: {label: 0 for label in LABELS} for split in SPLITS}
    entries = []
    with open(tensor_path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<I", TENSOR_VERSION))
        for ex in examples:
            _check_example(ex)
            if ex.seq.shape[1] != hidden_dim:
                raise ContractError(
                    f"example {ex.id}: width {ex.seq.shape[1]} != hidden_dim "
                    f"{hidden_dim}")
            offset = f.tell()
            f.write(struct.pack("<II", ex.seq_len, hidden_dim))
            f.write(ex.seq.astype("<f4").tobytes())
            counts[ex.split][ex.label] += 1
            entries.append({
                "id": ex.id,
                "sentence_key": ex.sentence_key,
                "aspect": ex.aspect,
                "label": ex.label,
                "split": ex.split,
                "byte_offset": offset,
                "seq_len": ex.seq_len,
            })

    manifest = {
        "name": name,
        "hidden_dim": hidden_dim,
        "counts": counts,
        "examples": entries,
    }
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return manifest_path, tensor_path


def load_dataset(manifest_path: str, tensor_path: str | None = None):
    """Materialize every example; cross-checks counts, offsets and sizes."""
    if os.path.isdir(manifest_path):
        manifest_path, tensor_path = dataset_paths(manifest_path)
    if tensor_path is None:
        tensor_path = os.path.join(os.path.dirname(manifest_path), "tensors.bin")

    with open(manifest_path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    hidden_dim = int(manifest["hidden_dim"])
    with open(tensor_path, "rb") as f:
        blob = f.read()

    if blob[:4] != TENSOR_MAGIC:
        raise BadMagicError(f"{tensor_path}: bad magic {blob[:4]!r}")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != TENSOR_VERSION:
        raise BadMagicError(f"{tensor_path}: unsupported version {version}")

    examples = []
    previous_offset = -1
    for entry in manifest["examples"]:
        offset = int(entry["byte_offset"])
        if offset <= previous_offset:
            raise DatasetError(
                f"{manifest_path}: offsets not strictly increasing at "
                f"{entry['id']}")
        previous_offset = offset
        header_end = offset + 8
        if header_end > len(blob):
            raise TruncatedFileError(
                f"{tensor_path}: truncated record header for {entry['id']}")
        seq_len, width = struct.unpack("<II", blob[offset:header_end])
        if seq_len != int(entry["seq_len"]) or width != hidden_dim:
            raise DatasetError(
                f"{tensor_path}: record header for {entry['id']} disagrees "
                f"with manifest (seq_len {seq_len}, width {width})")
        data_end = header_end + 4 * seq_len * width
        if data_end > len(blob):
            raise TruncatedFileError(
                f"{tensor_path}: truncated tensor data for {entry['id']}")
        seq = np.frombuffer(blob[header_end:data_end],
                            dtype="<f4").reshape(seq_len, width)
        examples.append(EmbeddedExample(
            id=str(entry["id"]),
            sentence_key=str(entry["sentence_key"]),
            aspect=str(entry["aspect"]),
            label=str(entry["label"]),
            split=str(entry["split"]),
            seq=np.ascontiguousarray(seq),
        ))

    tallied = {split: {label: 0 for label in LABELS} for split in SPLITS}
    for ex in examples:
        tallied[ex.split][ex.label] += 1
    if tallied != manifest["counts"]:
        raise CountMismatchError(
            f"{manifest_path}: manifest counts {manifest['counts']} do not "
            f"match tallied {tallied}")
    return examples


def dataset_paths(directory: str):
    return (os.path.join(directory, "manifest.json"),
            os.path.join(directory, "tensors.bin"))


def split_examples(examples):
    train = [ex for ex in examples if ex.split == "train"]
    test = [ex for ex in examples if ex.split == "test"]
    return train, test


# -- deterministic hash embeddings ----------------------------------------------

def token_vector(token: str, h: int, seed: int) -> np.ndarray:
    """Position-independent embedding of a token text, entries in [-1, 1]."""
    rng = Rng(derive_seed(seed, f"tok/{token}"))
    return rng.uniform(-1.0, 1.0, h).astype(np.float32)


def hash_embed(sentence: str, aspect: str, h: int, seed: int) -> np.ndarray:
    """Assemble CLS + sentence + SEP + aspect + SEP and embed each slot.

    Identical (token, seed) pairs map to identical rows, so repeated words
    share an embedding and whole calls are reproducible.
    """
    if h < 1:
        raise ContractError(f"hash_embed: h must be >= 1, got {h}")
    tokens = ([CLS_TOKEN] + sentence.split() + [SEP_TOKEN]
              + aspect.split() + [SEP_TOKEN])
    return np.stack([token_vector(tok, h, seed) for tok in tokens])


def hash_embed_example(example_id: str, sentence: str, aspect: str, label: str,
                       split: str, h: int, seed: int) -> EmbeddedExample:
    return EmbeddedExample(
        id=example_id,
        sentence_key=sentence,
        aspect=aspect,
        label=label,
        split=split,
        seq=hash_embed(sentence, aspect, h, seed),
    )


# -- hard slice -------------------------------------------------------------------

def hard_slice(examples):
    """Test examples whose sentence carries >= 2 aspects with differing labels."""
    test = [ex for ex in examples if ex.split == "test"]
    groups: dict[str, list] = {}
    for ex in test:
        groups.setdefault(ex.sentence_key, []).append(ex)
    hard = []
    for ex in test:
        group = groups[ex.sentence_key]
        if len(group) >= 2 and len({member.label for member in group}) >= 2:
            hard.append(ex)
    return hard


# -- batching ---------------------------------------------------------------------

@dataclass
class Batch:
    x: np.ndarray         # (b, s, h) float64, zero-padded
    labels: np.ndarray    # (b,) int64
    lengths: np.ndarray   # (b,) int64 true sequence lengths
    examples: list = field(default_factory=list)


def pad_batch(examples, pad_to: int | None = None) -> Batch:
    """Zero-pad a list of examples to their max sequence length.

    `pad_to` overrides the target length (evaluation pads every batch to the
    dataset-wide maximum so predictions do not depend on batch grouping).
    """
    if not examples:
        raise ContractError("pad_batch: empty batch")
    max_len = max(ex.seq_len for ex in examples)
    if pad_to is not None:
        if pad_to < max_len:
            raise ContractError(f"pad_to {pad_to} shorter than batch max {max_len}")
        max_len = pad_to
    h = examples[0].seq.shape[1]
    x = np.zeros((len(examples), max_len, h), dtype=np.float64)
    labels = np.empty(len(examples), dtype=np.int64)
    lengths = np.empty(len(examples), dtype=np.int64)
    for i, ex in enumerate(examples):
        x[i, :ex.seq_len] = ex.seq
        labels[i] = ex.label_index
        lengths[i] = ex.seq_len
    return Batch(x=x, labels=labels, lengths=lengths, examples=list(examples))


def make_batches(examples, batch_size: int, rng: Rng | None = None,
                 pad_to: int | None = None):
    """Seeded shuffle then fixed-size chunks; the final short batch is kept.

    With rng=None the input order is preserved (deterministic evaluation).
    """
    if batch_size < 1:
        raise ContractError(f"make_batches: batch_size must be >= 1, got {batch_size}")
    ordered = list(examples)
    if rng is not None:
        order = rng.permutation(len(ordered))
        ordered = [ordered[i] for i in order]
    return [pad_batch(ordered[i:i + batch_size], pad_to)
            for i in range(0, len(ordered), batch_size)]


def heldout_split(train_examples, fraction: float, rng: Rng):
    """Last `fraction` of a seeded shuffle becomes the held-out set."""
    if not 0.0 < fraction < 1.0:
        raise ContractError(f"heldout fraction must be in (0, 1), got {fraction}")
    order = rng.permutation(len(train_examples))
    shuffled = [train_examples[i] for i in order]
    cut = len(shuffled) - int(round(len(shuffled) * fraction))
    if cut <= 0 or cut >= len(shuffled):
        raise ContractError(
            f"heldout fraction {fraction} leaves an empty split for "
            f"{len(shuffled)} examples")
    return shuffled[:cut], shuffled[cut:]


# -- synthetic datasets -------------------------------------------------------------

_MARKERS = {"positive": "excellent", "neutral": "average", "negative": "awful"}
_FILLERS = ("battery", "screen", "keyboard", "price", "service", "design",
            "menu", "staff", "sound", "delivery", "fabric", "remote",
            "pasta", "charger", "warranty", "speaker")


def synthesize(n: int, mode: str, h: int, seed: int,
               flip: float = 0.0, test_fraction: float = 0.25):
    """Deterministic labeled dataset in hash-embedding space.

    separable: the first three sentence tokens are a class-marker word, so
    labels are recoverable from the embeddings by construction.  noisy: same
    sentences, then a seeded binomial fraction of labels is flipped.
    """
    if mode not in ("separable", "noisy"):
        raise ContractError(f"synthesize: unknown mode {mode!r}")
    rng = Rng(derive_seed(seed, "synth"))
    examples = []
    n_test = int(round(n * test_fraction))
    for i in range(n):
        label = LABELS[i % 3]
        marker = _MARKERS[label]
        fillers = [
            _FILLERS[int(j)] for j in rng.integers(0, len(_FILLERS), 3)
        ]
        # unique trailing token keeps sentence keys distinct across examples
        sentence = " ".join([marker, marker, marker] + fillers + [f"unit{i:04d}"])
        aspect = fillers[0]
        if mode == "noisy" and flip > 0.0 and rng.random() < flip:
            label = LABELS[(LABEL_TO_INDEX[label] + 1 + int(rng.integers(0, 2))) % 3]
        split = "test" if i >= n - n_test else "train"
        examples.append(hash_embed_example(
            example_id=f"syn-{i:04d}", sentence=sentence, aspect=aspect,
            label=label, split=split, h=h, seed=seed))
    return examples
