"""The aspect-polarity classifier.

A recurrent encoder reads the embedded sentence channel-major and its step
outputs feed a self-attention layer whose softmax scores become the adjacency
of a latent graph over embedding channels.  Each spectral block then pushes
the sentence through that graph's Chebyshev transform, a DFT along the
sequence axis, gated convolutional feature extraction on the real and
imaginary components, and the inverse transforms.  A small decoder head maps
the result to three polarity logits.
"""

import io
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import spectral
from . import tensor as T
from .errors import CheckpointError, ConfigError, ContractError
from .rng import Rng
from .tensor import Tensor

ENCODER_KINDS = ("gru", "lstm", "bilstm")
DECODER_KINDS = ("fc", "gru_fc", "lstm_fc")
POOLING_KINDS = ("cls", "mean")

CHECKPOINT_MAGIC = b"STGC"
CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    hidden_dim: int = 768
    max_seq_len: int = 128
    encoder_kind: str = "gru"
    decoder_kind: str = "fc"
    cheb_order: int = 3
    num_blocks: int = 1
    residual: bool = False
    dropout: float = 0.0
    num_classes: int = 3
    leaky_slope: float = 0.01
    pooling: str = "cls"

    def validate(self):
        if self.hidden_dim < 1 or self.max_seq_len < 1:
            raise ConfigError("hidden_dim and max_seq_len must be positive")
        if self.encoder_kind not in ENCODER_KINDS:
            raise ConfigError(f"encoder_kind must be one of {ENCODER_KINDS}, "
                              f"got {self.encoder_kind!r}")
        if self.decoder_kind not in DECODER_KINDS:
            raise ConfigError(f"decoder_kind must be one of {DECODER_KINDS}, "
                              f"got {self.decoder_kind!r}")
        if self.pooling not in POOLING_KINDS:
            raise ConfigError(f"pooling must be one of {POOLING_KINDS}")
        if self.cheb_order < 1 or self.num_blocks < 1:
            raise ConfigError("cheb_order and num_blocks must be >= 1")
        if self.num_classes != 3:
            raise ConfigError("this classifier is three-way only")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")


def _glorot(rng: Rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_in, fan_out))


class Model:
    """Parameter container plus the forward pipeline."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        config.validate()
        self.config = config
        self.seed = int(seed)
        self.training = True
        self.params: dict[str, Tensor] = {}
        self._dropout_rng = Rng(seed).child("dropout")
        self._init_params(Rng(seed).child("init"))

    # -- parameter management ------------------------------------------------

    def _param(self, name: str, array: np.ndarray) -> Tensor:
        t = Tensor(array, requires_grad=True, name=name)
        self.params[name] = t
        return t

    def _init_cell(self, rng: Rng, prefix: str, in_dim: int, hid: int, gates):
        for gate in gates:
            self._param(f"{prefix}.w_i{gate}", _glorot(rng, in_dim, hid))
            self._param(f"{prefix}.w_h{gate}", _glorot(rng, hid, hid))
            self._param(f"{prefix}.b_{gate}", np.zeros(hid))

    def _init_params(self, rng: Rng):
        cfg = self.config
        h, smax, k = cfg.hidden_dim, cfg.max_seq_len, cfg.cheb_order

        # encoder consumes h steps of width s; weights sized for the padded max
        gates = {"gru": ("r", "z", "n"), "lstm": ("i", "f", "g", "o")}
        if cfg.encoder_kind == "bilstm":
            self._init_cell(rng, "enc.fwd", smax, h, gates["lstm"])
            self._init_cell(rng, "enc.bwd", smax, h, gates["lstm"])
            self._param("enc.w_proj", _glorot(rng, 2 * h, h))
            self._param("enc.b_proj", np.zeros(h))
        else:
            self._init_cell(rng, "enc", smax, h, gates[cfg.encoder_kind])

        self._param("attn.w_q", _glorot(rng, h, h))
        self._param("attn.w_k", _glorot(rng, h, h))

        delta = np.zeros(3)
        delta[1] = 1.0
        for b in range(cfg.num_blocks):
            self._param(f"block{b}.conv_real", delta + rng.normal(3, scale=0.01))
            self._param(f"block{b}.conv_imag", delta + rng.normal(3, scale=0.01))
            # start as a pass-through of the T0 channel
            igft = np.zeros((k * h, h))
            igft[:h, :] = np.eye(h)
            self._param(f"block{b}.w_igft", igft + rng.normal((k * h, h), scale=0.01))

        if cfg.decoder_kind == "fc":
            self._param("dec.w_fc1", _glorot(rng, h, h))
            self._param("dec.b_fc1", np.zeros(h))
        else:
            cell = "gru" if cfg.decoder_kind == "gru_fc" else "lstm"
            self._init_cell(rng, "dec.rnn", h, h, gates[cell])
        self._param("dec.w_sub1", _glorot(rng, h, h))
        self._param("dec.b_sub1", np.zeros(h))
        self._param("dec.w_sub2", _glorot(rng, h, cfg.num_classes))
        self._param("dec.b_sub2", np.zeros(cfg.num_classes))

    def parameters(self):
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def train(self):
        self.training = True

    def eval(self):
        self.training = False

    # -- recurrent cells -------------------------------------------------------

    def _input_weights(self, prefix: str, gates: str, width: int) -> dict:
        """Input projections, cut down to the current step width once per unroll.

        Slicing is equivalent to zero-padding every step vector to the full
        max_seq_len width, so variable-length batches share one weight matrix.
        """
        sliced = {}
        for g in gates:
            w = self.params[f"{prefix}.w_i{g}"]
            sliced[g] = w if width == w.shape[0] else T.take(w, slice(0, width))
        return sliced

    def _gru_step(self, prefix: str, w_in: dict, x: Tensor, h: Tensor) -> Tensor:
        p = self.params
        r = T.sigmoid(x @ w_in["r"] + h @ p[f"{prefix}.w_hr"] + p[f"{prefix}.b_r"])
        z = T.sigmoid(x @ w_in["z"] + h @ p[f"{prefix}.w_hz"] + p[f"{prefix}.b_z"])
        n = T.tanh(x @ w_in["n"] + r * (h @ p[f"{prefix}.w_hn"]) + p[f"{prefix}.b_n"])
        ones = Tensor(np.ones_like(z.data))
        return (ones - z) * n + z * h

    def _lstm_step(self, prefix: str, w_in: dict, x: Tensor, h: Tensor, c: Tensor):
        p = self.params
        i = T.sigmoid(x @ w_in["i"] + h @ p[f"{prefix}.w_hi"] + p[f"{prefix}.b_i"])
        f = T.sigmoid(x @ w_in["f"] + h @ p[f"{prefix}.w_hf"] + p[f"{prefix}.b_f"])
        g = T.tanh(x @ w_in["g"] + h @ p[f"{prefix}.w_hg"] + p[f"{prefix}.b_g"])
        o = T.sigmoid(x @ w_in["o"] + h @ p[f"{prefix}.w_ho"] + p[f"{prefix}.b_o"])
        c_next = f * c + i * g
        return o * T.tanh(c_next), c_next

    def _run_cell(self, kind: str, prefix: str, steps, batch: int, hid: int,
                  width: int):
        """Unroll a recurrent cell over `steps`, returning all hidden states."""
        gates = "rzn" if kind == "gru" else "ifgo"
        w_in = self._input_weights(prefix, gates, width)
        h = Tensor(np.zeros((batch, hid)))
        c = Tensor(np.zeros((batch, hid)))
        outputs = []
        for x in steps:
            if kind == "gru":
                h = self._gru_step(prefix, w_in, x, h)
            else:
                h, c = self._lstm_step(prefix, w_in, x, h, c)
            outputs.append(h)
        return outputs

    # -- pipeline stages ---------------------------------------------------------

    def encode_latent(self, x: Tensor) -> Tensor:
        """(b, s, h) -> channel-major recurrent pass -> (b, h, h)."""
        cfg = self.config
        b, s, h = x.shape
        if s > cfg.max_seq_len:
            raise ContractError(
                f"sequence length {s} exceeds the model's max_seq_len "
                f"{cfg.max_seq_len}")
        channel_major = T.swapaxes(x, 1, 2)  # (b, h, s)
        steps = [T.take(channel_major, (slice(None), t)) for t in range(h)]

        if cfg.encoder_kind == "bilstm":
            fwd = self._run_cell("lstm", "enc.fwd", steps, b, h, s)
            bwd = self._run_cell("lstm", "enc.bwd", steps[::-1], b, h, s)[::-1]
            both = [T.concat([f, r], axis=1) for f, r in zip(fwd, bwd)]
            proj_w, proj_b = self.params["enc.w_proj"], self.params["enc.b_proj"]
            states = [m @ proj_w + proj_b for m in both]
        else:
            states = self._run_cell(cfg.encoder_kind, "enc", steps, b, h, s)
        return T.stack(states, axis=1)

    def attention_adjacency(self, encoded: Tensor) -> Tensor:
        """Scaled dot-product scores over channels, batch-averaged, softmaxed."""
        h = self.config.hidden_dim
        q = encoded @ self.params["attn.w_q"]
        k = encoded @ self.params["attn.w_k"]
        scores = (q @ T.swapaxes(k, 1, 2)) * (1.0 / np.sqrt(h))
        shared = scores.sum(axis=0) * (1.0 / encoded.shape[0])
        return T.softmax(shared, axis=-1)

    def spectral_block(self, x: Tensor, basis: spectral.ChebyshevBasis,
                       block: int) -> Tensor:
        """(b, s, h) -> graph + frequency domain features -> (b, s, h)."""
        p = self.params
        in_freq = spectral.dft(spectral.chebyshev_gft(basis, x), axis=2)

        def feature_path(component: Tensor, kernel: Tensor) -> Tensor:
            rows = T.swapaxes(component, 2, 3)  # convolve along frequency bins
            return T.swapaxes(T.glu(T.conv1d(rows, kernel)), 2, 3)

        real = feature_path(in_freq.real, p[f"block{block}.conv_real"])
        imag = feature_path(in_freq.imag, p[f"block{block}.conv_imag"])
        back = spectral.idft(spectral.SpectrumPair(real, imag, axis=2))

        b, k, s, h = back.shape
        merged = T.swapaxes(back, 1, 2).reshape(b, s, k * h)
        out = merged @ p[f"block{block}.w_igft"]
        if self.config.residual:
            out = out + x
        return self._dropout(out)

    def decode(self, x: Tensor) -> Tensor:
        """(b, s, h) -> three raw class scores per example."""
        cfg = self.config
        p = self.params
        if cfg.decoder_kind == "fc":
            if cfg.pooling == "cls":
                pooled = T.take(x, (slice(None), 0))
            else:
                pooled = x.sum(axis=1) * (1.0 / x.shape[1])
            pooled = self._dropout(pooled)
            hidden = pooled @ p["dec.w_fc1"] + p["dec.b_fc1"]
        else:
            kind = "gru" if cfg.decoder_kind == "gru_fc" else "lstm"
            steps = [T.take(x, (slice(None), t)) for t in range(x.shape[1])]
            hidden = self._run_cell(kind, "dec.rnn", steps, x.shape[0],
                                    cfg.hidden_dim, cfg.hidden_dim)[-1]
            hidden = self._dropout(hidden)
        sub1 = hidden @ p["dec.w_sub1"] + p["dec.b_sub1"]
        return T.leaky_relu(sub1, cfg.leaky_slope) @ p["dec.w_sub2"] + p["dec.b_sub2"]

    def forward(self, x: Tensor) -> Tensor:
        """Full pipeline on a padded (b, s, h) batch tensor."""
        if x.ndim != 3:
            raise ContractError(f"forward expects a (b, s, h) tensor, got {x.shape}")
        if x.shape[0] == 0:
            raise ContractError("forward: empty batch")
        if x.shape[1] == 0:
            raise ContractError("forward: empty sequence")
        if x.shape[2] != self.config.hidden_dim:
            raise ContractError(
                f"forward: embedding width {x.shape[2]} does not match "
                f"hidden_dim {self.config.hidden_dim}")
        encoded = self.encode_latent(x)
        adjacency = self.attention_adjacency(encoded)
        graph = spectral.build_laplacian(adjacency)
        basis = spectral.chebyshev_basis(graph, self.config.cheb_order)
        out = x
        for b in range(self.config.num_blocks):
            out = self.spectral_block(out, basis, b)
        return self.decode(out)

    def _dropout(self, x: Tensor) -> Tensor:
        p = self.config.dropout
        if not self.training or p == 0.0:
            return x
        mask = (self._dropout_rng.random(x.shape) >= p) / (1.0 - p)
        return x * Tensor(mask)


# -- checkpoint container -------------------------------------------------------

def save_checkpoint(model: Model, path: str):
    """Versioned binary container: config echo plus named float64 tensors."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    config_blob = json.dumps(asdict(model.config), sort_keys=True,
                             separators=(",", ":")).encode("utf-8")
    buf.write(struct.pack("<I", len(config_blob)))
    buf.write(config_blob)
    buf.write(struct.pack("<I", len(model.params)))
    for name, p in model.params.items():
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", p.data.ndim))
        for dim in p.data.shape:
            buf.write(struct.pack("<I", dim))
        buf.write(p.data.astype("<f8").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path: str) -> Model:
    with open(path, "rb") as f:
        raw = f.read()
    view = io.BytesIO(raw)
    if view.read(4) != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    (version,) = struct.unpack("<I", view.read(4))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (config_len,) = struct.unpack("<I", view.read(4))
    config = ModelConfig(**json.loads(view.read(config_len).decode("utf-8")))
    model = Model(config, seed=0)
    (n_params,) = struct.unpack("<I", view.read(4))
    for _ in range(n_params):
        (name_len,) = struct.unpack("<H", view.read(2))
        name = view.read(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", view.read(1))
        shape = tuple(struct.unpack("<I", view.read(4))[0] for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(view.read(count * 8), dtype="<f8").reshape(shape)
        if name not in model.params:
            raise CheckpointError(f"{path}: unknown parameter {name!r}")
        if model.params[name].data.shape != shape:
            raise CheckpointError(
                f"{path}: parameter {name!r} has shape {shape}, expected "
                f"{model.params[name].data.shape}")
        model.params[name].data = np.ascontiguousarray(data)
    return model
