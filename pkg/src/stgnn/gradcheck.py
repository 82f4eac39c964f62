"""Central finite-difference gradient checking.

The one oracle every differentiable operation is held to: perturb each
input coordinate by +/- eps, difference the scalar objective, and compare
against the tape's reverse-mode gradient.  All checks run in float64.
"""

import numpy as np

from .tensor import Tensor

EPS = 1e-5
TOLERANCE = 1e-4

# Central differences of an O(1) objective bottom out near 1e-10, so
# gradient entries smaller than this are compared absolutely: without the
# floor, a parameter whose true gradient is exactly zero would be judged by
# the ratio of two noise terms.
NOISE_FLOOR = 1e-3


def numerical_grad(fn, tensors, eps: float = EPS):
    """Central-difference gradient of scalar `fn(*tensors)` per input tensor."""
    grads = []
    for t in tensors:
        flat = t.data.reshape(-1)
        g = np.zeros_like(flat)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            up = fn(*tensors).item()
            flat[i] = original - eps
            down = fn(*tensors).item()
            flat[i] = original
            g[i] = (up - down) / (2.0 * eps)
        grads.append(g.reshape(t.shape))
    return grads


def max_relative_error(fn, tensors, eps: float = EPS) -> float:
    """Largest |analytic - numeric| over inputs, scaled by the gradient magnitude.

    `fn` must return a scalar Tensor differentiable in every entry of
    `tensors`; each input is marked requires_grad here.
    """
    for t in tensors:
        t.requires_grad = True
        t.zero_grad()
    loss = fn(*tensors)
    loss.backward()
    numeric = numerical_grad(fn, tensors, eps=eps)

    worst = 0.0
    for t, num in zip(tensors, numeric):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        denom = np.maximum(np.maximum(np.abs(num), np.abs(analytic)), NOISE_FLOOR)
        worst = max(worst, (np.abs(analytic - num) / denom).max())
    return worst


def check(fn, tensors, tolerance: float = TOLERANCE, eps: float = EPS) -> float:
    """Assert the finite-difference match and return the observed error."""
    err = max_relative_error(fn, tensors, eps=eps)
    if not err < tolerance:
        raise AssertionError(f"gradcheck failed: rel err {err:.3e} >= {tolerance:.1e}")
    return err


def weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    """Collapse a non-scalar op output to a scalar probe for gradchecking."""
    return (out * Tensor(weights)).sum()


# -- named operation suite -----------------------------------------------------
#
# Every differentiable operation at toy sizes, from primitive kernels up to
# the assembled classifier.  Inputs are seeded so reruns are identical; each
# entry returns its observed max relative error.

def _suite_cases():
    from . import spectral
    from . import tensor as T
    from .model import Model, ModelConfig

    rng = np.random.default_rng(20240901)

    def rand(*shape):
        return Tensor(rng.normal(size=shape))

    def probe(shape):
        w = rng.normal(size=shape)
        return lambda out: weighted_sum(out, w)

    cases = {}

    p = probe((3, 4))
    a34, b34 = rand(3, 4), rand(3, 4)
    cases["add"] = lambda: max_relative_error(
        lambda x, y: p(T.add(x, y)), [a34, b34])
    cases["sub"] = lambda: max_relative_error(
        lambda x, y: p(T.sub(x, y)), [rand(3, 4), rand(3, 4)])
    cases["mul"] = lambda: max_relative_error(
        lambda x, y: p(T.mul(x, y)), [rand(3, 4), rand(3, 4)])
    cases["scale"] = lambda: max_relative_error(
        lambda x: p(T.scale(x, -1.7)), [rand(3, 4)])
    cases["sigmoid"] = lambda: max_relative_error(
        lambda x: p(T.sigmoid(x)), [rand(3, 4)])
    cases["tanh"] = lambda: max_relative_error(
        lambda x: p(T.tanh(x)), [rand(3, 4)])
    cases["leaky_relu"] = lambda: max_relative_error(
        lambda x: p(T.leaky_relu(x, 0.01)), [rand(3, 4)])
    cases["glu"] = lambda: max_relative_error(
        lambda x: p(T.glu(x)), [rand(3, 4)])
    cases["softmax"] = lambda: max_relative_error(
        lambda x: p(T.softmax(x, axis=1)), [rand(3, 4)])
    cases["log_softmax"] = lambda: max_relative_error(
        lambda x: p(T.log_softmax(x, axis=1)), [rand(3, 4)])

    pm = probe((2, 3, 5))
    cases["matmul"] = lambda: max_relative_error(
        lambda x, y: pm(T.matmul(x, y)), [rand(2, 3, 4), rand(4, 5)])

    pc = probe((2, 9))
    cases["conv1d"] = lambda: max_relative_error(
        lambda s, k: pc(T.conv1d(s, k)), [rand(2, 9), rand(3)])

    w_attn = np.abs(rng.normal(size=(5, 5))) + 0.05
    w_attn /= w_attn.sum(axis=1, keepdims=True)
    pl = probe((5, 5))
    cases["build_laplacian"] = lambda: max_relative_error(
        lambda w: pl(spectral.build_laplacian(w).laplacian),
        [Tensor(w_attn.copy())])

    pch = probe((2, 3, 4, 5))
    def cheb_fn(w, x):
        graph = spectral.build_laplacian(w)
        basis = spectral.chebyshev_basis(graph, 3)
        return pch(spectral.chebyshev_gft(basis, x))
    cases["chebyshev_gft"] = lambda: max_relative_error(
        cheb_fn, [Tensor(w_attn.copy()), rand(2, 4, 5)])

    wre, wim = rng.normal(size=(2, 7)), rng.normal(size=(2, 7))
    def dft_fn(x):
        sp = spectral.dft(x, axis=1)
        return (weighted_sum(sp.real, wre) + weighted_sum(sp.imag, wim))
    cases["dft"] = lambda: max_relative_error(dft_fn, [rand(2, 7)])

    pid = probe((2, 7))
    cases["idft"] = lambda: max_relative_error(
        lambda re, im: pid(spectral.idft(spectral.SpectrumPair(re, im, 1))),
        [rand(2, 7), rand(2, 7)])

    def encoder_case(kind):
        m = Model(ModelConfig(hidden_dim=6, max_seq_len=6, encoder_kind=kind),
                  seed=31)
        x, pw = rand(2, 5, 6), probe((2, 6, 6))
        def fn(*inputs):
            return pw(m.encode_latent(inputs[0]))
        return lambda: max_relative_error(fn, [x] + m.parameters())

    def attention_case():
        m = Model(ModelConfig(hidden_dim=6, max_seq_len=6), seed=23)
        x, pw = rand(2, 5, 6), probe((6, 6))
        def fn(*inputs):
            return pw(m.attention_adjacency(m.encode_latent(inputs[0])))
        return lambda: max_relative_error(fn, [x] + m.parameters())

    def full_forward_case():
        m = Model(ModelConfig(hidden_dim=8, max_seq_len=8, cheb_order=3),
                  seed=17)
        x, pw = rand(2, 6, 8), probe((2, 3))
        def fn(*inputs):
            return pw(m.forward(inputs[0]))
        return lambda: max_relative_error(fn, [x] + m.parameters())

    cases["rnn_gru"] = encoder_case("gru")
    cases["rnn_lstm"] = encoder_case("lstm")
    cases["rnn_bilstm"] = encoder_case("bilstm")
    cases["attention"] = attention_case()
    cases["full_forward"] = full_forward_case()
    return cases


def operation_suite(op_names=None):
    """Run the finite-difference suite; returns {op: max relative error}.

    `op_names` filters to a subset; unknown names raise ValueError.
    """
    cases = _suite_cases()
    if op_names is not None:
        unknown = sorted(set(op_names) - set(cases))
        if unknown:
            raise ValueError(f"unknown ops {unknown}; have {sorted(cases)}")
        cases = {name: cases[name] for name in op_names}
    return {name: fn() for name, fn in cases.items()}
