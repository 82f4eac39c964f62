"""Graph-spectral and frequency-domain transforms.

Builds the symmetric normalized Laplacian from a learned adjacency, applies
the graph Fourier transform either exactly (eigenvector reference path, no
gradients) or through a Chebyshev polynomial basis (differentiable), and
moves signals between the sequence and frequency domains with an exact
DFT/inverse-DFT pair that handles arbitrary lengths.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError, DimensionError, NumericError
from .tensor import Tensor, _make, inv_sqrt_or_zero, matmul, reshape, stack, transpose

LAPLACIAN_LAMBDA_MAX = 2.0  # spectral bound of the normalized Laplacian


@dataclass
class LatentGraph:
    """Symmetrized adjacency, degree vector and normalized Laplacian."""

    adjacency: Tensor   # h x h, symmetric, nonnegative
    degree: Tensor      # h, row sums of the symmetrized adjacency
    laplacian: Tensor   # h x h, symmetric PSD, eigenvalues in [0, 2]

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]


@dataclass
class ChebyshevBasis:
    """T_0(L~) .. T_{k-1}(L~) for the rescaled Laplacian L~ = 2L/lambda_max - I."""

    order: int
    terms: list          # k Tensors of shape h x h
    lambda_max: float


@dataclass
class SpectrumPair:
    """Real and imaginary DFT components, plus the axis they were taken along."""

    real: Tensor
    imag: Tensor
    axis: int

    @property
    def shape(self):
        return self.real.shape


def build_laplacian(w_attention: Tensor) -> LatentGraph:
    """Symmetrize an attention adjacency and form I - D^{-1/2} W D^{-1/2}.

    Entries must be nonnegative.  Zero-degree nodes produce zero rows in the
    normalized product, leaving the corresponding Laplacian row equal to the
    identity row.
    """
    if w_attention.ndim != 2 or w_attention.shape[0] != w_attention.shape[1]:
        raise DimensionError(
            f"build_laplacian: adjacency must be square, got {w_attention.shape}")
    if (w_attention.data < 0).any():
        raise ContractError("build_laplacian: adjacency has negative entries")

    h = w_attention.shape[0]
    w_sym = (w_attention + transpose(w_attention)) * 0.5
    degree = w_sym.sum(axis=1)
    dis = inv_sqrt_or_zero(degree)
    normalized = reshape(dis, (h, 1)) * w_sym * reshape(dis, (1, h))
    laplacian = Tensor(np.eye(h)) - normalized
    return LatentGraph(adjacency=w_sym, degree=degree, laplacian=laplacian)


# -- exact eigenvector path (test oracle, no gradients) ----------------------

def eigen_decompose(graph: LatentGraph):
    """Eigenvalues (ascending) and orthonormal eigenvectors of the Laplacian."""
    try:
        eigvals, eigvecs = np.linalg.eigh(graph.laplacian.data)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    return eigvals, eigvecs


def eigen_gft(graph: LatentGraph, x: Tensor) -> Tensor:
    """U^T applied along the channel (last) axis.  Reference path only."""
    _check_channels(graph, x, "eigen_gft")
    _, u = eigen_decompose(graph)
    return Tensor(x.data @ u)


def eigen_igft(graph: LatentGraph, x_bar: Tensor) -> Tensor:
    """Inverse of `eigen_gft`: U applied along the channel axis."""
    _check_channels(graph, x_bar, "eigen_igft")
    _, u = eigen_decompose(graph)
    return Tensor(x_bar.data @ u.T)


def _check_channels(graph: LatentGraph, x, op_name: str):
    if x.shape[-1] != graph.num_nodes:
        raise DimensionError(
            f"{op_name}: channel axis {x.shape[-1]} does not match graph "
            f"size {graph.num_nodes}")


# -- Chebyshev path (differentiable) ------------------------------------------

def chebyshev_basis(graph: LatentGraph, order: int,
                    lambda_max: float = LAPLACIAN_LAMBDA_MAX) -> ChebyshevBasis:
    """Build T_0 .. T_{k-1} of the rescaled Laplacian via the recurrence."""
    if order < 1:
        raise ContractError(f"chebyshev_basis: order must be >= 1, got {order}")
    h = graph.num_nodes
    identity = Tensor(np.eye(h))
    terms = [identity]
    if order >= 2:
        rescaled = graph.laplacian * (2.0 / lambda_max) - identity
        terms.append(rescaled)
        for _ in range(2, order):
            terms.append(matmul(rescaled, terms[-1]) * 2.0 - terms[-2])
    return ChebyshevBasis(order=order, terms=terms, lambda_max=lambda_max)


def chebyshev_gft(basis: ChebyshevBasis, x: Tensor) -> Tensor:
    """Stack X T_n^T over n: (b, s, h) -> (b, k, s, h).

    Slice n applies T_n(L~) to every channel vector, so gradients reach both
    the signal and, through the basis, the attention adjacency.
    """
    if x.ndim != 3:
        raise DimensionError(f"chebyshev_gft: expected (b, s, h) input, got {x.shape}")
    h = basis.terms[0].shape[0]
    if x.shape[-1] != h:
        raise DimensionError(
            f"chebyshev_gft: channel axis {x.shape[-1]} does not match basis size {h}")
    slices = [matmul(x, transpose(term)) for term in basis.terms]
    return stack(slices, axis=1)


# -- DFT along the sequence axis ----------------------------------------------

def dft(x: Tensor, axis: int = -1) -> SpectrumPair:
    """Unnormalized forward DFT of a real signal along `axis`.

    Arbitrary lengths are exact (radix-2 or Bluestein underneath); no padding
    is ever applied.  Both output components are differentiable in x.
    """
    axis = _normalize_axis(x.ndim, axis)
    n = x.shape[axis]
    moved = np.moveaxis(x.data, axis, -1)
    lead_shape = moved.shape
    spectrum = kernels.fft_rows(moved.reshape(-1, n).astype(np.complex128), -1)
    spectrum = np.moveaxis(spectrum.reshape(lead_shape), -1, axis)

    def vjp_component(component):
        # adjoint of a linear map: one inverse transform of the out-gradient
        def vjp(g):
            g_rows = np.moveaxis(component(g), axis, -1).reshape(-1, n)
            back = kernels.ifft_rows(g_rows) * n
            return (np.moveaxis(back.real.reshape(lead_shape), -1, axis),)
        return vjp

    real = _make(np.ascontiguousarray(spectrum.real), (x,),
                 vjp_component(lambda g: g.astype(np.complex128)))
    imag = _make(np.ascontiguousarray(spectrum.imag), (x,),
                 vjp_component(lambda g: 1j * g.astype(np.complex128)))
    return SpectrumPair(real=real, imag=imag, axis=axis)


def idft(sp: SpectrumPair) -> Tensor:
    """Inverse DFT, truncated to its real part.

    For a conjugate-symmetric spectrum the discarded imaginary residue is
    below 1e-9, making this the exact inverse of `dft`.  Differentiable in
    both spectrum components.
    """
    if sp.real.shape != sp.imag.shape:
        raise DimensionError(
            f"idft: component shapes differ: {sp.real.shape} vs {sp.imag.shape}")
    axis = sp.axis
    n = sp.real.shape[axis]
    moved_shape = np.moveaxis(sp.real.data, axis, -1).shape

    complex_rows = (np.moveaxis(sp.real.data, axis, -1)
                    + 1j * np.moveaxis(sp.imag.data, axis, -1)).reshape(-1, n)
    signal = kernels.ifft_rows(complex_rows).reshape(moved_shape)
    out = np.moveaxis(np.ascontiguousarray(signal.real), -1, axis)

    def vjp(g):
        g_rows = np.moveaxis(g, axis, -1).reshape(-1, n).astype(np.complex128)
        back = kernels.ifft_rows(g_rows).reshape(moved_shape)
        grad_real = np.moveaxis(back.real, -1, axis)
        grad_imag = np.moveaxis(-back.imag, -1, axis)
        return grad_real, grad_imag

    return _make(out, (sp.real, sp.imag), vjp)


def _normalize_axis(ndim: int, axis: int) -> int:
    if axis < -ndim or axis >= ndim:
        raise DimensionError(f"axis {axis} out of range for {ndim}-d tensor")
    return axis % ndim
