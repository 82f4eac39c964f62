"""Vectorized pure-numpy kernel implementations.

Same algorithms as the numba twins (iterative radix-2 Cooley-Tukey plus
Bluestein's chirp-z reduction for arbitrary lengths) expressed as whole-array
operations.
"""

import numpy as np


def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def _fft_pow2(x: np.ndarray, sign: int) -> np.ndarray:
    m, n = x.shape
    if n == 1:
        return x.astype(np.complex128, copy=True)
    out = x[:, _bit_reversal(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        v = out.reshape(m, n // size, size)
        odd = v[:, :, half:] * tw
        even = v[:, :, :half]
        out = np.concatenate((even + odd, even - odd), axis=2).reshape(m, n)
        size *= 2
    return out


def _bluestein(x: np.ndarray, sign: int) -> np.ndarray:
    m, n = x.shape
    j = np.arange(n, dtype=np.int64)
    # j^2 mod 2n keeps the chirp phase accurate for long rows
    chirp = np.exp(sign * 1j * np.pi * ((j * j) % (2 * n)) / n)
    padded = 1 << (2 * n - 1).bit_length()

    a = np.zeros((m, padded), dtype=np.complex128)
    a[:, :n] = x * chirp
    b = np.zeros(padded, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[padded - n + 1:] = np.conj(chirp[1:])[::-1]

    fa = _fft_pow2(a, -1)
    fb = _fft_pow2(b[None, :], -1)[0]
    conv = _fft_pow2(fa * fb, +1) / padded
    return conv[:, :n] * chirp


def fft_rows(x: np.ndarray, sign: int) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.complex128)
    n = x.shape[1]
    if n <= 1:
        return x.copy()
    if n & (n - 1) == 0:
        return _fft_pow2(x, sign)
    return _bluestein(x, sign)


def conv1d_rows(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    m, n = x.shape
    klen = k.shape[0]
    c = klen // 2
    padded = np.zeros((m, n + klen - 1), dtype=np.float64)
    padded[:, c:c + n] = x
    out = np.zeros((m, n), dtype=np.float64)
    for j in range(klen):
        out += k[j] * padded[:, j:j + n]
    return out


def conv1d_kernel_grad(x: np.ndarray, g: np.ndarray, klen: int) -> np.ndarray:
    m, n = x.shape
    c = klen // 2
    padded = np.zeros((m, n + klen - 1), dtype=np.float64)
    padded[:, c:c + n] = x
    grad = np.empty(klen, dtype=np.float64)
    for j in range(klen):
        grad[j] = np.sum(g * padded[:, j:j + n])
    return grad
