"""Numba-compiled kernel implementations (loop form of the numpy twins)."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _fft_pow2(x, sign):
    m, n = x.shape
    out = x.copy()
    # in-place bit-reversal permutation of columns
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            for r in range(m):
                tmp = out[r, i]
                out[r, i] = out[r, j]
                out[r, j] = tmp

    size = 2
    while size <= n:
        half = size // 2
        tw = np.empty(half, dtype=np.complex128)
        ang = sign * 2.0 * math.pi / size
        for p in range(half):
            tw[p] = complex(math.cos(ang * p), math.sin(ang * p))
        for r in range(m):
            for start in range(0, n, size):
                for p in range(half):
                    u = out[r, start + p]
                    v = out[r, start + p + half] * tw[p]
                    out[r, start + p] = u + v
                    out[r, start + p + half] = u - v
        size *= 2
    return out


@njit(cache=True)
def _bluestein(x, sign):
    m, n = x.shape
    chirp = np.empty(n, dtype=np.complex128)
    for j in range(n):
        ang = sign * math.pi * ((j * j) % (2 * n)) / n
        chirp[j] = complex(math.cos(ang), math.sin(ang))

    padded = 1
    while padded < 2 * n - 1:
        padded <<= 1

    a = np.zeros((m, padded), dtype=np.complex128)
    for r in range(m):
        for j in range(n):
            a[r, j] = x[r, j] * chirp[j]
    b = np.zeros((1, padded), dtype=np.complex128)
    for j in range(n):
        b[0, j] = np.conj(chirp[j])
    for j in range(1, n):
        b[0, padded - j] = np.conj(chirp[j])

    fa = _fft_pow2(a, -1)
    fb = _fft_pow2(b, -1)
    for r in range(m):
        for j in range(padded):
            fa[r, j] *= fb[0, j]
    conv = _fft_pow2(fa, +1)

    out = np.empty((m, n), dtype=np.complex128)
    inv = 1.0 / padded
    for r in range(m):
        for j in range(n):
            out[r, j] = conv[r, j] * inv * chirp[j]
    return out


def fft_rows(x: np.ndarray, sign: int) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.complex128)
    n = x.shape[1]
    if n <= 1:
        return x.copy()
    if n & (n - 1) == 0:
        return _fft_pow2(x, sign)
    return _bluestein(x, sign)


@njit(cache=True)
def _conv1d_rows(x, k):
    m, n = x.shape
    klen = k.shape[0]
    c = klen // 2
    out = np.zeros((m, n), dtype=np.float64)
    for r in range(m):
        for i in range(n):
            acc = 0.0
            for j in range(klen):
                p = i + j - c
                if 0 <= p < n:
                    acc += x[r, p] * k[j]
            out[r, i] = acc
    return out


@njit(cache=True)
def _conv1d_kernel_grad(x, g, klen):
    m, n = x.shape
    c = klen // 2
    grad = np.zeros(klen, dtype=np.float64)
    for r in range(m):
        for i in range(n):
            gi = g[r, i]
            for j in range(klen):
                p = i + j - c
                if 0 <= p < n:
                    grad[j] += gi * x[r, p]
    return grad


def conv1d_rows(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    return _conv1d_rows(np.ascontiguousarray(x, dtype=np.float64),
                        np.ascontiguousarray(k, dtype=np.float64))


def conv1d_kernel_grad(x: np.ndarray, g: np.ndarray, klen: int) -> np.ndarray:
    return _conv1d_kernel_grad(np.ascontiguousarray(x, dtype=np.float64),
                               np.ascontiguousarray(g, dtype=np.float64), klen)
