"""Iterative radix-2 FFT (unnormalized DFT convention)."""
from __future__ import annotations

import numpy as np

from .errors import UsageError


def _bit_reverse(n: int) -> np.ndarray:
    rev = np.zeros(n, dtype=np.intp)
    for i in range(1, n):
        rev[i] = rev[i >> 1] >> 1
        if i & 1:
            rev[i] |= n >> 1
    return rev


def fft_radix2(x) -> np.ndarray:
    """DFT of a 1-D sequence whose length is a power of two.

    Unnormalized forward transform: X_k = sum_j x_j exp(-2*pi*i*j*k/n).
    """
    x = np.asarray(x)
    if x.ndim != 1:
        raise UsageError("fft_radix2 expects a 1-D sequence")
    n = x.size
    if n == 0 or n & (n - 1):
        raise UsageError(f"length must be a power of two, got {n}")
    out = x[_bit_reverse(n)].astype(complex)
    m = 2
    while m <= n:
        half = m // 2
        w = np.exp(-2j * np.pi * np.arange(half) / m)
        blocks = out.reshape(-1, m)
        even = blocks[:, :half]
        odd = blocks[:, half:] * w
        out = np.concatenate([even + odd, even - odd], axis=1).reshape(-1)
        m *= 2
    return out


def dft_energy(v) -> float:
    """Squared l2 norm of the unnormalized DFT of a real sequence."""
    spec = fft_radix2(np.asarray(v, dtype=float))
    return float(np.sum(spec.real ** 2 + spec.imag ** 2))
