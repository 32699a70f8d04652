"""Pure-numpy kernels; same contract as the compiled ``_kernels`` module.

These handle any dimension.  The compiled module only covers d = 2.
"""

from __future__ import annotations

import math

import numpy as np

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


def axis_basis(x, K: int, with_deriv: bool = False):
    """Per-axis basis matrix of shape ``(n, 2K+1)`` (and its x-derivative)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    M = 2 * K + 1
    phi = np.empty((n, M))
    dphi = np.empty((n, M)) if with_deriv else None
    c1, s1 = np.cos(x), np.sin(x)
    ck, sk = np.ones(n), np.zeros(n)
    phi[:, K] = INV_SQRT_2PI
    if with_deriv:
        dphi[:, K] = 0.0
    for k in range(1, K + 1):
        ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
        phi[:, K + k] = ck * INV_SQRT_PI
        phi[:, K - k] = sk * INV_SQRT_PI
        if with_deriv:
            dphi[:, K + k] = -k * sk * INV_SQRT_PI
            dphi[:, K - k] = k * ck * INV_SQRT_PI
    return phi, dphi


def project_blocks(pos, K: int, block: int, partials, b_start: int, b_end: int) -> None:
    n, d = pos.shape
    M = 2 * K + 1
    for b in range(b_start, b_end):
        chunk = pos[b * block : min((b + 1) * block, n)]
        t = axis_basis(chunk[:, 0], K)[0]
        for j in range(1, d):
            phi = axis_basis(chunk[:, j], K)[0]
            t = (t[:, :, None] * phi[:, None, :]).reshape(chunk.shape[0], -1)
        partials[b] = t.sum(axis=0).reshape((M,) * d)


def _contract(coeffs, mats):
    # sum over modes of coeffs[i, j, ...] * mats[0][n, i] * mats[1][n, j] * ...
    w = np.einsum("ni,i...->n...", mats[0], coeffs)
    for m in mats[1:]:
        w = np.einsum("ni,ni...->n...", m, w)
    return w


def evaluate(coeffs, pos, values, grads, start: int, end: int, with_grad: bool) -> None:
    d = coeffs.ndim
    K = (coeffs.shape[0] - 1) // 2
    chunk = pos[start:end]
    bases = [axis_basis(chunk[:, j], K, with_grad) for j in range(d)]
    values[start:end] = _contract(coeffs, [b[0] for b in bases])
    if with_grad:
        for j in range(d):
            mats = [b[0] for b in bases]
            mats[j] = bases[j][1]
            grads[start:end, j] = _contract(coeffs, mats)
