"""Kernel dispatch: compiled 2-D core when built, numpy otherwise.

Set ``BRANCHPDE_PURE_PYTHON=1`` to force the numpy path.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("BRANCHPDE_PURE_PYTHON"):
        raise ImportError("pure-python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

# Reduction blocks are keyed by particle index, so the summation tree does
# not depend on how blocks are distributed over workers.
BLOCK = 1024


def backend_name() -> str:
    return "cython" if _compiled is not None else "numpy"


def _use_compiled(d: int, force_python: bool) -> bool:
    return _compiled is not None and d == 2 and not force_python


def _spans(total: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(workers, total))
    edges = np.linspace(0, total, workers + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run(fn, spans, workers: int) -> None:
    if workers <= 1 or len(spans) <= 1:
        for a, b in spans:
            fn(a, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda ab: fn(*ab), spans))


def pairwise_sum(parts: np.ndarray) -> np.ndarray:
    """Fixed binary-tree sum over the leading axis."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to sum")
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def basis_sums(positions: np.ndarray, K: int, workers: int = 1, force_python: bool = False) -> np.ndarray:
    """Sum of every tensor basis function over all particles, shape ``(2K+1,)*d``."""
    pos = np.ascontiguousarray(positions, dtype=np.float64)
    n, d = pos.shape
    M = 2 * K + 1
    if n == 0:
        return np.zeros((M,) * d)
    nblocks = -(-n // BLOCK)
    partials = np.empty((nblocks,) + (M,) * d)
    if _use_compiled(d, force_python):
        fn = lambda a, b: _compiled.project_blocks_2d(pos, K, BLOCK, partials, a, b)
    else:
        fn = lambda a, b: _kernels_py.project_blocks(pos, K, BLOCK, partials, a, b)
    _run(fn, _spans(nblocks, workers), workers)
    return pairwise_sum(partials)


def evaluate(coeffs: np.ndarray, positions: np.ndarray, with_grad: bool = False,
             workers: int = 1, force_python: bool = False):
    """Series values (and gradients) at each row of ``positions``."""
    pos = np.ascontiguousarray(positions, dtype=np.float64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    n, d = pos.shape
    values = np.empty(n)
    grads = np.empty((n, d)) if with_grad else np.empty((0, d))
    if n == 0:
        return (values, grads) if with_grad else values
    nblocks = -(-n // BLOCK)
    spans = [(a * BLOCK, min(b * BLOCK, n)) for a, b in _spans(nblocks, workers)]
    if _use_compiled(d, force_python):
        gbuf = grads if with_grad else np.empty((1, 2))
        fn = lambda a, b: _compiled.evaluate_2d(coeffs, pos, values, gbuf, a, b, with_grad)
    else:
        fn = lambda a, b: _kernels_py.evaluate(coeffs, pos, values, grads, a, b, with_grad)
    _run(fn, spans, workers)
    return (values, grads) if with_grad else values
