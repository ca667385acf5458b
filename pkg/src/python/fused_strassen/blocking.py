"""
The five-loop blocked GEMM driver and the packing engine.

Packing copies an m_C x k_C block of A (or a k_C x n_C block of B) into a contiguous buffer laid out in
micro-panel order. When the operand is a coefficient-weighted sum of quadrants the sum is formed while
packing, so Strassen's operand additions cost no extra pass over memory. Fringe blocks are zero-padded inside
the packed buffers only.
"""
import logging
import time
from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numba
import numpy as np
from numba import njit, prange

from .kernel import DestSpec, _macro_kernel
from .matrix import MatrixView, ProblemShape, ShapeError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlockingParams:
    """Cache block sizes m_C, n_C, k_C and register tile sizes m_R, n_R, in elements."""

    m_c: int = 96
    n_c: int = 4096
    k_c: int = 256
    m_r: int = 8
    n_r: int = 4

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"Blocking parameter {f.name} must be positive, got {getattr(self, f.name)}.")
        if self.m_c % self.m_r:
            raise ValueError(f"m_C={self.m_c} is not a multiple of m_R={self.m_r}.")
        if self.n_c % self.n_r:
            raise ValueError(f"n_C={self.n_c} is not a multiple of n_R={self.n_r}.")


@dataclass(frozen=True)
class OperandSum:
    """
    sum_t coeff_t * view_t over views sharing one logical extent (rows x cols).

    Views may be clipped to fewer rows or columns than the logical extent; positions outside a view contribute
    nothing from that term. Terms are accumulated left to right.
    """

    terms: Tuple[Tuple[MatrixView, float], ...]
    rows: int
    cols: int

    def __post_init__(self):
        if not self.terms:
            raise ShapeError("An OperandSum needs at least one term.")
        first = self.terms[0][0]
        for view, coeff in self.terms:
            if coeff not in (1.0, -1.0):
                raise ValueError(f"Operand coefficients must be +1 or -1, got {coeff}.")
            if view.rows > self.rows or view.cols > self.cols:
                raise ShapeError(f"A {view.shape} term exceeds the logical extent {self.rows}x{self.cols}.")
            same_layout = view.row_stride == first.row_stride and view.col_stride == first.col_stride
            if view.buffer is not first.buffer or not same_layout:
                raise ShapeError("All terms of an OperandSum must be views of one buffer with one layout.")

    @classmethod
    def single(cls, view: MatrixView) -> "OperandSum":
        return cls(terms=((view, 1.0),), rows=view.rows, cols=view.cols)

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def is_empty(self) -> bool:
        return all(view.is_empty for view, _ in self.terms)

    def kernel_args(self):
        first = self.terms[0][0]
        origins = np.array([view.origin for view, _ in self.terms], dtype=np.int64)
        rows = np.array([view.rows for view, _ in self.terms], dtype=np.int64)
        cols = np.array([view.cols for view, _ in self.terms], dtype=np.int64)
        coeffs = np.array([coeff for _, coeff in self.terms], dtype=np.float64)
        return first.buffer, first.row_stride, first.col_stride, origins, rows, cols, coeffs


@dataclass
class PackedPanelA:
    """
    A packed rows x depth block of A: ceil(rows / m_R) micro-panels, each holding ``depth`` columns of m_R
    contiguous elements. Element (i, p) is at ``(i // m_R) * m_R * depth + p * m_R + i % m_R``.
    """

    buffer: np.ndarray
    rows: int
    depth: int
    m_r: int

    def element(self, i: int, p: int) -> float:
        return self.buffer[(i // self.m_r) * self.m_r * self.depth + p * self.m_r + i % self.m_r]

    def micro_panel(self, index: int) -> np.ndarray:
        size = self.m_r * self.depth
        return self.buffer[index * size : (index + 1) * size]

    @property
    def num_micro_panels(self) -> int:
        return -(-self.rows // self.m_r)


@dataclass
class PackedPanelB:
    """
    A packed depth x cols block of B: ceil(cols / n_R) micro-panels, each holding ``depth`` rows of n_R
    contiguous elements. Element (p, j) is at ``(j // n_R) * n_R * depth + p * n_R + j % n_R``.
    """

    buffer: np.ndarray
    depth: int
    cols: int
    n_r: int

    def element(self, p: int, j: int) -> float:
        return self.buffer[(j // self.n_r) * self.n_r * self.depth + p * self.n_r + j % self.n_r]

    def micro_panel(self, index: int) -> np.ndarray:
        size = self.n_r * self.depth
        return self.buffer[index * size : (index + 1) * size]

    @property
    def num_micro_panels(self) -> int:
        return -(-self.cols // self.n_r)


@dataclass
class Counters:
    """
    Instrumentation filled in by the drivers.

    Flop counters follow the table-level accounting (an addition costs 2 flops per element). Transfer counters
    are in elements; ``*_passes`` count quadrant-sized passes over temporaries. ``alloc_seconds`` times the
    allocation of packing buffers and temporaries so callers can leave it out of a measured run.
    """

    pack_a_calls: int = 0
    pack_b_calls: int = 0
    microkernel_calls: int = 0
    mults: int = 0
    a_adds: int = 0
    b_adds: int = 0
    c_updates: int = 0
    a_pack_reads: int = 0
    b_pack_reads: int = 0
    c_kernel_transfers: int = 0
    a_plus: int = 0
    b_plus: int = 0
    c_plus: int = 0
    a_plus_passes: int = 0
    b_plus_passes: int = 0
    c_plus_passes: int = 0
    pack_seconds: float = 0.0
    kernel_seconds: float = 0.0
    alloc_seconds: float = 0.0

    def add(self, **increments):
        for name, value in increments.items():
            setattr(self, name, getattr(self, name) + value)

    @property
    def flops(self) -> int:
        return self.mults + self.a_adds + self.b_adds + self.c_updates


@njit(nogil=True, cache=True)
def _pack_a(buf, rs, cs, t_origin, t_rows, t_cols, t_coeff, row0, col0, m_c, k_c, m_r, out):
    n_terms = t_origin.shape[0]
    for ip in range((m_c + m_r - 1) // m_r):
        for p in range(k_c):
            col = col0 + p
            base = ip * m_r * k_c + p * m_r
            for r in range(m_r):
                i = ip * m_r + r
                v = 0.0
                if i < m_c:
                    row = row0 + i
                    for t in range(n_terms):
                        if row < t_rows[t] and col < t_cols[t]:
                            v += t_coeff[t] * buf[t_origin[t] + row * rs + col * cs]
                out[base + r] = v


@njit(nogil=True, cache=True)
def _pack_b(buf, rs, cs, t_origin, t_rows, t_cols, t_coeff, row0, col0, k_c, n_c, n_r, out):
    n_terms = t_origin.shape[0]
    for jp in range((n_c + n_r - 1) // n_r):
        for p in range(k_c):
            row = row0 + p
            base = jp * n_r * k_c + p * n_r
            for c in range(n_r):
                j = jp * n_r + c
                v = 0.0
                if j < n_c:
                    col = col0 + j
                    for t in range(n_terms):
                        if row < t_rows[t] and col < t_cols[t]:
                            v += t_coeff[t] * buf[t_origin[t] + row * rs + col * cs]
                out[base + c] = v


def pack_a_sum(
    operand: OperandSum, block_row: int, block_k: int, params: BlockingParams, out: Optional[np.ndarray] = None
) -> PackedPanelA:
    """
    Packs the m_C x k_C block of ``operand`` starting at (block_row, block_k) of its logical extent.

    The block is clipped to the logical extent; rows of the last micro-panel beyond it are zero.

    Parameters
    ----------
    operand : OperandSum
        The A operand, a weighted sum of quadrant views.
    block_row, block_k : int
        Offsets of the block inside the logical extent.
    params : BlockingParams
        Supplies m_C, k_C and m_R.
    out : np.ndarray, optional
        Reused buffer of at least m_C * k_C elements.

    Returns
    -------
    PackedPanelA
    """
    m_c = min(params.m_c, operand.rows - block_row)
    k_c = min(params.k_c, operand.cols - block_k)
    if out is None:
        out = np.empty(params.m_c * params.k_c)
    buf, rs, cs, origins, rows, cols, coeffs = operand.kernel_args()
    _pack_a(buf, rs, cs, origins, rows, cols, coeffs, block_row, block_k, m_c, k_c, params.m_r, out)
    return PackedPanelA(buffer=out, rows=m_c, depth=k_c, m_r=params.m_r)


def pack_b_sum(
    operand: OperandSum, block_k: int, block_col: int, params: BlockingParams, out: Optional[np.ndarray] = None
) -> PackedPanelB:
    """
    Packs the k_C x n_C block of ``operand`` starting at (block_k, block_col); see :func:`pack_a_sum`.
    """
    k_c = min(params.k_c, operand.rows - block_k)
    n_c = min(params.n_c, operand.cols - block_col)
    if out is None:
        out = np.empty(params.k_c * params.n_c)
    buf, rs, cs, origins, rows, cols, coeffs = operand.kernel_args()
    _pack_b(buf, rs, cs, origins, rows, cols, coeffs, block_k, block_col, k_c, n_c, params.n_r, out)
    return PackedPanelB(buffer=out, depth=k_c, cols=n_c, n_r=params.n_r)


@njit(parallel=True, cache=True)
def _pack_a_wave(buf, rs, cs, t_origin, t_rows, t_cols, t_coeff, m, first_block, col0, depth, m_c, m_r, work):
    for w in prange(work.shape[0]):
        ic = (first_block + w) * m_c
        if ic < m:
            _pack_a(buf, rs, cs, t_origin, t_rows, t_cols, t_coeff, ic, col0, min(m_c, m - ic), depth, m_r, work[w])


@njit(parallel=True, cache=True)
def _macro_wave(
    m, first_block, m_c, n_cols, depth, m_r, n_r, alpha, work, b_pack, c_buf, rs, cs, d_origin, d_rows, d_cols,
    d_gamma, col0, acc, calls,
):
    for w in prange(work.shape[0]):
        ic = (first_block + w) * m_c
        calls[w] = 0
        if ic < m:
            calls[w] = _macro_kernel(
                min(m_c, m - ic),
                n_cols,
                depth,
                depth,
                m_r,
                n_r,
                alpha,
                work[w],
                b_pack,
                c_buf,
                rs,
                cs,
                d_origin,
                d_rows,
                d_cols,
                d_gamma,
                ic,
                col0,
                acc[w],
            )


def _worker_count(threads: int) -> int:
    return max(1, min(threads, numba.config.NUMBA_NUM_THREADS))


def fused_gemm(
    alpha: float,
    a_sum: OperandSum,
    b_sum: OperandSum,
    dests: DestSpec,
    params: BlockingParams,
    threads: int = 1,
    counters: Optional[Counters] = None,
):
    """
    C_r += alpha * gamma_r * (sum A)(sum B) for every destination r, through the five blocked loops.

    Loop order, outermost first: jc over n in steps of n_C, pc over k in steps of k_C, ic over m in steps of m_C,
    then jr / ir inside the macro-kernel. The ic loop runs in waves of ``threads`` m_C blocks under numba's
    ``prange``: each slot of a wave packs its block of A into its own buffer, then runs the macro-kernel against
    the shared packed B. Slots own disjoint row blocks of C, so results do not depend on the worker count.
    """
    m, k = a_sum.rows, a_sum.cols
    n = b_sum.cols
    if b_sum.rows != k:
        raise ShapeError(f"Inner dimensions differ: A sum is {m}x{k}, B sum is {b_sum.rows}x{n}.")
    for view, _ in dests.dests:
        if view.rows > m or view.cols > n:
            raise ShapeError(f"A {view.shape} destination exceeds the {m}x{n} product.")
    if a_sum.is_empty or b_sum.is_empty or dests.is_empty:
        log.debug("Skipping an empty %dx%dx%d product.", m, n, k)
        return

    workers = _worker_count(threads)
    start = time.perf_counter()
    b_buffer = np.empty(params.k_c * params.n_c)
    work = np.empty((workers, params.m_c * params.k_c))
    acc = np.empty((workers, params.m_r, params.n_r))
    calls = np.zeros(workers, dtype=np.int64)
    if counters is not None:
        counters.add(alloc_seconds=time.perf_counter() - start)

    a_args = a_sum.kernel_args()
    c_buf, rs, cs, origins, rows, cols, gammas = dests.kernel_args()
    n_blocks = -(-m // params.m_c)
    previous = numba.get_num_threads()
    numba.set_num_threads(workers)
    try:
        for jc in range(0, n, params.n_c):
            for pc in range(0, k, params.k_c):
                start = time.perf_counter()
                packed_b = pack_b_sum(b_sum, pc, jc, params, out=b_buffer)
                if counters is not None:
                    counters.add(
                        pack_b_calls=1,
                        b_pack_reads=len(b_sum) * packed_b.depth * packed_b.cols,
                        pack_seconds=time.perf_counter() - start,
                    )
                for first_block in range(0, n_blocks, workers):
                    start = time.perf_counter()
                    _pack_a_wave(*a_args, m, first_block, pc, packed_b.depth, params.m_c, params.m_r, work)
                    packed = time.perf_counter()
                    _macro_wave(
                        m,
                        first_block,
                        params.m_c,
                        packed_b.cols,
                        packed_b.depth,
                        params.m_r,
                        params.n_r,
                        float(alpha),
                        work,
                        packed_b.buffer,
                        c_buf,
                        rs,
                        cs,
                        origins,
                        rows,
                        cols,
                        gammas,
                        jc,
                        acc,
                        calls,
                    )
                    if counters is not None:
                        wave_end = min(m, (first_block + workers) * params.m_c)
                        block_starts = range(first_block * params.m_c, wave_end, params.m_c)
                        wave_rows = sum(min(params.m_c, m - ic) for ic in block_starts)
                        counters.add(
                            pack_a_calls=len(block_starts),
                            a_pack_reads=len(a_sum) * wave_rows * packed_b.depth,
                            microkernel_calls=int(calls.sum()),
                            c_kernel_transfers=2 * wave_rows * packed_b.cols * len(dests),
                            pack_seconds=packed - start,
                            kernel_seconds=time.perf_counter() - packed,
                        )
    finally:
        numba.set_num_threads(previous)


def gemm_conventional(
    shape: ProblemShape,
    A: MatrixView,
    B: MatrixView,
    C: MatrixView,
    params: Optional[BlockingParams] = None,
    threads: int = 1,
    counters: Optional[Counters] = None,
):
    """C := alpha * A * B + C with the blocked five-loop algorithm (single-term packing, single destination)."""
    shape.check(A, B, C)
    params = params or BlockingParams()
    log.debug("gemm %dx%dx%d on %d thread(s) with %s", shape.m, shape.n, shape.k, threads, params)
    if counters is not None:
        counters.add(mults=2 * shape.m * shape.n * shape.k)
    fused_gemm(
        float(shape.alpha), OperandSum.single(A), OperandSum.single(B), DestSpec.single(C), params, threads, counters
    )
