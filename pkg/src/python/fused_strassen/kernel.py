"""
The register-tiled micro-kernel and the macro-kernel looping over it.

One m_R x n_R product tile is accumulated in a local buffer and then added into every destination quadrant of
C, each scaled by alpha * gamma. Destinations are clipped views; tiles that only partially overlap a
destination are written through clipped loops so no element outside a view is ever touched.
"""
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np
from numba import njit

from .matrix import MatrixView, ShapeError

if TYPE_CHECKING:
    from .blocking import BlockingParams, PackedPanelA, PackedPanelB


@dataclass(frozen=True)
class DestSpec:
    """Destination quadrants of C with their +/-1 coefficients, all addressed at one shared tile position."""

    dests: Tuple[Tuple[MatrixView, float], ...]
    tile_row: int = 0
    tile_col: int = 0

    def __post_init__(self):
        if not self.dests:
            raise ShapeError("A DestSpec needs at least one destination.")
        first = self.dests[0][0]
        for view, gamma in self.dests:
            if gamma not in (1.0, -1.0):
                raise ValueError(f"Destination coefficients must be +1 or -1, got {gamma}.")
            same_layout = view.row_stride == first.row_stride and view.col_stride == first.col_stride
            if view.buffer is not first.buffer or not same_layout:
                raise ShapeError("All destinations must be views of one buffer with one layout.")

    @classmethod
    def single(cls, view: MatrixView, gamma: float = 1.0) -> "DestSpec":
        return cls(dests=((view, gamma),))

    def __len__(self) -> int:
        return len(self.dests)

    @property
    def is_empty(self) -> bool:
        return all(view.is_empty for view, _ in self.dests)

    def translate(self, tile_row: int, tile_col: int) -> "DestSpec":
        return DestSpec(dests=self.dests, tile_row=tile_row, tile_col=tile_col)

    def kernel_args(self):
        """(buffer, row_stride, col_stride, origins, rows, cols, coefficients) for the compiled loops."""
        first = self.dests[0][0]
        origins = np.array([view.origin for view, _ in self.dests], dtype=np.int64)
        rows = np.array([view.rows for view, _ in self.dests], dtype=np.int64)
        cols = np.array([view.cols for view, _ in self.dests], dtype=np.int64)
        gammas = np.array([gamma for _, gamma in self.dests], dtype=np.float64)
        return first.buffer, first.row_stride, first.col_stride, origins, rows, cols, gammas


@njit(nogil=True, cache=True)
def _microkernel(
    k, m_r, n_r, alpha, a_pack, a_off, b_pack, b_off, c_buf, rs, cs, d_origin, d_rows, d_cols, d_gamma, row, col, acc
):
    for i in range(m_r):
        for j in range(n_r):
            acc[i, j] = 0.0
    if k == 0:
        return
    for p in range(k):
        a0 = a_off + p * m_r
        b0 = b_off + p * n_r
        for i in range(m_r):
            a_ip = a_pack[a0 + i]
            for j in range(n_r):
                acc[i, j] += a_ip * b_pack[b0 + j]

    for d in range(d_origin.shape[0]):
        rows = min(m_r, d_rows[d] - row)
        cols = min(n_r, d_cols[d] - col)
        if rows <= 0 or cols <= 0:
            continue
        scale = alpha * d_gamma[d]
        base = d_origin[d] + row * rs + col * cs
        if rows == m_r and cols == n_r:
            for i in range(m_r):
                for j in range(n_r):
                    c_buf[base + i * rs + j * cs] += scale * acc[i, j]
        else:
            # fringe tile: only the in-range corner of the staged tile is written
            for i in range(rows):
                for j in range(cols):
                    c_buf[base + i * rs + j * cs] += scale * acc[i, j]


@njit(nogil=True, cache=True)
def _macro_kernel(
    m_c, n_c, k, depth, m_r, n_r, alpha, a_pack, b_pack, c_buf, rs, cs, d_origin, d_rows, d_cols, d_gamma, row0, col0,
    acc,
):
    calls = 0
    for jr in range(0, n_c, n_r):
        col = col0 + jr
        for ir in range(0, m_c, m_r):
            row = row0 + ir
            live = False
            for d in range(d_origin.shape[0]):
                if row < d_rows[d] and col < d_cols[d]:
                    live = True
                    break
            if not live:
                continue
            _microkernel(
                k,
                m_r,
                n_r,
                alpha,
                a_pack,
                ir * depth,
                b_pack,
                jr * depth,
                c_buf,
                rs,
                cs,
                d_origin,
                d_rows,
                d_cols,
                d_gamma,
                row,
                col,
                acc,
            )
            calls += 1
    return calls


def microkernel(
    a_panel: np.ndarray,
    b_panel: np.ndarray,
    k: int,
    alpha: float,
    dests: DestSpec,
    m_r: int,
    n_r: int,
    acc: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Multiplies one packed m_R x k micro-panel of A by one packed k x n_R micro-panel of B and adds
    alpha * gamma times the product tile into every destination at ``(dests.tile_row, dests.tile_col)``.

    Parameters
    ----------
    a_panel : np.ndarray
        Flat panel, column p holding m_R contiguous elements at offset p * m_R.
    b_panel : np.ndarray
        Flat panel, row p holding n_R contiguous elements at offset p * n_R.
    k : int
        Depth of the update, at most the packed depth.
    alpha : float
        Scalar applied to the product tile.
    dests : DestSpec
        Clipped destination views and their coefficients.
    m_r, n_r : int
        Register tile sizes.
    acc : np.ndarray, optional
        m_R x n_R scratch tile; allocated when omitted.

    Returns
    -------
    np.ndarray
        The product tile T that was added into the destinations.
    """
    assert a_panel.shape[0] >= m_r * k and b_panel.shape[0] >= n_r * k, "Panels are shallower than k."
    if acc is None:
        acc = np.empty((m_r, n_r))
    c_buf, rs, cs, origins, rows, cols, gammas = dests.kernel_args()
    _microkernel(
        k,
        m_r,
        n_r,
        float(alpha),
        a_panel,
        0,
        b_panel,
        0,
        c_buf,
        rs,
        cs,
        origins,
        rows,
        cols,
        gammas,
        dests.tile_row,
        dests.tile_col,
        acc,
    )
    return acc


def macro_kernel(
    packed_a: "PackedPanelA",
    packed_b: "PackedPanelB",
    k: int,
    alpha: float,
    c_dests: DestSpec,
    row0: int,
    col0: int,
    params: "BlockingParams",
    acc: Optional[np.ndarray] = None,
) -> int:
    """
    Runs the jr / ir loops over one packed block, invoking the micro-kernel for every m_R x n_R tile that
    overlaps at least one destination. ``row0`` / ``col0`` place the block inside the logical quadrant.

    Returns the number of micro-kernel invocations.
    """
    assert k <= packed_a.depth and k <= packed_b.depth, "k exceeds the depth of the packed panels."
    assert packed_a.depth == packed_b.depth, "Packed A and B panels disagree on depth."
    if acc is None:
        acc = np.empty((params.m_r, params.n_r))
    c_buf, rs, cs, origins, rows, cols, gammas = c_dests.kernel_args()
    return _macro_kernel(
        packed_a.rows,
        packed_b.cols,
        k,
        packed_a.depth,
        params.m_r,
        params.n_r,
        float(alpha),
        packed_a.buffer,
        packed_b.buffer,
        c_buf,
        rs,
        cs,
        origins,
        rows,
        cols,
        gammas,
        row0,
        col0,
        acc,
    )

