"""Strided matrix views, quadrant partitioning and the brute-force reference GEMM."""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from numba import njit

_ITEMSIZE = np.dtype(np.float64).itemsize


class ShapeError(ValueError):
    """Raised when operand dimensions are inconsistent."""


@dataclass(frozen=True, eq=False)
class MatrixView:
    """
    A rows x cols window over a flat float64 buffer.

    Element (i, j) lives at ``buffer[origin + i * row_stride + j * col_stride]``. Views never own memory;
    several views (quadrants, transposes) may share one buffer.
    """

    buffer: np.ndarray = field(repr=False)
    rows: int
    cols: int
    row_stride: int
    col_stride: int
    origin: int = 0

    def __post_init__(self):
        if self.buffer.ndim != 1 or self.buffer.dtype != np.float64 or not self.buffer.flags.c_contiguous:
            raise ShapeError("A MatrixView buffer must be a contiguous 1-D float64 array.")
        if self.rows < 0 or self.cols < 0:
            raise ShapeError(f"Negative view extent {self.rows}x{self.cols}.")
        if self.rows and self.cols:
            if self.row_stride < 0 or self.col_stride < 0 or self.origin < 0:
                raise ShapeError("Negative strides and offsets are not supported.")
            last = self.origin + (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride
            if last >= self.buffer.shape[0]:
                raise ShapeError(f"View addresses offset {last} past the end of a {self.buffer.shape[0]} buffer.")

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "MatrixView":
        """Allocates a zero-filled row-major matrix."""
        return cls(np.zeros(rows * cols), rows, cols, cols, 1)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "MatrixView":
        """
        Wraps a 2-D float64 numpy array without copying.

        Works for row-major and column-major arrays and for slices or transposes of either, as long as the
        strides are non-negative multiples of the element size.
        """
        if not isinstance(array, np.ndarray) or array.ndim != 2 or array.dtype != np.float64:
            raise ShapeError("Expected a 2-D float64 numpy array.")
        rows, cols = array.shape
        if array.size == 0:
            return cls(np.zeros(0), rows, cols, max(cols, 1), 1)
        row_bytes, col_bytes = array.strides
        if row_bytes % _ITEMSIZE or col_bytes % _ITEMSIZE or row_bytes < 0 or col_bytes < 0:
            raise ShapeError(f"Unsupported strides {array.strides} for a MatrixView.")

        base = array
        while isinstance(base.base, np.ndarray):
            base = base.base
        if base.dtype != np.float64 or not (base.flags.c_contiguous or base.flags.f_contiguous):
            base = array
        flat = base.ravel(order="K")
        if not np.shares_memory(flat, array):
            raise ShapeError("Could not recover the buffer underlying the array; pass a contiguous copy instead.")
        origin = (array.ctypes.data - flat.ctypes.data) // _ITEMSIZE
        return cls(flat, rows, cols, row_bytes // _ITEMSIZE, col_bytes // _ITEMSIZE, origin)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    @property
    def is_empty(self) -> bool:
        return self.rows == 0 or self.cols == 0

    def array(self) -> np.ndarray:
        """Returns a writable numpy view aliasing the same elements."""
        if self.is_empty:
            return np.zeros((self.rows, self.cols))
        return np.lib.stride_tricks.as_strided(
            self.buffer[self.origin :],
            shape=(self.rows, self.cols),
            strides=(self.row_stride * _ITEMSIZE, self.col_stride * _ITEMSIZE),
        )

    def transpose(self) -> "MatrixView":
        return MatrixView(self.buffer, self.cols, self.rows, self.col_stride, self.row_stride, self.origin)

    def subview(self, row: int, col: int, rows: int, cols: int) -> "MatrixView":
        """Returns the rows x cols window starting at (row, col), clipped to this view's extent."""
        rows = max(0, min(rows, self.rows - row))
        cols = max(0, min(cols, self.cols - col))
        origin = self.origin + row * self.row_stride + col * self.col_stride if rows and cols else self.origin
        return MatrixView(self.buffer, rows, cols, self.row_stride, self.col_stride, origin)

    def kernel_args(self):
        """The (buffer, origin, row_stride, col_stride) tuple compiled loops address this view with."""
        return self.buffer, self.origin, self.row_stride, self.col_stride


@dataclass(frozen=True)
class ProblemShape:
    """C (m x n) := alpha * A (m x k) * B (k x n) + C."""

    m: int
    n: int
    k: int
    alpha: float = 1.0

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.k < 1:
            raise ShapeError(f"Problem dimensions must be positive, got m={self.m}, n={self.n}, k={self.k}.")

    @classmethod
    def from_views(cls, A: MatrixView, B: MatrixView, C: MatrixView, alpha: float = 1.0) -> "ProblemShape":
        shape = cls(m=C.rows, n=C.cols, k=A.cols, alpha=alpha)
        shape.check(A, B, C)
        return shape

    def check(self, A: MatrixView, B: MatrixView, C: MatrixView):
        if A.shape != (self.m, self.k) or B.shape != (self.k, self.n) or C.shape != (self.m, self.n):
            raise ShapeError(
                f"Operands A {A.shape}, B {B.shape}, C {C.shape} do not match m={self.m}, n={self.n}, k={self.k}."
            )


@dataclass(frozen=True)
class QuadrantGrid:
    """A 2^level x 2^level grid of clipped views; quadrant (I, J) is ``views[2**level * I + J]``."""

    level: int
    logical_q_rows: int
    logical_q_cols: int
    views: Tuple[MatrixView, ...]

    @property
    def side(self) -> int:
        return 2**self.level

    def __getitem__(self, index: int) -> MatrixView:
        return self.views[index]

    def __len__(self) -> int:
        return len(self.views)

    def view(self, row: int, col: int) -> MatrixView:
        return self.views[self.side * row + col]


def quadrant_extent(dim: int, level: int) -> int:
    """Logical quadrant size ceil(dim / 2^level), shared by the drivers and the performance model."""
    return -(-dim // 2**level)


def partition_quadrants(M: MatrixView, level: int) -> QuadrantGrid:
    """
    Splits a matrix into a 2^level x 2^level grid of equally sized logical quadrants.

    Quadrants along the bottom and right fringes are clipped to the matrix extent and may be empty.
    """
    if level < 0:
        raise ValueError(f"Partition level must be non-negative, got {level}.")
    side = 2**level
    q_rows = quadrant_extent(M.rows, level)
    q_cols = quadrant_extent(M.cols, level)
    views = []
    for I in range(side):
        for J in range(side):
            views.append(M.subview(I * q_rows, J * q_cols, q_rows, q_cols))
    return QuadrantGrid(level=level, logical_q_rows=q_rows, logical_q_cols=q_cols, views=tuple(views))


@njit(nogil=True, cache=True)
def _reference_gemm(m, n, k, alpha, a_buf, a_off, a_rs, a_cs, b_buf, b_off, b_rs, b_cs, c_buf, c_off, c_rs, c_cs):
    for i in range(m):
        for j in range(n):
            s = 0.0
            for p in range(k):
                s += a_buf[a_off + i * a_rs + p * a_cs] * b_buf[b_off + p * b_rs + j * b_cs]
            c = c_off + i * c_rs + j * c_cs
            c_buf[c] += alpha * s


def reference_gemm(shape: ProblemShape, A: MatrixView, B: MatrixView, C: MatrixView):
    """
    C := alpha * A * B + C by the textbook triple loop.

    The inner product for each element is accumulated over p in ascending order before scaling, which fixes
    the rounding that every correctness test compares against.
    """
    shape.check(A, B, C)
    _reference_gemm(shape.m, shape.n, shape.k, float(shape.alpha), *A.kernel_args(), *B.kernel_args(), *C.kernel_args())


def rel_frobenius_error(C_test: MatrixView, C_ref: MatrixView) -> float:
    """||C_test - C_ref||_F / max(||C_ref||_F, 1)."""
    if C_test.shape != C_ref.shape:
        raise ShapeError(f"Cannot compare a {C_test.shape} matrix against a {C_ref.shape} reference.")
    reference = C_ref.array()
    difference = np.linalg.norm(C_test.array() - reference)
    return float(difference / max(np.linalg.norm(reference), 1.0))
