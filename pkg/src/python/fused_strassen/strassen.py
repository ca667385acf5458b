"""
Operand tables for L-level Strassen and the three ways of executing them.

A table lists, per multiplication, which quadrants of A and B are summed (with +/-1 coefficients) and which
quadrants of C receive the product. Quadrant indices are row-major in the 2^L x 2^L grid. The two-level table
is never written out by hand: it is composed from the one-level table and checked against the block triple
loop over formal indeterminates.
"""
import logging
import time
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np

from .blocking import BlockingParams, Counters, OperandSum, fused_gemm, gemm_conventional
from .kernel import DestSpec
from .matrix import MatrixView, ProblemShape, QuadrantGrid, partition_quadrants

log = logging.getLogger(__name__)

Terms = Tuple[Tuple[int, int], ...]


class TableError(ValueError):
    """Raised for malformed operand tables."""


class Variant(str, Enum):
    DGEMM = "dgemm"
    ABC = "abc"
    AB = "ab"
    NAIVE = "naive"


@dataclass(frozen=True)
class TableEntry:
    """One multiplication M = (sum delta_s A_s)(sum eps_t B_t) and its updates C_r += gamma_r M."""

    a_terms: Terms
    b_terms: Terms
    c_terms: Terms

    def __post_init__(self):
        for name in ("a_terms", "b_terms", "c_terms"):
            terms = getattr(self, name)
            if not terms:
                raise TableError(f"{name} of a table entry must not be empty.")
            indices = [index for index, _ in terms]
            if len(set(indices)) != len(indices):
                raise TableError(f"{name} repeats a quadrant index: {terms}.")
            if any(coeff not in (1, -1) for _, coeff in terms):
                raise TableError(f"{name} has a coefficient outside +/-1: {terms}.")


@dataclass(frozen=True)
class OperandTable:
    level: int
    entries: Tuple[TableEntry, ...]

    def __post_init__(self):
        quadrants = 4**self.level
        for entry in self.entries:
            for terms in (entry.a_terms, entry.b_terms, entry.c_terms):
                if any(not 0 <= index < quadrants for index, _ in terms):
                    raise TableError(f"Quadrant index out of range for level {self.level}: {terms}.")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


class TableOps(NamedTuple):
    mults: int
    a_adds: int
    b_adds: int
    c_updates: int


def identity_table() -> OperandTable:
    """The level-0 table: C += A B with no partitioning; the neutral element of :func:`compose_tables`."""
    return OperandTable(level=0, entries=(TableEntry(((0, 1),), ((0, 1),), ((0, 1),)),))


def one_level_table() -> OperandTable:
    """The seven multiplications of one-level Strassen over the 2 x 2 grid (index = 2 * row + col)."""
    entries = (
        TableEntry(a_terms=((0, 1), (3, 1)), b_terms=((0, 1), (3, 1)), c_terms=((0, 1), (3, 1))),
        TableEntry(a_terms=((2, 1), (3, 1)), b_terms=((0, 1),), c_terms=((2, 1), (3, -1))),
        TableEntry(a_terms=((0, 1),), b_terms=((1, 1), (3, -1)), c_terms=((1, 1), (3, 1))),
        TableEntry(a_terms=((3, 1),), b_terms=((2, 1), (0, -1)), c_terms=((0, 1), (2, 1))),
        TableEntry(a_terms=((0, 1), (1, 1)), b_terms=((3, 1),), c_terms=((1, 1), (0, -1))),
        TableEntry(a_terms=((2, 1), (0, -1)), b_terms=((0, 1), (1, 1)), c_terms=((3, 1),)),
        TableEntry(a_terms=((1, 1), (3, -1)), b_terms=((2, 1), (3, 1)), c_terms=((0, 1),)),
    )
    return OperandTable(level=1, entries=entries)


def _compose_terms(outer: Terms, inner: Terms, outer_level: int, inner_level: int) -> Terms:
    outer_side = 2**outer_level
    inner_side = 2**inner_level
    side = outer_side * inner_side
    merged = {}
    for outer_index, outer_coeff in outer:
        I, J = divmod(outer_index, outer_side)
        for inner_index, inner_coeff in inner:
            i, j = divmod(inner_index, inner_side)
            index = (inner_side * I + i) * side + inner_side * J + j
            merged[index] = merged.get(index, 0) + outer_coeff * inner_coeff
    if any(abs(coeff) > 1 for coeff in merged.values()):
        raise TableError(f"Composing {outer} with {inner} produced a coefficient outside {{-1, 0, +1}}.")
    return tuple((index, coeff) for index, coeff in merged.items() if coeff != 0)


def compose_tables(outer: OperandTable, inner: OperandTable) -> OperandTable:
    """
    Nests ``inner`` inside every quadrant of ``outer``.

    Each outer entry combined with each inner entry yields one entry of the composed table whose terms are the
    pairwise products of the two entries' terms, addressed in the 2^(L_out + L_in) grid where outer quadrant
    (I, J) and inner quadrant (i, j) land at row 2^L_in * I + i, column 2^L_in * J + j. Terms are emitted in
    outer-major order with duplicates merged and zero coefficients dropped.
    """
    entries = []
    for E in outer.entries:
        for e in inner.entries:
            entries.append(
                TableEntry(
                    a_terms=_compose_terms(E.a_terms, e.a_terms, outer.level, inner.level),
                    b_terms=_compose_terms(E.b_terms, e.b_terms, outer.level, inner.level),
                    c_terms=_compose_terms(E.c_terms, e.c_terms, outer.level, inner.level),
                )
            )
    return OperandTable(level=outer.level + inner.level, entries=tuple(entries))


@lru_cache(maxsize=None)
def strassen_table(level: int) -> OperandTable:
    """The L-level table: identity at level 0, one-level Strassen composed with the (L-1)-level table above."""
    if level < 0:
        raise ValueError(f"Strassen level must be non-negative, got {level}.")
    if level == 0:
        return identity_table()
    if level == 1:
        return one_level_table()
    return compose_tables(one_level_table(), strassen_table(level - 1))


def count_table_ops(table: OperandTable) -> TableOps:
    """(multiplications, extra A additions, extra B additions, C updates) of a table."""
    return TableOps(
        mults=len(table.entries),
        a_adds=sum(len(entry.a_terms) - 1 for entry in table.entries),
        b_adds=sum(len(entry.b_terms) - 1 for entry in table.entries),
        c_updates=sum(len(entry.c_terms) for entry in table.entries),
    )


def bilinear_coefficients(table: OperandTable) -> np.ndarray:
    """
    Evaluates the table over formal block indeterminates.

    Entry [c, a, b] is the integer coefficient with which the block product A_a B_b contributes to C_c.
    """
    quadrants = 4**table.level
    coefficients = np.zeros((quadrants, quadrants, quadrants), dtype=np.int64)
    for entry in table.entries:
        for c_index, gamma in entry.c_terms:
            for a_index, delta in entry.a_terms:
                for b_index, eps in entry.b_terms:
                    coefficients[c_index, a_index, b_index] += gamma * delta * eps
    return coefficients


def classical_coefficients(level: int) -> np.ndarray:
    """The block triple loop C_IJ += sum_P A_IP B_PJ as a coefficient tensor over the 2^L x 2^L grid."""
    side = 2**level
    quadrants = side * side
    coefficients = np.zeros((quadrants, quadrants, quadrants), dtype=np.int64)
    for I in range(side):
        for J in range(side):
            for P in range(side):
                coefficients[side * I + J, side * I + P, side * P + J] = 1
    return coefficients


def verify_table(table: OperandTable):
    """Raises TableError unless the table computes exactly the block product C = A B."""
    if not np.array_equal(bilinear_coefficients(table), classical_coefficients(table.level)):
        raise TableError(f"The level-{table.level} table does not reproduce the block matrix product.")


def _check_level(level: int):
    if level not in (1, 2):
        raise ValueError(f"Strassen execution supports levels 1 and 2, got {level}.")


def _partition(shape: ProblemShape, A: MatrixView, B: MatrixView, C: MatrixView, level: int):
    shape.check(A, B, C)
    _check_level(level)
    return partition_quadrants(A, level), partition_quadrants(B, level), partition_quadrants(C, level)


def _operand_sum(grid: QuadrantGrid, terms: Terms, rows: int, cols: int) -> OperandSum:
    return OperandSum(terms=tuple((grid[index], float(coeff)) for index, coeff in terms), rows=rows, cols=cols)


def _dest_spec(grid: QuadrantGrid, terms: Terms) -> DestSpec:
    return DestSpec(dests=tuple((grid[index], float(gamma)) for index, gamma in terms))


def _count_entry(counters: Optional[Counters], entry: TableEntry, m: int, n: int, k: int):
    if counters is None:
        return
    counters.add(
        mults=2 * m * n * k,
        a_adds=2 * (len(entry.a_terms) - 1) * m * k,
        b_adds=2 * (len(entry.b_terms) - 1) * k * n,
        c_updates=2 * len(entry.c_terms) * m * n,
    )


def _temporaries(counters: Optional[Counters], *shapes: Tuple[int, int]) -> Tuple[MatrixView, ...]:
    start = time.perf_counter()
    views = tuple(MatrixView.zeros(rows, cols) for rows, cols in shapes)
    if counters is not None:
        counters.add(alloc_seconds=time.perf_counter() - start)
    return views


def _is_empty(a_sum: OperandSum, b_sum: OperandSum, dests: DestSpec) -> bool:
    return a_sum.is_empty or b_sum.is_empty or dests.is_empty


def strassen_abc(
    shape: ProblemShape,
    A: MatrixView,
    B: MatrixView,
    C: MatrixView,
    level: int = 1,
    params: Optional[BlockingParams] = None,
    threads: int = 1,
    counters: Optional[Counters] = None,
):
    """
    C := alpha * A * B + C with operand sums formed during packing and every C update done by the micro-kernel.

    No temporaries are allocated beyond the packing buffers of the blocked driver.
    """
    grid_a, grid_b, grid_c = _partition(shape, A, B, C, level)
    params = params or BlockingParams()
    m, k, n = grid_a.logical_q_rows, grid_a.logical_q_cols, grid_b.logical_q_cols
    for index, entry in enumerate(strassen_table(level).entries):
        a_sum = _operand_sum(grid_a, entry.a_terms, m, k)
        b_sum = _operand_sum(grid_b, entry.b_terms, k, n)
        dests = _dest_spec(grid_c, entry.c_terms)
        _count_entry(counters, entry, m, n, k)
        if _is_empty(a_sum, b_sum, dests):
            log.debug("ABC entry %d touches only empty quadrants; skipped.", index)
            continue
        fused_gemm(float(shape.alpha), a_sum, b_sum, dests, params, threads, counters)


def _stream_product(
    M: MatrixView, grid_c: QuadrantGrid, c_terms: Terms, alpha: float, counters: Optional[Counters]
):
    product = M.array()
    for index, gamma in c_terms:
        view = grid_c[index]
        if not view.is_empty:
            destination = view.array()
            destination += (alpha * gamma) * product[: view.rows, : view.cols]
        if counters is not None:
            # read M, read C_r, write C_r
            counters.add(c_plus_passes=3, c_plus=3 * M.rows * M.cols)


def _materialize_sum(target: MatrixView, grid: QuadrantGrid, terms: Terms, counters: Optional[Counters], name: str):
    """
    Forms sum_t coeff_t * X_t into a zero-padded temporary: one copy for a single term, otherwise successive
    two-operand additions in listed order.
    """
    out = target.array()
    out[...] = 0.0
    (first_index, first_coeff), rest = terms[0], terms[1:]
    first = grid[first_index]
    out[: first.rows, : first.cols] = first_coeff * first.array()
    for index, coeff in rest:
        view = grid[index]
        out[: view.rows, : view.cols] += coeff * view.array()
    if counters is not None:
        passes = 2 if not rest else 3 * len(rest)
        counters.add(**{f"{name}_plus_passes": passes, f"{name}_plus": passes * target.rows * target.cols})


def strassen_ab(
    shape: ProblemShape,
    A: MatrixView,
    B: MatrixView,
    C: MatrixView,
    level: int = 1,
    params: Optional[BlockingParams] = None,
    threads: int = 1,
    counters: Optional[Counters] = None,
):
    """
    C := alpha * A * B + C with operand sums formed during packing, each product M computed into one reused
    quadrant-sized temporary and then streamed into its C quadrants.
    """
    grid_a, grid_b, grid_c = _partition(shape, A, B, C, level)
    params = params or BlockingParams()
    m, k, n = grid_a.logical_q_rows, grid_a.logical_q_cols, grid_b.logical_q_cols
    (M,) = _temporaries(counters, (m, n))
    for index, entry in enumerate(strassen_table(level).entries):
        a_sum = _operand_sum(grid_a, entry.a_terms, m, k)
        b_sum = _operand_sum(grid_b, entry.b_terms, k, n)
        _count_entry(counters, entry, m, n, k)
        if _is_empty(a_sum, b_sum, _dest_spec(grid_c, entry.c_terms)):
            log.debug("AB entry %d touches only empty quadrants; skipped.", index)
            continue
        M.buffer[:] = 0.0
        fused_gemm(1.0, a_sum, b_sum, DestSpec.single(M), params, threads, counters)
        _stream_product(M, grid_c, entry.c_terms, float(shape.alpha), counters)


def strassen_naive(
    shape: ProblemShape,
    A: MatrixView,
    B: MatrixView,
    C: MatrixView,
    level: int = 1,
    params: Optional[BlockingParams] = None,
    threads: int = 1,
    counters: Optional[Counters] = None,
):
    """
    C := alpha * A * B + C with every operand materialized: the A and B sums of each entry are formed in
    quadrant-sized temporaries, multiplied by the conventional blocked GEMM into M, and M is streamed into C.
    """
    grid_a, grid_b, grid_c = _partition(shape, A, B, C, level)
    params = params or BlockingParams()
    m, k, n = grid_a.logical_q_rows, grid_a.logical_q_cols, grid_b.logical_q_cols
    T_A, T_B, M = _temporaries(counters, (m, k), (k, n), (m, n))
    for index, entry in enumerate(strassen_table(level).entries):
        _count_entry(counters, entry, m, n, k)
        a_sum = _operand_sum(grid_a, entry.a_terms, m, k)
        b_sum = _operand_sum(grid_b, entry.b_terms, k, n)
        if _is_empty(a_sum, b_sum, _dest_spec(grid_c, entry.c_terms)):
            log.debug("Naive entry %d touches only empty quadrants; skipped.", index)
            continue
        _materialize_sum(T_A, grid_a, entry.a_terms, counters, "a")
        _materialize_sum(T_B, grid_b, entry.b_terms, counters, "b")
        M.buffer[:] = 0.0
        # flops for this product were counted with the entry
        fused_gemm(1.0, OperandSum.single(T_A), OperandSum.single(T_B), DestSpec.single(M), params, threads, counters)
        _stream_product(M, grid_c, entry.c_terms, float(shape.alpha), counters)


_DRIVERS = {Variant.ABC: strassen_abc, Variant.AB: strassen_ab, Variant.NAIVE: strassen_naive}


def multiply(
    A: Union[np.ndarray, MatrixView],
    B: Union[np.ndarray, MatrixView],
    C: Union[np.ndarray, MatrixView],
    alpha: float = 1.0,
    variant: Union[Variant, str] = Variant.ABC,
    level: int = 1,
    params: Optional[BlockingParams] = None,
    threads: int = 1,
    counters: Optional[Counters] = None,
):
    """
    C := alpha * A * B + C, updating C in place.

    Parameters
    ----------
    A, B, C : np.ndarray or MatrixView
        float64 operands; numpy arrays may be transposed or sliced views.
    alpha : float
        Scalar on the product. To compute beta * C + alpha * A * B scale C beforehand.
    variant : Variant or str
        'dgemm', 'abc', 'ab' or 'naive'.
    level : int
        Strassen levels (1 or 2); level 0 runs the conventional blocked GEMM.
    params : BlockingParams, optional
        Blocking parameters; the defaults when omitted.
    threads : int
        Workers sharing the third loop around the micro-kernel.
    counters : Counters, optional
        Instrumentation to fill in.
    """
    views = [operand if isinstance(operand, MatrixView) else MatrixView.from_array(operand) for operand in (A, B, C)]
    shape = ProblemShape.from_views(*views, alpha=alpha)
    variant = Variant(variant)
    if variant is Variant.DGEMM or level == 0:
        gemm_conventional(shape, *views, params=params, threads=threads, counters=counters)
        return
    _DRIVERS[variant](shape, *views, level=level, params=params, threads=threads, counters=counters)

