from .blocking import (
    BlockingParams,
    Counters,
    OperandSum,
    PackedPanelA,
    PackedPanelB,
    fused_gemm,
    gemm_conventional,
    pack_a_sum,
    pack_b_sum,
)
from .kernel import DestSpec, macro_kernel, microkernel
from .matrix import (
    MatrixView,
    ProblemShape,
    QuadrantGrid,
    ShapeError,
    partition_quadrants,
    quadrant_extent,
    reference_gemm,
    rel_frobenius_error,
)
from .model import (
    ALL_VARIANTS,
    COEFFICIENTS,
    CoefficientSet,
    TABULATED_OPS,
    ModelParams,
    Prediction,
    TimeBreakdown,
    VariantSpec,
    arithmetic_time,
    crossover_k,
    effective_gflops,
    executed_coefficients,
    flop_counts,
    memory_time,
    memory_units,
    predict,
    select_variant,
)
from .strassen import (
    OperandTable,
    TableEntry,
    TableError,
    TableOps,
    Variant,
    bilinear_coefficients,
    classical_coefficients,
    compose_tables,
    count_table_ops,
    identity_table,
    multiply,
    one_level_table,
    strassen_ab,
    strassen_abc,
    strassen_naive,
    strassen_table,
    verify_table,
)
