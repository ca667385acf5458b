"""
Analytical performance model: T = T_a + T_m.

T_a counts floating point work (multiplications plus the extra additions of A, B and C quadrants, each
addition costing 2 flops per element). T_m counts elements moved from slow memory: packing reads of A and B,
reads and writes of C inside the micro-kernel, and passes over temporaries for the AB and Naive variants.
Each memory term is a unit count at quadrant scale times a per-variant coefficient.
"""
import logging
from dataclasses import dataclass, fields, replace
from typing import Dict, Iterable, NamedTuple, Optional, Sequence

from .blocking import BlockingParams
from .matrix import quadrant_extent
from .strassen import TableOps, Variant, strassen_table

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    """
    Hardware parameters of the model.

    Attributes
    ----------
    tau_a : float
        Seconds per flop on one core (reciprocal of the per-core peak).
    tau_b : float
        Seconds per 8-byte element moved from main memory.
    prefetch_efficiency : float
        The lambda in [0.5, 1] applied to C traffic inside the micro-kernel.
    channel_factor : float
        Multiplier on tau_b; the number of memory channels for single-core runs, 1 otherwise.
    cores : int
        Workers the prediction assumes; tau_a is divided by it.
    name : str
        Optional label, e.g. the preset the parameters came from.
    """

    tau_a: float
    tau_b: float
    prefetch_efficiency: float = 0.7
    channel_factor: float = 1.0
    cores: int = 1
    name: str = ""

    def __post_init__(self):
        if self.tau_a <= 0 or self.tau_b <= 0:
            raise ValueError(f"tau_a and tau_b must be positive, got {self.tau_a} and {self.tau_b}.")
        if not 0.5 <= self.prefetch_efficiency <= 1.0:
            raise ValueError(f"The prefetch efficiency must lie in [0.5, 1], got {self.prefetch_efficiency}.")
        if self.channel_factor <= 0 or self.cores < 1:
            raise ValueError("channel_factor must be positive and cores at least 1.")

    @classmethod
    def from_hardware(
        cls, peak_gflops: float, bandwidth_gbs: float, prefetch_efficiency: float = 0.7, **kwargs
    ) -> "ModelParams":
        """Derives tau_a = 1 / peak and tau_b = 8 bytes / bandwidth from per-core peak GFLOPS and GB/s."""
        return cls(
            tau_a=1.0 / (peak_gflops * 1e9),
            tau_b=8.0 / bandwidth_gbs * 1e-9,
            prefetch_efficiency=prefetch_efficiency,
            **kwargs,
        )

    @property
    def effective_tau_a(self) -> float:
        return self.tau_a / self.cores

    @property
    def effective_tau_b(self) -> float:
        return self.tau_b * self.channel_factor

    @property
    def peak_gflops(self) -> float:
        return 1e-9 / self.effective_tau_a

    def for_threads(self, threads: int) -> "ModelParams":
        """The same hardware predicted for ``threads`` workers; tau_b is left to the caller."""
        return replace(self, cores=threads)


@dataclass(frozen=True)
class VariantSpec:
    """A member of the implementation family: level 0 is the conventional GEMM, levels 1 and 2 are Strassen."""

    level: int
    variant: Variant = Variant.ABC

    def __post_init__(self):
        if self.level not in (0, 1, 2):
            raise ValueError(f"Variant level must be 0, 1 or 2, got {self.level}.")
        object.__setattr__(self, "variant", Variant.DGEMM if self.level == 0 else Variant(self.variant))
        if self.level and self.variant is Variant.DGEMM:
            raise ValueError("The dgemm variant has no Strassen levels.")

    @classmethod
    def from_name(cls, name: str) -> "VariantSpec":
        """Parses 'dgemm', 'abc1', 'ab2', 'naive1', ..."""
        name = name.strip().lower()
        if name == Variant.DGEMM.value:
            return cls(level=0)
        stem, digit = name.rstrip("0123456789"), name[len(name.rstrip("0123456789")) :]
        if stem not in (Variant.ABC.value, Variant.AB.value, Variant.NAIVE.value) or digit not in ("1", "2"):
            raise ValueError(f"Unknown variant '{name}'; expected dgemm or abc/ab/naive followed by 1 or 2.")
        return cls(level=int(digit), variant=Variant(stem))

    @property
    def name(self) -> str:
        return Variant.DGEMM.value if self.level == 0 else f"{self.variant.value}{self.level}"

    def __str__(self) -> str:
        return self.name


ALL_VARIANTS = tuple(
    VariantSpec.from_name(name) for name in ("dgemm", "abc1", "ab1", "naive1", "abc2", "ab2", "naive2")
)


class CoefficientSet(NamedTuple):
    """Multipliers N_m of the six memory terms A x, B x, C x, A +, B +, C +."""

    a_x: int
    b_x: int
    c_x: int
    a_plus: int
    b_plus: int
    c_plus: int


COEFFICIENTS: Dict[VariantSpec, CoefficientSet] = {
    VariantSpec(0): CoefficientSet(1, 1, 1, 0, 0, 0),
    VariantSpec(1, Variant.ABC): CoefficientSet(12, 12, 12, 0, 0, 0),
    VariantSpec(1, Variant.AB): CoefficientSet(12, 12, 7, 0, 0, 36),
    VariantSpec(1, Variant.NAIVE): CoefficientSet(7, 7, 7, 19, 19, 36),
    VariantSpec(2, Variant.ABC): CoefficientSet(194, 194, 154, 0, 0, 0),
    VariantSpec(2, Variant.AB): CoefficientSet(194, 194, 49, 0, 0, 462),
    VariantSpec(2, Variant.NAIVE): CoefficientSet(49, 49, 49, 293, 293, 462),
}

# Published operation counts per level. The composed two-level table performs 144 C updates, not 154.
TABULATED_OPS: Dict[int, TableOps] = {
    1: TableOps(mults=7, a_adds=5, b_adds=5, c_updates=12),
    2: TableOps(mults=49, a_adds=95, b_adds=95, c_updates=154),
}


def _materialize_passes(terms_per_entry: Iterable[int]) -> int:
    # a copy for one term, a read-read-write addition for every further term
    return sum(2 if count == 1 else 3 * (count - 1) for count in terms_per_entry)


def executed_coefficients(spec: VariantSpec) -> CoefficientSet:
    """
    The memory coefficients the drivers actually incur, derived from the executed operand table.

    They agree with :data:`COEFFICIENTS` at levels 0 and 1. At level 2 the fused packers read each of the 144
    A and B terms once (tabulated 194), ABC updates C 144 times per block (tabulated 154) and the streamed C
    passes total 3 * 144 = 432 (tabulated 462).
    """
    if spec.level == 0:
        return COEFFICIENTS[spec]
    entries = strassen_table(spec.level).entries
    a_terms = sum(len(entry.a_terms) for entry in entries)
    b_terms = sum(len(entry.b_terms) for entry in entries)
    c_terms = sum(len(entry.c_terms) for entry in entries)
    if spec.variant is Variant.ABC:
        return CoefficientSet(a_terms, b_terms, c_terms, 0, 0, 0)
    if spec.variant is Variant.AB:
        return CoefficientSet(a_terms, b_terms, len(entries), 0, 0, 3 * c_terms)
    return CoefficientSet(
        len(entries),
        len(entries),
        len(entries),
        _materialize_passes(len(entry.a_terms) for entry in entries),
        _materialize_passes(len(entry.b_terms) for entry in entries),
        3 * c_terms,
    )


@dataclass(frozen=True)
class TimeBreakdown:
    """Seconds per term; arithmetic terms first, then memory terms."""

    ta_x: float = 0.0
    ta_a_plus: float = 0.0
    ta_b_plus: float = 0.0
    ta_c_plus: float = 0.0
    tm_a_x: float = 0.0
    tm_b_x: float = 0.0
    tm_c_x: float = 0.0
    tm_a_plus: float = 0.0
    tm_b_plus: float = 0.0
    tm_c_plus: float = 0.0

    @property
    def arithmetic(self) -> float:
        return self.ta_x + self.ta_a_plus + self.ta_b_plus + self.ta_c_plus

    @property
    def memory(self) -> float:
        return self.tm_a_x + self.tm_b_x + self.tm_c_x + self.tm_a_plus + self.tm_b_plus + self.tm_c_plus

    @property
    def total(self) -> float:
        return self.arithmetic + self.memory

    def merge(self, other: "TimeBreakdown") -> "TimeBreakdown":
        """Combines two breakdowns term by term (one holding T_a, the other T_m)."""
        return TimeBreakdown(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})


class Prediction(NamedTuple):
    breakdown: TimeBreakdown
    egf: float


def coefficient_set(spec: VariantSpec) -> CoefficientSet:
    return COEFFICIENTS[spec]


def _quadrant_dims(m: int, n: int, k: int, level: int):
    if m < 1 or n < 1 or k < 1:
        raise ValueError(f"Model dimensions must be positive, got m={m}, n={n}, k={k}.")
    return quadrant_extent(m, level), quadrant_extent(n, level), quadrant_extent(k, level)


def flop_counts(m: int, n: int, k: int, spec: VariantSpec, ops: Optional[TableOps] = None) -> Dict[str, int]:
    """
    Exact integer flops per arithmetic term.

    ``ops`` defaults to the published counts of :data:`TABULATED_OPS`; pass
    ``count_table_ops(strassen_table(level))`` for the flops the drivers execute.
    """
    mq, nq, kq = _quadrant_dims(m, n, k, spec.level)
    if spec.level == 0:
        return dict(ta_x=2 * m * n * k, ta_a_plus=0, ta_b_plus=0, ta_c_plus=0)
    ops = ops or TABULATED_OPS[spec.level]
    return dict(
        ta_x=ops.mults * 2 * mq * nq * kq,
        ta_a_plus=ops.a_adds * 2 * mq * kq,
        ta_b_plus=ops.b_adds * 2 * kq * nq,
        ta_c_plus=ops.c_updates * 2 * mq * nq,
    )


def memory_units(
    m: int,
    n: int,
    k: int,
    spec: VariantSpec,
    blocking: BlockingParams,
    coefficients: Optional[CoefficientSet] = None,
) -> Dict[str, int]:
    """
    Exact element counts per memory term: unit count at quadrant scale times the variant's coefficient.

    ``coefficients`` defaults to the published :data:`COEFFICIENTS`; :func:`executed_coefficients` gives the
    counts the drivers' counters report. The prefetch efficiency is not applied here; packed-buffer writes are
    not counted.
    """
    mq, nq, kq = _quadrant_dims(m, n, k, spec.level)
    N = coefficients or coefficient_set(spec)
    return dict(
        tm_a_x=N.a_x * mq * kq * -(-nq // blocking.n_c),
        tm_b_x=N.b_x * nq * kq,
        tm_c_x=N.c_x * 2 * mq * nq * -(-kq // blocking.k_c),
        tm_a_plus=N.a_plus * mq * kq,
        tm_b_plus=N.b_plus * nq * kq,
        tm_c_plus=N.c_plus * mq * nq,
    )


def arithmetic_time(m: int, n: int, k: int, spec: VariantSpec, params: ModelParams) -> TimeBreakdown:
    """T_a terms in seconds."""
    tau_a = params.effective_tau_a
    return TimeBreakdown(**{name: flops * tau_a for name, flops in flop_counts(m, n, k, spec).items()})


def memory_time(
    m: int, n: int, k: int, spec: VariantSpec, blocking: BlockingParams, params: ModelParams
) -> TimeBreakdown:
    """T_m terms in seconds; the C traffic inside the micro-kernel is scaled by the prefetch efficiency."""
    tau_b = params.effective_tau_b
    units = memory_units(m, n, k, spec, blocking)
    times = {name: count * tau_b for name, count in units.items()}
    times["tm_c_x"] *= params.prefetch_efficiency
    return TimeBreakdown(**times)


def effective_gflops(m: int, n: int, k: int, T: float) -> float:
    """2 m n k / T * 1e-9, the classical flop count over the time whatever algorithm ran."""
    if T <= 0:
        raise ValueError(f"Time must be positive, got {T}.")
    return 2.0 * m * n * k / T * 1e-9


def predict(
    m: int, n: int, k: int, spec: VariantSpec, blocking: BlockingParams, params: ModelParams
) -> Prediction:
    breakdown = arithmetic_time(m, n, k, spec, params).merge(memory_time(m, n, k, spec, blocking, params))
    return Prediction(breakdown=breakdown, egf=effective_gflops(m, n, k, breakdown.total))


def select_variant(
    m: int,
    n: int,
    k: int,
    blocking: BlockingParams,
    params: ModelParams,
    candidates: Iterable[VariantSpec] = ALL_VARIANTS,
) -> VariantSpec:
    """The candidate with the highest predicted effective GFLOPS; ties go to the earlier candidate."""
    best, best_egf = None, float("-inf")
    for spec in candidates:
        egf = predict(m, n, k, spec, blocking, params).egf
        if egf > best_egf:
            best, best_egf = spec, egf
    log.debug("Selected %s for %dx%dx%d (%.2f modeled GFLOPS).", best, m, n, k, best_egf)
    return best


def crossover_k(
    m: int,
    n: int,
    first: VariantSpec,
    second: VariantSpec,
    blocking: BlockingParams,
    params: ModelParams,
    k_values: Sequence[int],
) -> Optional[int]:
    """The first k in ``k_values`` at which ``second`` is predicted faster than ``first``, or None."""
    for k in k_values:
        if predict(m, n, k, second, blocking, params).egf > predict(m, n, k, first, blocking, params).egf:
            return k
    return None
