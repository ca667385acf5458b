"""
Benchmark harness: shape sweeps, best-of-reps timing, oracle verification and model comparison.

Run ``fused-strassen-bench --help`` for the command-line surface. Records are written as CSV.
"""
import argparse
import io
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .blocking import BlockingParams, Counters, gemm_conventional
from .matrix import MatrixView, ProblemShape, reference_gemm, rel_frobenius_error
from .model import ALL_VARIANTS, ModelParams, VariantSpec, crossover_k, effective_gflops, predict, select_variant
from .strassen import Variant, multiply
from .utils import (
    list_presets,
    load_preset,
    parse_blocking,
    parse_fixed,
    parse_range,
    read_rows,
    write_rows,
)

log = logging.getLogger(__name__)

ORACLE_LIMIT = 1200
TOLERANCE = 1e-10
DEFAULT_RANGE = "240:1200:240"
DEFAULT_PRESET = "ivybridge-1core"
DEFAULT_FIXED_MN = 2048
DEFAULT_FIXED_K = 1024
DEFAULT_PANEL = 256


class VerificationError(RuntimeError):
    """A verified run exceeded the tolerance; ``records`` holds the sweep so far, the failing record last."""

    def __init__(self, message: str, records: List["RunRecord"]):
        super().__init__(message)
        self.records = records


class Family(str, Enum):
    SQUARE = "square"
    RANKK = "rankk"
    FIXEDK = "fixedk"
    RANKB_SCHEDULE = "rankb_schedule"


@dataclass(frozen=True)
class SweepSpec:
    """
    A family of problem shapes.

    ``square`` sweeps m = n = k over the range; ``rankk`` keeps m and n fixed and sweeps k; ``fixedk`` keeps k
    fixed and sweeps m = n; ``rankb_schedule`` sweeps m = n and computes C += A B as a sequence of rank-b
    updates of panel width ``b`` over a fixed k.
    """

    family: Family
    start: int
    stop: int
    step: int = 1
    fixed: Dict[str, int] = field(default_factory=dict)
    b: int = DEFAULT_PANEL

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.start < 1 or self.step < 1 or self.b < 1:
            raise ValueError("Sweep start, step and panel width must be positive.")
        if self.start > self.stop:
            raise ValueError(f"Sweep start {self.start} exceeds stop {self.stop}.")
        if any(value < 1 for value in self.fixed.values()):
            raise ValueError(f"Fixed dimensions must be positive, got {self.fixed}.")

    @classmethod
    def from_range(cls, family: Union[Family, str], sizes: Sequence[int], **kwargs) -> "SweepSpec":
        step = sizes[1] - sizes[0] if len(sizes) > 1 else 1
        return cls(family=family, start=sizes[0], stop=sizes[-1], step=step, **kwargs)

    @property
    def sizes(self) -> List[int]:
        return list(range(self.start, self.stop + 1, self.step))

    def shapes(self) -> List[Tuple[int, int, int]]:
        """(m, n, k) triples of the sweep, in order."""
        if self.family is Family.SQUARE:
            return [(s, s, s) for s in self.sizes]
        if self.family is Family.RANKK:
            m = self.fixed.get("m", DEFAULT_FIXED_MN)
            n = self.fixed.get("n", m)
            return [(m, n, s) for s in self.sizes]
        if self.family is Family.FIXEDK:
            k = self.fixed.get("k", DEFAULT_FIXED_K)
            return [(s, s, k) for s in self.sizes]
        k = self.fixed.get("k", 4 * self.b)
        return [(s, s, k) for s in self.sizes]

    def panels(self, k: int) -> List[int]:
        """Widths of the rank-b updates splitting k; only the last may be narrower than b."""
        if self.family is not Family.RANKB_SCHEDULE:
            return [k]
        return [min(self.b, k - p) for p in range(0, k, self.b)]


@dataclass
class RunRecord:
    m: int
    n: int
    k: int
    variant: str
    level: int
    threads: int
    reps: int
    best_time_s: Optional[float] = None
    egf_measured: Optional[float] = None
    egf_modeled: Optional[float] = None
    rel_err_vs_oracle: Optional[float] = None
    flops_counted: Optional[int] = None

    def __post_init__(self):
        if self.best_time_s is not None and self.best_time_s <= 0:
            raise ValueError(f"A measured time must be positive, got {self.best_time_s}.")

    @property
    def spec(self) -> VariantSpec:
        return VariantSpec.from_name(self.variant if self.level == 0 else f"{self.variant}{self.level}")

    def to_row(self) -> dict:
        return dict(
            m=self.m,
            n=self.n,
            k=self.k,
            variant=self.variant,
            level=self.level,
            threads=self.threads,
            reps=self.reps,
            time_s=self.best_time_s,
            egf_measured=self.egf_measured,
            egf_modeled=self.egf_modeled,
            rel_err=self.rel_err_vs_oracle,
        )


def rank_b_gemm(
    A: np.ndarray,
    B: np.ndarray,
    C: np.ndarray,
    b: int,
    alpha: float = 1.0,
    variant: str = "abc",
    level: int = 1,
    params: Optional[BlockingParams] = None,
    threads: int = 1,
    counters: Optional[Counters] = None,
):
    """
    C := alpha * A * B + C as a sequence of rank-b updates C += alpha * A[:, p:p+b] * B[p:p+b, :].

    Each update runs through the selected variant; this is the local computation of a SUMMA step.
    """
    assert b >= 1, "The panel width must be positive."
    k = A.shape[1]
    for p in range(0, k, b):
        multiply(
            A[:, p : p + b],
            B[p : p + b, :],
            C,
            alpha=alpha,
            variant=variant,
            level=level,
            params=params,
            threads=threads,
            counters=counters,
        )


def _variant_args(spec: VariantSpec) -> dict:
    return dict(variant=spec.variant.value, level=spec.level)


def _modeled_egf(
    sweep: SweepSpec, m: int, n: int, k: int, spec: VariantSpec, blocking: BlockingParams, params: ModelParams
) -> float:
    total = math.fsum(predict(m, n, width, spec, blocking, params).breakdown.total for width in sweep.panels(k))
    return effective_gflops(m, n, k, total)


def _runner(sweep: SweepSpec, A, B, spec, alpha, blocking, threads) -> Callable[[np.ndarray, Optional[Counters]], None]:
    options = dict(params=blocking, threads=threads, **_variant_args(spec))
    if sweep.family is Family.RANKB_SCHEDULE:

        def run(C, counters):
            rank_b_gemm(A, B, C, sweep.b, alpha, counters=counters, **options)

    else:

        def run(C, counters):
            multiply(A, B, C, alpha, counters=counters, **options)

    return run


def _resolve_threads(threads: Optional[int], model_params: Optional[ModelParams]) -> int:
    if threads is not None:
        return threads
    return model_params.cores if model_params is not None else 1


def _expected(A: np.ndarray, B: np.ndarray, C0: np.ndarray, alpha: float, blocking: BlockingParams) -> np.ndarray:
    C_ref = C0.copy()
    views = [MatrixView.from_array(operand) for operand in (A, B, C_ref)]
    shape = ProblemShape.from_views(*views, alpha=alpha)
    if max(shape.m, shape.n, shape.k) <= ORACLE_LIMIT:
        reference_gemm(shape, *views)
    else:
        log.warning(
            "%dx%dx%d exceeds the oracle limit %d; verifying against the conventional blocked GEMM.",
            shape.m,
            shape.n,
            shape.k,
            ORACLE_LIMIT,
        )
        gemm_conventional(shape, *views, params=blocking)
    return C_ref


def run_sweep(
    sweep: SweepSpec,
    variants: Sequence[VariantSpec] = ALL_VARIANTS,
    blocking: Optional[BlockingParams] = None,
    model_params: Optional[ModelParams] = None,
    reps: int = 3,
    threads: Optional[int] = None,
    verify: bool = False,
    alpha: float = 1.0,
    seed: int = 0,
) -> List[RunRecord]:
    """
    Times every variant on every shape of the sweep.

    Each run is warmed up once, then timed ``reps`` times keeping the best wall time. Copying C back to its
    initial value before a repetition is not timed. Allocation of workspaces inside the drivers is subtracted
    through the ``alloc_seconds`` timer. With ``verify`` the result of the last repetition is compared against
    the reference. Without ``threads`` the run uses the cores of ``model_params`` (one without parameters).

    Raises
    ------
    VerificationError
        When a relative error exceeds the tolerance; the failing record is the last of ``records``.
    """
    assert reps >= 1, "At least one timed repetition is required."
    blocking = blocking or BlockingParams()
    threads = _resolve_threads(threads, model_params)
    predict_params = model_params.for_threads(threads) if model_params is not None else None
    rng = np.random.default_rng(seed)
    records = []
    for m, n, k in sweep.shapes():
        A = rng.standard_normal((m, k))
        B = rng.standard_normal((k, n))
        C0 = rng.standard_normal((m, n))
        C_ref = _expected(A, B, C0, alpha, blocking) if verify else None

        for spec in variants:
            run = _runner(sweep, A, B, spec, alpha, blocking, threads)
            run(C0.copy(), None)

            best, best_counters, C = math.inf, None, None
            for _ in range(reps):
                C = C0.copy()
                counters = Counters()
                start = time.perf_counter()
                run(C, counters)
                elapsed = time.perf_counter() - start - counters.alloc_seconds
                if elapsed < best:
                    best, best_counters = elapsed, counters
            log.debug(
                "%s %dx%dx%d: packing %.3es, kernel %.3es of %.3es.",
                spec,
                m,
                n,
                k,
                best_counters.pack_seconds,
                best_counters.kernel_seconds,
                best,
            )

            record = RunRecord(
                m=m,
                n=n,
                k=k,
                variant=spec.variant.value,
                level=spec.level,
                threads=threads,
                reps=reps,
                best_time_s=best,
                egf_measured=effective_gflops(m, n, k, best),
                egf_modeled=_modeled_egf(sweep, m, n, k, spec, blocking, predict_params) if predict_params else None,
                rel_err_vs_oracle=rel_frobenius_error(MatrixView.from_array(C), MatrixView.from_array(C_ref))
                if verify
                else None,
                flops_counted=best_counters.flops,
            )
            records.append(record)
            log.info("%s %dx%dx%d: %.2f effective GFLOPS.", spec, m, n, k, record.egf_measured)
            if verify and not record.rel_err_vs_oracle <= TOLERANCE:
                raise VerificationError(
                    f"{spec} on {m}x{n}x{k} has relative error {record.rel_err_vs_oracle:.3e} > {TOLERANCE:g}.",
                    records,
                )
    return records


def model_only(
    sweep: SweepSpec,
    variants: Sequence[VariantSpec] = ALL_VARIANTS,
    blocking: Optional[BlockingParams] = None,
    model_params: Optional[ModelParams] = None,
    threads: Optional[int] = None,
) -> List[RunRecord]:
    """
    Model predictions for every shape and variant of the sweep; measured fields stay empty.

    Without ``threads`` the prediction assumes the cores the parameters describe.
    """
    blocking = blocking or BlockingParams()
    model_params = model_params or load_preset(DEFAULT_PRESET)
    threads = _resolve_threads(threads, model_params)
    model_params = model_params.for_threads(threads)
    return [
        RunRecord(
            m=m,
            n=n,
            k=k,
            variant=spec.variant.value,
            level=spec.level,
            threads=threads,
            reps=0,
            egf_modeled=_modeled_egf(sweep, m, n, k, spec, blocking, model_params),
        )
        for m, n, k in sweep.shapes()
        for spec in variants
    ]


def model_report(
    sweep: SweepSpec,
    variants: Sequence[VariantSpec] = ALL_VARIANTS,
    blocking: Optional[BlockingParams] = None,
    model_params: Optional[ModelParams] = None,
    threads: Optional[int] = None,
) -> List[str]:
    """
    The predicted fastest variant per shape and, for rank-k sweeps, the first k at which each AB variant
    overtakes the ABC variant of the same level. Rank-b schedules are judged on one update.
    """
    blocking = blocking or BlockingParams()
    model_params = model_params or load_preset(DEFAULT_PRESET)
    model_params = model_params.for_threads(_resolve_threads(threads, model_params))
    lines = []
    for m, n, k in sweep.shapes():
        best = select_variant(m, n, sweep.panels(k)[0], blocking, model_params, variants)
        lines.append(f"{m}x{n}x{k}: {best} predicted fastest")
    if sweep.family is Family.RANKK:
        m, n, _ = sweep.shapes()[0]
        for level in (1, 2):
            fused, streamed = VariantSpec(level, Variant.ABC), VariantSpec(level, Variant.AB)
            if fused not in variants or streamed not in variants:
                continue
            k = crossover_k(m, n, fused, streamed, blocking, model_params, sweep.sizes)
            if k is None:
                lines.append(f"{streamed} never overtakes {fused} up to k={sweep.sizes[-1]}")
            else:
                lines.append(f"{streamed} overtakes {fused} at k={k}")
    return lines


def emit_csv(records: Sequence[RunRecord], stream: Optional[IO[str]] = None) -> str:
    """Formats records as CSV (17 significant digits for floats), writes them to ``stream`` if given."""
    buffer = io.StringIO()
    write_rows((record.to_row() for record in records), buffer)
    text = buffer.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def _optional(value, cast):
    return None if value is None or (isinstance(value, float) and math.isnan(value)) else cast(value)


def read_records(file_path: Union[str, Path, IO[str]]) -> List[RunRecord]:
    """Parses a CSV written by :func:`emit_csv` back into records."""
    df = read_rows(file_path)
    return [
        RunRecord(
            m=int(row.m),
            n=int(row.n),
            k=int(row.k),
            variant=str(row.variant),
            level=int(row.level),
            threads=int(row.threads),
            reps=int(row.reps),
            best_time_s=_optional(row.time_s, float),
            egf_measured=_optional(row.egf_measured, float),
            egf_modeled=_optional(row.egf_modeled, float),
            rel_err_vs_oracle=_optional(row.rel_err, float),
        )
        for row in df.itertuples(index=False)
    ]


def _parse_variants(text: str) -> List[VariantSpec]:
    return [VariantSpec.from_name(name) for name in text.split(",") if name.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fused-strassen-bench",
        description="Time and model dgemm and fused Strassen variants over families of problem shapes.",
    )
    parser.add_argument("--family", choices=[family.value for family in Family], default=Family.SQUARE.value)
    parser.add_argument("--range", dest="sizes", default=DEFAULT_RANGE, help="start:stop:step, stop inclusive")
    parser.add_argument("--fixed", default="", help="fixed dimensions, e.g. m=2048,n=2048 or k=1024")
    parser.add_argument("--b", type=int, default=DEFAULT_PANEL, help="panel width of the rank-b schedule")
    parser.add_argument(
        "--variants", default=",".join(spec.name for spec in ALL_VARIANTS), help="comma separated variant names"
    )
    parser.add_argument(
        "--threads", type=int, default=None, help="workers sharing the third loop; defaults to the preset's cores"
    )
    parser.add_argument("--reps", type=int, default=3, help="timed repetitions; the best is reported")
    parser.add_argument("--verify", action="store_true", help="check every result against a reference")
    parser.add_argument("--model-only", action="store_true", help="emit model predictions without running")
    parser.add_argument("--params", default=DEFAULT_PRESET, help="preset name or key=value preset file")
    parser.add_argument("--blocking", default="", help="overrides, e.g. mC=96,nC=4096,kC=256,mR=8,nR=4")
    parser.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    parser.add_argument("--seed", type=int, default=0, help="seed of the random inputs")
    parser.add_argument("--list-presets", action="store_true", help="print the bundled presets and exit")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true")
    verbosity.add_argument("--quiet", "-q", action="store_true")
    return parser


def _write(records: Sequence[RunRecord], out: str):
    if out == "-":
        emit_csv(records, sys.stdout)
        return
    with open(out, "w", newline="") as f:
        emit_csv(records, f)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s: %(message)s")

    if args.list_presets:
        for file_path in list_presets():
            print(file_path.stem)
        return 0

    try:
        sweep = SweepSpec.from_range(args.family, parse_range(args.sizes), fixed=parse_fixed(args.fixed), b=args.b)
        variants = _parse_variants(args.variants)
        blocking = parse_blocking(args.blocking)
        model_params = load_preset(args.params)
        if (args.threads is not None and args.threads < 1) or args.reps < 1:
            raise ValueError("--threads and --reps must be positive.")
    except (ValueError, FileNotFoundError, AssertionError) as e:
        parser.error(str(e))

    if args.model_only:
        _write(model_only(sweep, variants, blocking, model_params, threads=args.threads), args.out)
        for line in model_report(sweep, variants, blocking, model_params, threads=args.threads):
            log.info(line)
        return 0

    try:
        records = run_sweep(
            sweep,
            variants,
            blocking,
            model_params,
            reps=args.reps,
            threads=args.threads,
            verify=args.verify,
            seed=args.seed,
        )
    except VerificationError as e:
        _write(e.records, args.out)
        log.error("Verification failed: %s", e)
        return 1
    _write(records, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
