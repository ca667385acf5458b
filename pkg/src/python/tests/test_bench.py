import io
import os
import unittest
from pathlib import Path
from shutil import rmtree
from tempfile import mkdtemp
from unittest import mock
from warnings import warn

from hdmf.testing import TestCase

from fused_strassen import ALL_VARIANTS, BlockingParams, VariantSpec, crossover_k, predict
from fused_strassen.bench import (
    SweepSpec,
    RunRecord,
    VerificationError,
    emit_csv,
    main,
    model_only,
    model_report,
    read_records,
    run_sweep,
)
from fused_strassen.utils import CSV_COLUMNS, load_preset

HEADER = "m,n,k,variant,level,threads,reps,time_s,egf_measured,egf_modeled,rel_err"

SMALL_BLOCKING = BlockingParams(m_c=16, n_c=32, k_c=24, m_r=4, n_r=4)


class TestSweepSpec(TestCase):
    def test_families(self):
        self.assertListEqual(
            SweepSpec("square", 240, 720, 240).shapes(), [(240, 240, 240), (480, 480, 480), (720, 720, 720)]
        )
        self.assertListEqual(
            SweepSpec("rankk", 256, 512, 256, fixed=dict(m=16000, n=16000)).shapes(),
            [(16000, 16000, 256), (16000, 16000, 512)],
        )
        self.assertListEqual(SweepSpec("fixedk", 2000, 4000, 2000).shapes(), [(2000, 2000, 1024), (4000, 4000, 1024)])

    def test_rank_b_schedule(self):
        sweep = SweepSpec("rankb_schedule", 2048, 2048, 1, fixed=dict(k=1024), b=256)
        self.assertListEqual(sweep.shapes(), [(2048, 2048, 1024)])
        self.assertListEqual(sweep.panels(1024), [256, 256, 256, 256])
        self.assertListEqual(sweep.panels(600), [256, 256, 88])
        self.assertListEqual(SweepSpec("square", 8, 8).panels(8), [8])

    def test_validation(self):
        with self.assertRaises(ValueError):
            SweepSpec("square", 10, 5)
        with self.assertRaises(ValueError):
            SweepSpec("square", 0, 5)
        with self.assertRaises(ValueError):
            SweepSpec("cube", 1, 5)
        with self.assertRaises(ValueError):
            SweepSpec("fixedk", 1, 5, fixed=dict(k=0))

    def test_record_rejects_nonpositive_time(self):
        with self.assertRaises(ValueError):
            RunRecord(1, 1, 1, "abc", 1, 1, 1, best_time_s=0.0)


class TestCsv(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.test_dir = Path(mkdtemp())
        cls.record = RunRecord(
            m=240,
            n=480,
            k=720,
            variant="ab",
            level=2,
            threads=4,
            reps=3,
            best_time_s=0.012345678901234567,
            egf_measured=13.999999999999998,
            egf_modeled=21.25,
            rel_err_vs_oracle=3.3e-16,
        )

    @classmethod
    def tearDownClass(cls):
        try:
            rmtree(cls.test_dir)
        except PermissionError:  # Windows CI bug
            warn(f"Unable to fully clean the temporary directory: {cls.test_dir}\n\nPlease remove it manually.")

    def test_header_only(self):
        self.assertEqual(emit_csv([]), HEADER + "\n")
        self.assertEqual(HEADER.split(","), CSV_COLUMNS)

    def test_one_record(self):
        stream = io.StringIO()
        text = emit_csv([self.record], stream)
        self.assertEqual(stream.getvalue(), text)
        lines = text.splitlines()
        self.assertEqual(len(lines), 2)
        self.assertEqual(lines[1].split(",")[:7], ["240", "480", "720", "ab", "2", "4", "3"])

    def test_round_trip(self):
        path = self.test_dir / "records.csv"
        unmeasured = RunRecord(m=3, n=5, k=7, variant="dgemm", level=0, threads=1, reps=0, egf_modeled=1.5)
        with open(path, "w", newline="") as f:
            emit_csv([self.record, unmeasured], f)

        first, second = read_records(path)
        self.assertEqual(first, self.record)
        self.assertEqual(second, unmeasured)
        self.assertIsNone(second.best_time_s)
        self.assertEqual(first.spec, VariantSpec.from_name("ab2"))


class TestRunSweep(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.params = load_preset("ivybridge-1core")

    def test_verified_square_sweep(self):
        sweep = SweepSpec("square", 24, 72, 24)
        records = run_sweep(sweep, ALL_VARIANTS, SMALL_BLOCKING, self.params, reps=2, verify=True)
        self.assertEqual(len(records), 3 * len(ALL_VARIANTS))
        for record in records:
            with self.subTest(m=record.m, variant=record.variant, level=record.level):
                self.assertLessEqual(record.rel_err_vs_oracle, 1e-10)
                self.assertGreater(record.best_time_s, 0.0)
                self.assertGreater(record.egf_modeled, 0.0)
                self.assertAlmostEqual(record.egf_measured, 2 * record.m**3 / record.best_time_s * 1e-9)

    def test_counted_flops(self):
        sweep = SweepSpec("square", 32, 32)
        dgemm, abc1 = run_sweep(sweep, [VariantSpec(0), VariantSpec.from_name("abc1")], SMALL_BLOCKING, reps=1)
        self.assertEqual(dgemm.flops_counted, 2 * 32**3)
        self.assertEqual(abc1.flops_counted, 7 * 2 * 16**3 + 5 * 2 * 16**2 * 2 + 12 * 2 * 16**2)
        self.assertIsNone(dgemm.egf_modeled)
        self.assertIsNone(dgemm.rel_err_vs_oracle)

    def test_errors_do_not_depend_on_worker_count(self):
        sweep = SweepSpec("fixedk", 40, 80, 40, fixed=dict(k=50))
        errors = []
        for threads in (1, 2, 4):
            records = run_sweep(sweep, ALL_VARIANTS, SMALL_BLOCKING, reps=1, threads=threads, verify=True, seed=3)
            errors.append([record.rel_err_vs_oracle for record in records])
        self.assertListEqual(errors[0], errors[1])
        self.assertListEqual(errors[0], errors[2])

    def test_rank_b_schedule(self):
        sweep = SweepSpec("rankb_schedule", 48, 48, 1, fixed=dict(k=100), b=32)
        records = run_sweep(sweep, ALL_VARIANTS, SMALL_BLOCKING, self.params, reps=1, verify=True)
        self.assertEqual(len(records), len(ALL_VARIANTS))
        for record in records:
            self.assertEqual((record.m, record.n, record.k), (48, 48, 100))
            self.assertLessEqual(record.rel_err_vs_oracle, 1e-10)

    def test_verification_failure(self):
        sweep = SweepSpec("square", 16, 16)
        with mock.patch("fused_strassen.bench.TOLERANCE", -1.0):
            with self.assertRaises(VerificationError) as context:
                run_sweep(sweep, ALL_VARIANTS, SMALL_BLOCKING, reps=1, verify=True)
        self.assertEqual(len(context.exception.records), 1)
        self.assertEqual(context.exception.records[0].variant, "dgemm")

    @unittest.skipUnless(os.environ.get("FUSED_STRASSEN_SLOW"), "set FUSED_STRASSEN_SLOW=1 for the full square sweep")
    def test_default_square_sweep(self):
        sweep = SweepSpec("square", 240, 1200, 240)
        records = run_sweep(sweep, ALL_VARIANTS, model_params=self.params, reps=1, verify=True)
        self.assertEqual(len(records), 35)
        self.assertTrue(all(record.rel_err_vs_oracle <= 1e-10 for record in records))


class TestModelOnly(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.params = load_preset("ivybridge-1core")

    def test_measured_fields_are_empty(self):
        records = model_only(SweepSpec("square", 2000, 16000, 2000), ALL_VARIANTS, model_params=self.params)
        self.assertEqual(len(records), 8 * 7)
        for record in records:
            self.assertIsNone(record.best_time_s)
            self.assertIsNone(record.egf_measured)
            self.assertIsNone(record.rel_err_vs_oracle)

    def test_dgemm_below_peak(self):
        records = model_only(SweepSpec("square", 1000, 16000, 1000), [VariantSpec(0)], model_params=self.params)
        self.assertTrue(all(record.egf_modeled <= self.params.peak_gflops for record in records))

    def test_one_level_abc_wins_at_rank_512(self):
        records = model_only(SweepSpec("fixedk", 16000, 16000, 1, fixed=dict(k=512)), ALL_VARIANTS, None, self.params)
        best = max(records, key=lambda record: record.egf_modeled)
        self.assertEqual((best.variant, best.level), ("abc", 1))

    def test_rank_b_schedule_models_each_update(self):
        abc1 = [VariantSpec.from_name("abc1")]
        schedule = SweepSpec("rankb_schedule", 2048, 2048, 1, fixed=dict(k=1024), b=256)
        (record,) = model_only(schedule, abc1, model_params=self.params)
        (single,) = model_only(SweepSpec("rankk", 256, 256, 1, fixed=dict(m=2048)), abc1, model_params=self.params)
        # four identical rank-256 updates run at the speed of one
        self.assertAlmostEqual(record.egf_modeled, single.egf_modeled)


class TestThreadDefaults(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.params = load_preset("ivybridge-10core")

    def test_model_only_uses_preset_cores(self):
        dgemm = [VariantSpec(0)]
        (record,) = model_only(SweepSpec("square", 8000, 8000), dgemm, model_params=self.params)
        self.assertEqual(record.threads, self.params.cores)
        expected = predict(8000, 8000, 8000, VariantSpec(0), BlockingParams(), self.params).egf
        self.assertAlmostEqual(record.egf_modeled, expected)

    def test_explicit_threads_override_cores(self):
        dgemm = [VariantSpec(0)]
        (record,) = model_only(SweepSpec("square", 8000, 8000), dgemm, model_params=self.params, threads=1)
        self.assertEqual(record.threads, 1)
        single = self.params.for_threads(1)
        expected = predict(8000, 8000, 8000, VariantSpec(0), BlockingParams(), single).egf
        self.assertAlmostEqual(record.egf_modeled, expected)
        (parallel,) = model_only(SweepSpec("square", 8000, 8000), dgemm, model_params=self.params)
        self.assertGreater(parallel.egf_modeled, record.egf_modeled)

    def test_run_sweep_without_parameters_uses_one_worker(self):
        (record,) = run_sweep(SweepSpec("square", 16, 16), [VariantSpec(0)], SMALL_BLOCKING, reps=1)
        self.assertEqual(record.threads, 1)


class TestModelReport(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.params = load_preset("ivybridge-1core")

    def test_best_variant_per_shape(self):
        sweep = SweepSpec("fixedk", 16000, 16000, 1, fixed=dict(k=512))
        self.assertListEqual(
            model_report(sweep, ALL_VARIANTS, model_params=self.params), ["16000x16000x512: abc1 predicted fastest"]
        )

    def test_rank_k_crossovers(self):
        sweep = SweepSpec("rankk", 512, 4096, 512, fixed=dict(m=16000, n=16000))
        lines = model_report(sweep, ALL_VARIANTS, model_params=self.params)
        self.assertEqual(len(lines), len(sweep.sizes) + 2)
        for level, line in zip((1, 2), lines[-2:]):
            fused, streamed = VariantSpec.from_name(f"abc{level}"), VariantSpec.from_name(f"ab{level}")
            k = crossover_k(16000, 16000, fused, streamed, BlockingParams(), self.params, sweep.sizes)
            with self.subTest(level=level):
                self.assertTrue(line.startswith(f"ab{level} "))
                self.assertEqual(line.endswith(f"at k={k}"), k is not None)

    def test_crossovers_need_both_variants(self):
        sweep = SweepSpec("rankk", 512, 1024, 512, fixed=dict(m=4000, n=4000))
        lines = model_report(sweep, [VariantSpec(0), VariantSpec.from_name("abc1")], model_params=self.params)
        self.assertEqual(len(lines), 2)


class TestCommandLine(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.test_dir = Path(mkdtemp())

    @classmethod
    def tearDownClass(cls):
        try:
            rmtree(cls.test_dir)
        except PermissionError:  # Windows CI bug
            warn(f"Unable to fully clean the temporary directory: {cls.test_dir}\n\nPlease remove it manually.")

    def test_model_only(self):
        out = self.test_dir / "model.csv"
        code = main(["--model-only", "--range", "2000:4000:2000", "--variants", "dgemm,abc2", "--out", str(out), "-q"])
        self.assertEqual(code, 0)
        records = read_records(out)
        self.assertListEqual(
            [(record.m, record.variant, record.level) for record in records],
            [(2000, "dgemm", 0), (2000, "abc", 2), (4000, "dgemm", 0), (4000, "abc", 2)],
        )

    def test_verified_run(self):
        out = self.test_dir / "run.csv"
        argv = ["--range", "20:40:20", "--variants", "abc1,naive2", "--verify", "--reps", "1", "--threads", "2"]
        code = main(argv + ["--blocking", "mC=16,nC=32,kC=24,mR=4,nR=4", "--out", str(out), "-q"])
        self.assertEqual(code, 0)
        records = read_records(out)
        self.assertEqual(len(records), 4)
        self.assertTrue(all(record.rel_err_vs_oracle <= 1e-10 for record in records))

    def test_verification_failure_exit_code(self):
        out = self.test_dir / "failed.csv"
        with mock.patch("fused_strassen.bench.TOLERANCE", -1.0):
            code = main(["--range", "8:8:1", "--variants", "abc1", "--verify", "--reps", "1", "--out", str(out), "-q"])
        self.assertEqual(code, 1)
        (record,) = read_records(out)
        self.assertEqual(record.variant, "abc")

    def test_list_presets(self):
        with mock.patch("sys.stdout", new_callable=io.StringIO) as stdout:
            self.assertEqual(main(["--list-presets"]), 0)
        self.assertEqual(stdout.getvalue().split(), ["ivybridge-1core", "ivybridge-10core"])

    def test_bad_arguments(self):
        with mock.patch("sys.stderr", new_callable=io.StringIO):
            with self.assertRaises(SystemExit):
                main(["--range", "5:1"])
            with self.assertRaises(SystemExit):
                main(["--variants", "abc7"])
