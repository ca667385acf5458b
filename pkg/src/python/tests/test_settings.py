from pathlib import Path
from shutil import rmtree
from tempfile import mkdtemp
from warnings import warn

from hdmf.testing import TestCase

from fused_strassen import BlockingParams
from fused_strassen.utils import (
    list_presets,
    load_preset,
    parse_blocking,
    parse_fixed,
    parse_range,
    read_model_params,
)


class TestPresets(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.test_dir = Path(mkdtemp())

        cls.tau_preset = cls.test_dir / "measured.cfg"
        cls.tau_preset.write_text("# measured on a laptop\ntau_a=2.5e-11\ntau_b = 1.0e-10\nlambda=0.9\ncores=2\n")

        cls.unknown_key_preset = cls.test_dir / "extra.cfg"
        cls.unknown_key_preset.write_text("peak_gflops=10\nbandwidth_gbs=8\nsockets=2\n")

        cls.incomplete_preset = cls.test_dir / "incomplete.cfg"
        cls.incomplete_preset.write_text("peak_gflops=10\n")

        cls.empty_dir = cls.test_dir / "empty"
        cls.empty_dir.mkdir()

    @classmethod
    def tearDownClass(cls):
        try:
            rmtree(cls.test_dir)
        except PermissionError:  # Windows CI bug
            warn(f"Unable to fully clean the temporary directory: {cls.test_dir}\n\nPlease remove it manually.")

    def test_read_tau_values(self):
        params = read_model_params(self.tau_preset)
        self.assertEqual(params.tau_a, 2.5e-11)
        self.assertEqual(params.tau_b, 1.0e-10)
        self.assertEqual(params.prefetch_efficiency, 0.9)
        self.assertEqual(params.channel_factor, 1.0)
        self.assertEqual(params.cores, 2)
        self.assertEqual(params.name, "measured")

    def test_derived_from_hardware_figures(self):
        with self.assertWarns(UserWarning):
            params = read_model_params(self.unknown_key_preset)
        self.assertAlmostEqual(params.tau_a * 1e11, 1e11 / 10e9)
        self.assertAlmostEqual(params.tau_b * 1e9, 1.0)

    def test_missing_bandwidth(self):
        with self.assertRaises(AssertionError):
            read_model_params(self.incomplete_preset)

    def test_bundled_presets_in_natural_order(self):
        self.assertListEqual([path.stem for path in list_presets()], ["ivybridge-1core", "ivybridge-10core"])

    def test_single_core_preset(self):
        params = load_preset("ivybridge-1core")
        self.assertAlmostEqual(params.peak_gflops, 28.32)
        self.assertAlmostEqual(params.tau_b * 1e9, 8 / 59.7)
        self.assertEqual(params.channel_factor, 4.0)
        self.assertEqual(params.prefetch_efficiency, 0.7)
        self.assertEqual(params.cores, 1)

    def test_ten_core_preset(self):
        params = load_preset("ivybridge-10core")
        self.assertAlmostEqual(params.peak_gflops, 248.0)
        self.assertEqual(params.channel_factor, 1.0)

    def test_load_by_path(self):
        self.assertEqual(load_preset(str(self.tau_preset)).tau_a, 2.5e-11)

    def test_unknown_preset(self):
        with self.assertRaises(FileNotFoundError):
            load_preset("skylake", folder_path=self.test_dir)

    def test_empty_folder_warns(self):
        with self.assertWarns(UserWarning):
            self.assertListEqual(list_presets(self.empty_dir), [])


class TestParsers(TestCase):
    def test_blocking_overrides(self):
        params = parse_blocking("mC=48, kC=128,nR=8")
        self.assertEqual(params, BlockingParams(m_c=48, n_c=4096, k_c=128, m_r=8, n_r=8))

    def test_blocking_defaults(self):
        self.assertEqual(parse_blocking(""), BlockingParams())

    def test_blocking_rejects_unknown_keys(self):
        with self.assertRaises(ValueError):
            parse_blocking("mC=96,lC=10")
        with self.assertRaises(ValueError):
            parse_blocking("mC")

    def test_range(self):
        self.assertListEqual(parse_range("240:1200:240"), [240, 480, 720, 960, 1200])
        self.assertListEqual(parse_range("3:5"), [3, 4, 5])
        for text in ("5:3:1", "0:10:2", "1:10:0", "10"):
            with self.subTest(text=text):
                with self.assertRaises(ValueError):
                    parse_range(text)

    def test_fixed(self):
        self.assertDictEqual(parse_fixed("m=16000,n=16000"), dict(m=16000, n=16000))
        self.assertDictEqual(parse_fixed(""), {})
        with self.assertRaises(ValueError):
            parse_fixed("q=3")
        with self.assertRaises(ValueError):
            parse_fixed("k=0")
