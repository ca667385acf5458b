import numpy as np
from hdmf.testing import TestCase
from numpy.testing import assert_allclose, assert_array_equal

from fused_strassen import (
    MatrixView,
    ProblemShape,
    ShapeError,
    partition_quadrants,
    quadrant_extent,
    reference_gemm,
    rel_frobenius_error,
)


class TestMatrixView(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.rng = np.random.default_rng(7)

    def test_row_major_roundtrip(self):
        array = self.rng.standard_normal((5, 3))
        view = MatrixView.from_array(array)
        self.assertEqual(view.shape, (5, 3))
        self.assertEqual((view.row_stride, view.col_stride), (3, 1))
        assert_array_equal(view.array(), array)

    def test_column_major_and_transpose(self):
        array = np.asfortranarray(self.rng.standard_normal((4, 6)))
        view = MatrixView.from_array(array)
        self.assertEqual((view.row_stride, view.col_stride), (1, 4))
        assert_array_equal(view.transpose().array(), array.T)
        assert_array_equal(MatrixView.from_array(array.T).array(), array.T)

    def test_slice_shares_memory(self):
        array = self.rng.standard_normal((8, 8))
        view = MatrixView.from_array(array[2:6, 1:4])
        self.assertEqual(view.shape, (4, 3))
        view.array()[0, 0] = 42.0
        self.assertEqual(array[2, 1], 42.0)

    def test_subview_is_clipped(self):
        view = MatrixView.zeros(5, 7)
        self.assertEqual(view.subview(3, 4, 3, 4).shape, (2, 3))
        self.assertTrue(view.subview(5, 0, 3, 4).is_empty)

    def test_rejects_other_dtypes(self):
        with self.assertRaises(ShapeError):
            MatrixView.from_array(np.zeros((3, 3), dtype=np.float32))
        with self.assertRaises(ShapeError):
            MatrixView.from_array(np.zeros(9))

    def test_rejects_out_of_bounds_view(self):
        with self.assertRaises(ShapeError):
            MatrixView(np.zeros(6), 3, 3, 3, 1)


class TestPartition(TestCase):
    def test_quadrant_extent(self):
        self.assertEqual(quadrant_extent(16000, 1), 8000)
        self.assertEqual(quadrant_extent(16000, 2), 4000)
        self.assertEqual(quadrant_extent(5, 1), 3)
        self.assertEqual(quadrant_extent(1, 2), 1)
        self.assertEqual(quadrant_extent(7, 0), 7)

    def test_large_even_partition(self):
        # a 16000 x 16000 matrix backed by a single row of storage
        view = MatrixView(np.zeros(16000), 16000, 16000, 0, 1)
        grid = partition_quadrants(view, 1)
        self.assertEqual(len(grid), 4)
        self.assertEqual(grid.logical_q_rows, 8000)
        for quadrant in grid.views:
            self.assertEqual(quadrant.shape, (8000, 8000))

    def test_odd_partition_clips_fringe(self):
        grid = partition_quadrants(MatrixView.zeros(5, 7), 1)
        self.assertEqual((grid.logical_q_rows, grid.logical_q_cols), (3, 4))
        self.assertEqual([quadrant.shape for quadrant in grid.views], [(3, 4), (3, 3), (2, 4), (2, 3)])

    def test_level_two_of_tiny_matrix_has_empty_quadrants(self):
        grid = partition_quadrants(MatrixView.zeros(3, 3), 2)
        self.assertEqual(grid.logical_q_rows, 1)
        self.assertEqual(sum(not quadrant.is_empty for quadrant in grid.views), 9)
        self.assertTrue(grid.view(3, 0).is_empty)
        self.assertTrue(grid.view(0, 3).is_empty)

    def test_quadrants_tile_the_matrix(self):
        array = np.arange(35, dtype=np.float64).reshape(5, 7)
        grid = partition_quadrants(MatrixView.from_array(array), 1)
        top = np.hstack([grid.view(0, 0).array(), grid.view(0, 1).array()])
        bottom = np.hstack([grid.view(1, 0).array(), grid.view(1, 1).array()])
        assert_array_equal(np.vstack([top, bottom]), array)

    def test_every_small_shape_is_reassembled(self):
        for level in (1, 2):
            for m in range(1, 34):
                for n in range(1, 34):
                    array = np.arange(m * n, dtype=np.float64).reshape(m, n)
                    grid = partition_quadrants(MatrixView.from_array(array), level)
                    rows = [
                        np.hstack([grid.view(I, J).array() for J in range(grid.side)]) for I in range(grid.side)
                    ]
                    with self.subTest(level=level, m=m, n=n):
                        assert_array_equal(np.vstack(rows), array)
                        self.assertTrue(
                            all(
                                view.rows <= grid.logical_q_rows and view.cols <= grid.logical_q_cols
                                for view in grid.views
                            )
                        )

    def test_negative_level(self):
        with self.assertRaises(ValueError):
            partition_quadrants(MatrixView.zeros(2, 2), -1)


class TestReferenceGemm(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.rng = np.random.default_rng(11)

    def test_matches_numpy(self):
        A = self.rng.standard_normal((13, 9))
        B = self.rng.standard_normal((9, 17))
        C0 = self.rng.standard_normal((13, 17))
        C = C0.copy()
        views = [MatrixView.from_array(x) for x in (A, B, C)]
        reference_gemm(ProblemShape.from_views(*views, alpha=-0.5), *views)
        assert_allclose(C, C0 - 0.5 * A @ B, rtol=1e-12, atol=1e-12)

    def test_identity(self):
        C = np.zeros((4, 4))
        views = [MatrixView.from_array(x) for x in (np.eye(4), np.eye(4), C)]
        reference_gemm(ProblemShape(4, 4, 4), *views)
        assert_array_equal(C, np.eye(4))

    def test_small_product(self):
        C = np.zeros((2, 2))
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        B = np.array([[5.0, 6.0], [7.0, 8.0]])
        views = [MatrixView.from_array(x) for x in (A, B, C)]
        reference_gemm(ProblemShape(2, 2, 2), *views)
        assert_array_equal(C, [[19.0, 22.0], [43.0, 50.0]])

    def test_zero_alpha_leaves_c(self):
        A = self.rng.standard_normal((6, 5))
        B = self.rng.standard_normal((5, 7))
        C0 = self.rng.standard_normal((6, 7))
        C = C0.copy()
        views = [MatrixView.from_array(x) for x in (A, B, C)]
        reference_gemm(ProblemShape.from_views(*views, alpha=0.0), *views)
        assert_array_equal(C, C0)

    def test_stride_swapped_operand_equals_transpose(self):
        X = self.rng.standard_normal((5, 3))
        B = self.rng.standard_normal((5, 4))
        C0 = self.rng.standard_normal((3, 4))
        swapped, explicit = C0.copy(), C0.copy()
        A_view = MatrixView.from_array(X).transpose()
        views = [A_view, MatrixView.from_array(B), MatrixView.from_array(swapped)]
        reference_gemm(ProblemShape.from_views(*views), *views)
        views = [MatrixView.from_array(x) for x in (np.ascontiguousarray(X.T), B, explicit)]
        reference_gemm(ProblemShape.from_views(*views), *views)
        assert_array_equal(swapped, explicit)

    def test_shape_mismatch(self):
        views = [MatrixView.zeros(2, 3), MatrixView.zeros(4, 2), MatrixView.zeros(2, 2)]
        with self.assertRaises(ShapeError):
            ProblemShape.from_views(*views)

    def test_nonpositive_dims(self):
        with self.assertRaises(ShapeError):
            ProblemShape(0, 3, 3)

    def test_relative_error(self):
        C = MatrixView.from_array(np.full((2, 2), 3.0))
        self.assertEqual(rel_frobenius_error(C, C), 0.0)
        small = MatrixView.from_array(np.full((2, 2), 1e-3))
        zero = MatrixView.zeros(2, 2)
        self.assertAlmostEqual(rel_frobenius_error(small, zero), 2e-3)

    def test_relative_error_of_one_perturbed_entry(self):
        C_ref = MatrixView.from_array(np.array([[3.0, 4.0]]))
        C_test = MatrixView.from_array(np.array([[3.0, 4.0000005]]))
        self.assertAlmostEqual(rel_frobenius_error(C_test, C_ref), 1e-7, delta=1e-15)
        self.assertEqual(rel_frobenius_error(MatrixView.zeros(1, 2), MatrixView.zeros(1, 2)), 0.0)
