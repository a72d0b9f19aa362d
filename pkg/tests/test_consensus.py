import numpy as np
import numpy.testing as npt
import pytest

from logsplit.bspline import KnotSequence, basis_matrix
from logsplit.consensus import (
    CompositeInterpolant,
    InterpolationGrid,
    ProductEstimator,
    build_interpolant,
    choose_dx,
    integrate_interpolant,
    interpolant_eval,
    lagrange_basis,
    negative_lobe_mass,
    normalized_eval,
    product_eval,
)
from logsplit.errors import DegreeTooHigh, GridTooCoarse, SupportMismatch
from logsplit.logspline import (
    LogsplineFit,
    LogsplineModel,
    SampleSet,
    density_eval,
    fit,
    log_normalizer,
)


def flat_fit(support=(0.0, 1.0), intervals=4, order=4):
    model = LogsplineModel(KnotSequence.uniform(support, intervals, order))
    y = np.zeros(model.dimension)
    return LogsplineFit(model, y, log_normalizer(model, y), 1, True)


def shaped_fit(support=(0.0, 1.0), intervals=4, order=4, scale=0.8, seed=0):
    model = LogsplineModel(KnotSequence.uniform(support, intervals, order))
    rng = np.random.default_rng(seed)
    y = rng.normal(scale=scale, size=model.dimension)
    y -= y.mean()
    return LogsplineFit(model, y, log_normalizer(model, y), 1, True)


class TestProductEval:
    def test_single_fit_reduces_to_density(self):
        f = shaped_fit(seed=3)
        pe = ProductEstimator((f,))
        grid = np.linspace(0, 1, 57)
        npt.assert_array_equal(product_eval(pe, grid), density_eval(f, grid))

    def test_three_uniform_fits_give_one(self):
        pe = ProductEstimator(tuple(flat_fit() for _ in range(3)))
        grid = np.linspace(0, 1, 11)
        npt.assert_allclose(product_eval(pe, grid), 1.0, atol=1e-12)

    def test_zero_outside_support(self):
        pe = ProductEstimator((flat_fit(), flat_fit()))
        assert product_eval(pe, -0.2) == 0.0
        assert product_eval(pe, 1.3) == 0.0

    def test_mismatched_supports_rejected(self):
        with pytest.raises(SupportMismatch):
            ProductEstimator((flat_fit((0.0, 1.0)), flat_fit((0.0, 2.0))))

    def test_log_space_product_avoids_underflow(self):
        # five factors just above 1e-300^(1/5) each; the product stays positive
        support = (0.0, 1.0)
        model = LogsplineModel(KnotSequence.uniform(support, 4, 4))
        slope = np.linspace(65.0, -65.0, model.dimension)
        slope -= slope.mean()
        f = LogsplineFit(model, slope, log_normalizer(model, slope), 1, True)
        pe = ProductEstimator(tuple(f for _ in range(5)))
        factor = density_eval(f, 0.999)
        assert 1e-300 ** (1 / 5) < factor < 1e-50
        value = product_eval(pe, 0.999)
        assert value > 0.0


class TestLagrangeBasis:
    def test_cardinal_property(self):
        grid = InterpolationGrid((0.0, 1.0), degree=3, num_pieces=4)
        for piece in (0, 2):
            xs = grid.nodes[piece * 3 : piece * 3 + 4]
            for tau in range(4):
                assert lagrange_basis(grid, piece, tau, float(xs[tau])) == 1.0
                for j in range(4):
                    if j != tau:
                        assert lagrange_basis(grid, piece, tau, float(xs[j])) == 0.0

    def test_partition_of_unity_within_piece(self):
        grid = InterpolationGrid((0.0, 2.0), degree=2, num_pieces=3)
        xs = np.linspace(grid.piece_edges[1], grid.piece_edges[2], 19)
        total = sum(lagrange_basis(grid, 1, tau, xs) for tau in range(3))
        npt.assert_allclose(total, 1.0, atol=1e-12)

    def test_out_of_range_indices(self):
        grid = InterpolationGrid((0.0, 1.0), degree=2, num_pieces=3)
        with pytest.raises(IndexError):
            lagrange_basis(grid, 3, 0, 0.5)
        with pytest.raises(IndexError):
            lagrange_basis(grid, 0, 3, 0.5)


class TestBuildInterpolant:
    def test_reproduces_node_values_exactly(self):
        fits = tuple(shaped_fit(seed=s) for s in range(3))
        pe = ProductEstimator(fits)
        grid = InterpolationGrid((0.0, 1.0), degree=1, num_pieces=40)
        ci = build_interpolant(pe, grid)
        values = interpolant_eval(ci, grid.nodes)
        npt.assert_array_equal(values, ci.node_values)

    def test_constant_product_reproduced_everywhere(self):
        pe = ProductEstimator(tuple(flat_fit() for _ in range(2)))
        grid = InterpolationGrid((0.0, 1.0), degree=1, num_pieces=7)
        ci = build_interpolant(pe, grid)
        xs = np.linspace(0, 1, 333)
        npt.assert_allclose(interpolant_eval(ci, xs), 1.0, atol=1e-12)

    def test_degree_above_order_minus_three_rejected(self):
        pe = ProductEstimator((flat_fit(order=4),))
        grid = InterpolationGrid((0.0, 1.0), degree=2, num_pieces=5)
        with pytest.raises(DegreeTooHigh):
            build_interpolant(pe, grid)

    def test_zero_outside_support(self):
        pe = ProductEstimator((flat_fit(),))
        ci = build_interpolant(pe, InterpolationGrid((0.0, 1.0), 1, 5))
        assert interpolant_eval(ci, -0.5) == 0.0
        assert interpolant_eval(ci, 1.5) == 0.0

    def test_polynomial_of_matching_degree_reproduced(self):
        # the interpolant is the unique polynomial through the nodes
        for degree in (1, 2, 3):
            grid = InterpolationGrid((0.0, 1.0), degree, num_pieces=6)
            coeffs = np.arange(degree + 1, dtype=float) + 0.5

            def poly(x):
                return sum(c * x**p for p, c in enumerate(coeffs))

            ci = CompositeInterpolant.from_callable(poly, grid)
            xs = np.linspace(0, 1, 457)
            npt.assert_allclose(interpolant_eval(ci, xs), poly(xs), atol=1e-12)

    def test_interpolation_error_bound_on_fitted_product(self):
        # max error <= sup|second derivative| * dx^2 / 8 for degree 1
        rng = np.random.default_rng(5)
        model = LogsplineModel(KnotSequence.uniform((0.0, 1.0), 4, 4))
        fits = []
        for _ in range(3):
            samples = SampleSet(rng.normal(0.5, 0.2, 2000).clip(0, 1), (0.0, 1.0))
            fits.append(fit(model, samples))
        pe = ProductEstimator(tuple(fits))
        grid = InterpolationGrid((0.0, 1.0), degree=1, num_pieces=50)
        ci = build_interpolant(pe, grid)
        dense = np.linspace(0, 1, 20001)
        exact = product_eval(pe, dense)
        err = np.abs(interpolant_eval(ci, dense) - exact).max()
        step = dense[1] - dense[0]
        second = np.abs(np.diff(exact, 2) / step**2).max()
        assert err <= second * grid.dx**2 / 8 * 1.001

    def test_convergence_order_under_dx_halving(self):
        rng = np.random.default_rng(6)
        model = LogsplineModel(KnotSequence.uniform((0.0, 1.0), 4, 4))
        draws = rng.normal(0.4, 0.25, 4000)
        draws = draws[(draws > 0) & (draws < 1)]
        samples = SampleSet(draws, (0.0, 1.0))
        pe = ProductEstimator((fit(model, samples),))
        dense = np.linspace(0, 1, 30001)
        exact = product_eval(pe, dense)
        errors = []
        for pieces in (10, 20, 40, 80):
            ci = build_interpolant(pe, InterpolationGrid((0.0, 1.0), 1, pieces))
            errors.append(np.abs(interpolant_eval(ci, dense) - exact).max())
        rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert rates.mean() >= 2.0 - 0.2


class TestIntegration:
    def test_constant_interpolant_integral(self):
        grid = InterpolationGrid((-1.0, 3.0), degree=2, num_pieces=5)
        ci = CompositeInterpolant.from_callable(lambda x: np.full_like(x, 2.5), grid)
        assert integrate_interpolant(ci) == pytest.approx(2.5 * 4.0, abs=1e-12)

    def test_single_uniform_fit_integrates_to_one(self):
        pe = ProductEstimator((flat_fit(),))
        ci = build_interpolant(pe, InterpolationGrid((0.0, 1.0), 1, 9))
        assert integrate_interpolant(ci) == pytest.approx(1.0, abs=1e-12)
        assert ci.lambda_tilde == integrate_interpolant(ci)

    def test_matches_dense_trapezoid_oracle(self):
        fits = tuple(shaped_fit(seed=s, scale=0.6) for s in (1, 2, 3))
        pe = ProductEstimator(fits)
        ci = build_interpolant(pe, InterpolationGrid((0.0, 1.0), 1, 64))
        dense = np.linspace(0, 1, 1_000_001)
        oracle = np.trapezoid(interpolant_eval(ci, dense), dense)
        assert ci.lambda_tilde == pytest.approx(oracle, rel=1e-8)

    def test_lambda_estimates_close_when_grid_fine(self):
        # |integral of product - integral of interpolant| is bounded by the
        # support length times the max interpolation gap
        fits = tuple(shaped_fit(seed=s, scale=0.7) for s in (4, 5))
        pe = ProductEstimator(fits)
        ci = build_interpolant(pe, InterpolationGrid((0.0, 1.0), 1, 30))
        dense = np.linspace(0, 1, 200_001)
        exact_vals = product_eval(pe, dense)
        lam_hat = np.trapezoid(exact_vals, dense)
        gap = np.abs(exact_vals - interpolant_eval(ci, dense)).max()
        assert abs(lam_hat - ci.lambda_tilde) <= 1.0 * gap


class TestNormalizedEval:
    def test_normalized_integral_is_one(self):
        fits = tuple(shaped_fit(seed=s, scale=0.9) for s in (7, 8, 9))
        pe = ProductEstimator(fits)
        ci = build_interpolant(pe, InterpolationGrid((0.0, 1.0), 1, 50))
        dense = np.linspace(0, 1, 400_001)
        integral = np.trapezoid(normalized_eval(ci, dense), dense)
        assert integral == pytest.approx(1.0, abs=1e-10)

    def test_single_uniform_fit_gives_uniform_density(self):
        pe = ProductEstimator((flat_fit(support=(0.0, 2.0)),))
        ci = build_interpolant(pe, InterpolationGrid((0.0, 2.0), 1, 8))
        xs = np.linspace(0, 2, 21)
        npt.assert_allclose(normalized_eval(ci, xs), 0.5, atol=1e-12)

    def test_overshoot_preserved_not_clipped(self):
        # quadratic pieces over a sharp bump overshoot below zero
        grid = InterpolationGrid((0.0, 1.0), degree=2, num_pieces=4)

        def spike(x):
            return np.exp(-((x - 0.5) ** 2) / 0.001)

        ci = CompositeInterpolant.from_callable(spike, grid)
        xs = np.linspace(0, 1, 2001)
        vals = interpolant_eval(ci, xs)
        assert vals.min() < 0
        norm = normalized_eval(ci, xs)
        assert norm.min() < 0
        assert negative_lobe_mass(ci) > 0


class TestChooseDx:
    def test_formula_example(self):
        assert choose_dx(10_000, beta=0.5, l=1, j=1, c=1.0) == pytest.approx(0.01)

    def test_large_degree_limit(self):
        # exponent tends to -beta/(j+1) as the degree grows
        value = choose_dx(10_000, beta=0.5, l=10_000, j=1, c=1.0)
        assert value == pytest.approx(10_000 ** -0.25, rel=1e-3)

    def test_quadrupling_samples_halves_spacing(self):
        d1 = choose_dx(1_000, beta=0.5, l=1, j=1)
        d2 = choose_dx(4_000, beta=0.5, l=1, j=1)
        assert d2 == pytest.approx(d1 / 2)

    def test_rounding_down_to_integer_pieces(self):
        dx = choose_dx(100, beta=0.5, l=1, j=1, support=(0.0, 1.0))
        pieces = 1.0 / dx
        assert pieces == pytest.approx(round(pieces))
        assert dx <= choose_dx(100, beta=0.5, l=1, j=1)

    def test_unusable_spacing_rejected(self):
        with pytest.raises(GridTooCoarse):
            InterpolationGrid.from_node_spacing((0.0, 1.0), 1, float("inf"))
        with pytest.raises(ValueError):
            choose_dx(-5.0, beta=0.5, l=1, j=1)


class TestPieceOwnership:
    def test_left_piece_owns_shared_nodes(self):
        grid = InterpolationGrid((0.0, 1.0), degree=1, num_pieces=4)
        assert grid.piece_index(0.0) == 0
        assert grid.piece_index(0.25) == 0
        assert grid.piece_index(0.5) == 1
        assert grid.piece_index(1.0) == 3

    def test_evaluation_at_shared_nodes_is_exact_either_way(self):
        rng = np.random.default_rng(11)
        grid = InterpolationGrid((0.0, 1.0), degree=2, num_pieces=5)
        values = rng.normal(size=grid.num_nodes) ** 2 + 0.1
        ci = CompositeInterpolant.from_node_values(grid, values)
        npt.assert_array_equal(interpolant_eval(ci, grid.nodes), values)
