import math

import numpy as np
import pytest

import halfheat as hh
from halfheat.hermite import BasisSpec, psi_hat_eval, psi_scaled_eval
from halfheat.spectral import (
    GridSpec,
    HalfPlaneField,
    PhysicalField,
    SpectralField,
    boundary_trace,
    field_section,
    l2_norm,
    odd_extend,
    propagate_free,
    read_field,
    restrict_half,
    sample_field,
    smoothing_derivative_bound_check,
    transform_forward,
    transform_inverse,
    write_field,
)
from halfheat.simulation import (
    benchmark_free_end_state,
    benchmark_initial_state,
)


@pytest.fixture(scope="module")
def grid():
    return GridSpec(40.0, 40.0, 256, 256)


def smooth_random_field(grid, seed=7):
    """A few random Gaussian bumps; smooth, decaying, deterministic."""
    rng = np.random.default_rng(seed)
    X1, X2 = np.meshgrid(grid.x1(), grid.x2(), indexing="ij")
    values = np.zeros_like(X1)
    for _ in range(5):
        c1, c2 = rng.uniform(-5, 5, size=2)
        amp = rng.uniform(-1, 1)
        width = rng.uniform(2.0, 6.0)
        values += amp * np.exp(-((X1 - c1) ** 2 + (X2 - c2) ** 2) / width)
    return PhysicalField(grid, values, 0.0)


class TestGridSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(40.0, 40.0, 100, 128)
        with pytest.raises(ValueError):
            GridSpec(40.0, 40.0, 8, 128)
        with pytest.raises(ValueError):
            GridSpec(-1.0, 40.0, 128, 128)

    def test_cell_centering(self, grid):
        x1 = grid.x1()
        assert x1[0] == pytest.approx(-40.0 + grid.h1 / 2)
        # no sample sits exactly on the boundary line x1 = 0
        assert np.min(np.abs(x1)) == pytest.approx(grid.h1 / 2)
        assert np.max(np.abs(x1 + x1[::-1])) == 0.0

    def test_field_shape_guard(self, grid):
        with pytest.raises(ValueError):
            PhysicalField(grid, np.zeros((3, 3)))
        with pytest.raises(ValueError):
            PhysicalField(grid, np.full((grid.n1, grid.n2), np.nan))


class TestTransforms:
    def test_round_trip(self, grid):
        field = smooth_random_field(grid)
        back = transform_inverse(transform_forward(field))
        scale = np.max(np.abs(field.values))
        assert np.max(np.abs(back.values - field.values)) < 1e-12 * scale

    def test_parseval(self, grid):
        field = smooth_random_field(grid, seed=11)
        spec = transform_forward(field)
        assert l2_norm(spec) == pytest.approx(l2_norm(field), rel=1e-10)

    def test_gaussian_fixed_point(self, grid):
        field = sample_field(grid, lambda a, b: np.exp(-(a**2 + b**2) / 2.0))
        spec = transform_forward(field)
        s1, s2 = grid.sigma1(), grid.sigma2()
        expected = np.exp(-(s1[:, None] ** 2 + s2[None, :] ** 2) / 2.0)
        assert np.max(np.abs(spec.values - expected)) < 1e-12

    def test_odd_field_transform_structure(self, grid):
        # transforms of real odd-in-x1 fields are purely imaginary and odd
        # in sigma1, within rounding
        field = sample_field(grid, lambda a, b: a * np.exp(-(a**2 + b**2) / 7.0))
        spec = transform_forward(field)
        scale = np.max(np.abs(spec.values))
        assert np.max(np.abs(spec.values.real)) < 1e-13 * scale
        # sigma1 -> -sigma1 in FFT order: index k maps to (n1 - k) mod n1
        idx = (-np.arange(grid.n1)) % grid.n1
        assert np.max(np.abs(spec.values[idx, :] + spec.values)) < 1e-13 * scale

    def test_tensor_basis_transform(self, grid):
        s1 = BasisSpec(alpha=2.0, max_index=5)
        s2 = BasisSpec(alpha=6.0, max_index=5)
        field = sample_field(
            grid,
            lambda a, b: psi_scaled_eval(s1, 3, a) * psi_scaled_eval(s2, 2, b),
        )
        spec = transform_forward(field)
        sig1, sig2 = grid.sigma1(), grid.sigma2()
        expected = np.outer(psi_hat_eval(s1, 3, sig1), psi_hat_eval(s2, 2, sig2))
        assert np.max(np.abs(spec.values - expected)) < 1e-10


class TestPropagation:
    def test_zero_time_is_identity(self, grid):
        spec = transform_forward(smooth_random_field(grid))
        out = propagate_free(spec, 0.0)
        assert np.array_equal(out.values, spec.values)
        assert out.time_tag == 0.0

    def test_negative_time_rejected(self, grid):
        spec = transform_forward(smooth_random_field(grid))
        with pytest.raises(ValueError):
            propagate_free(spec, -0.5)

    def test_norm_non_increasing(self, grid):
        spec = transform_forward(smooth_random_field(grid, seed=3))
        norms = [l2_norm(propagate_free(spec, t)) for t in (0.0, 0.5, 1.0, 1.5, 2.0)]
        for a, b in zip(norms, norms[1:]):
            assert b <= a * (1 + 1e-12)

    def test_benchmark_free_evolution_closed_form(self):
        # The benchmark initial state evolves to an explicitly known Gaussian
        # moment at t = T; the spectral evolution must reproduce it pointwise.
        T = 2.0
        grid = GridSpec.default()
        initial = sample_field(grid, lambda a, b: benchmark_initial_state(a, b, T))
        evolved = transform_inverse(propagate_free(transform_forward(initial), T))
        expected = sample_field(grid, lambda a, b: benchmark_free_end_state(a, b, T), T)
        assert np.max(np.abs(evolved.values - expected.values)) < 1e-12

    def test_odd_symmetry_preserved(self, grid):
        field = sample_field(grid, lambda a, b: a * np.exp(-(a**2 + b**2) / 6.0))
        evolved = transform_inverse(propagate_free(transform_forward(field), 1.0))
        flipped = evolved.values[::-1, :]
        assert np.max(np.abs(evolved.values + flipped)) < 1e-12


class TestNorms:
    def test_zero_field(self, grid):
        assert l2_norm(PhysicalField(grid, np.zeros((grid.n1, grid.n2)))) == 0.0

    def test_basis_normalization(self):
        grid = GridSpec.default()
        s1 = BasisSpec(alpha=2.0, max_index=3)
        s2 = BasisSpec(alpha=6.0, max_index=3)
        field = sample_field(
            grid, lambda a, b: psi_scaled_eval(s1, 1, a) * psi_scaled_eval(s2, 0, b)
        )
        assert l2_norm(field) == pytest.approx(1.0, abs=1e-6)


class TestOddExtension:
    def test_zero(self, grid):
        half = HalfPlaneField(grid, np.zeros((grid.n1 // 2, grid.n2)))
        assert np.all(odd_extend(half).values == 0.0)

    def test_smooth_odd_moment(self, grid):
        def func(a, b):
            return a * np.exp(-(a**2 + b**2))

        full = sample_field(grid, func)
        half = restrict_half(full)
        extended = odd_extend(half)
        assert np.max(np.abs(extended.values - full.values)) == 0.0

    def test_benchmark_initial_state(self):
        # Restricting the benchmark initial state to x1 > 0 and extending
        # recovers the global formula, which is odd in x1.
        T = 2.0
        grid = GridSpec.default()
        full = sample_field(grid, lambda a, b: benchmark_initial_state(a, b, T))
        extended = odd_extend(restrict_half(full))
        assert np.max(np.abs(extended.values - full.values)) == 0.0

    def test_antisymmetry_on_sample_pairs(self, grid):
        half = HalfPlaneField(
            grid, np.exp(-np.linspace(0, 4, grid.n1 // 2))[:, None] * np.ones((1, grid.n2))
        )
        ext = odd_extend(half).values
        assert np.max(np.abs(ext + ext[::-1, :])) == 0.0

    def test_bad_trace_rejected(self, grid):
        half = HalfPlaneField(grid, np.zeros((grid.n1 // 2, grid.n2)))
        with pytest.raises(ValueError):
            odd_extend(half, boundary_trace=np.full(grid.n2, np.inf))


class TestBoundaryTrace:
    def test_zero_field(self, grid):
        field = PhysicalField(grid, np.zeros((grid.n1, grid.n2)))
        assert np.all(boundary_trace(field, grid.h1) == 0.0)

    def test_epsilon_guards(self, grid):
        field = PhysicalField(grid, np.zeros((grid.n1, grid.n2)))
        with pytest.raises(ValueError):
            boundary_trace(field, grid.h1 / 4)
        with pytest.raises(ValueError):
            boundary_trace(field, 41.0)

    def test_free_evolution_trace_vanishes_first_order(self):
        # Odd data evolving freely has zero boundary values; the interpolated
        # trace decays linearly in the offset.
        T = 2.0
        grid = GridSpec.default()
        initial = sample_field(grid, lambda a, b: benchmark_initial_state(a, b, T))
        evolved = transform_inverse(propagate_free(transform_forward(initial), 1.0))
        h = grid.h1
        errs = [
            float(np.sqrt(np.sum(boundary_trace(evolved, k * h) ** 2) * grid.h2))
            for k in (4, 2, 1)
        ]
        assert errs[0] > errs[1] > errs[2]
        assert errs[0] / errs[2] == pytest.approx(4.0, rel=0.05)


class TestSmoothingBound:
    def test_zero_initial(self, grid):
        field = PhysicalField(grid, np.zeros((grid.n1, grid.n2)))
        lhs, rhs = smoothing_derivative_bound_check(field, 1.0, (0, 0))
        assert lhs == 0.0 and rhs == 0.0

    def test_zero_order(self, grid):
        field = smooth_random_field(grid, seed=5)
        lhs, rhs = smoothing_derivative_bound_check(field, 1.0, (0, 0))
        assert lhs <= l2_norm(field) * (1 + 1e-12)
        assert rhs == pytest.approx(
            math.e * (1.0 / (2.0 * math.e)) ** 0.5 * l2_norm(field), rel=1e-12
        )
        assert lhs <= rhs

    def test_first_derivative_benchmark(self):
        T = 2.0
        grid = GridSpec.default()
        initial = sample_field(grid, lambda a, b: benchmark_initial_state(a, b, T))
        lhs, rhs = smoothing_derivative_bound_check(initial, T, (1, 0))
        assert lhs <= rhs

    def test_time_guard(self, grid):
        field = smooth_random_field(grid)
        with pytest.raises(ValueError):
            smoothing_derivative_bound_check(field, 0.0, (0, 0))


class TestSections:
    def test_interpolation(self, grid):
        field = sample_field(grid, lambda a, b: a + 2.0 * b)
        coords, values = field_section(field, x2=-3.0)
        assert np.allclose(values, coords - 6.0, atol=1e-12)
        coords2, values2 = field_section(field, x1=2.2)
        assert np.allclose(values2, 2.2 + 2.0 * coords2, atol=1e-12)

    def test_requires_one_coordinate(self, grid):
        field = sample_field(grid, lambda a, b: a * b)
        with pytest.raises(ValueError):
            field_section(field)
        with pytest.raises(ValueError):
            field_section(field, x1=1.0, x2=1.0)


class TestSerialization:
    def test_full_field_round_trip(self, tmp_path, grid):
        field = smooth_random_field(grid, seed=13)
        path = tmp_path / "field.csv"
        write_field(field, path)
        loaded = read_field(path)
        # 17 significant digits round-trip doubles exactly
        assert np.array_equal(loaded.values, field.values)
        assert loaded.grid == field.grid
        assert loaded.time_tag == field.time_tag

    def test_half_field_round_trip(self, tmp_path, grid):
        full = sample_field(grid, lambda a, b: a * np.exp(-(a**2 + b**2) / 8.0))
        half = restrict_half(full)
        path = tmp_path / "half.csv"
        write_field(half, path)
        loaded = read_field(path)
        assert isinstance(loaded, HalfPlaneField)
        assert np.array_equal(loaded.values, half.values)

    def test_manifest_contents(self, tmp_path, grid):
        import json

        field = smooth_random_field(grid, seed=1)
        path = tmp_path / "field.csv"
        write_field(field, path)
        manifest = json.loads(path.with_suffix(".json").read_text())
        assert manifest["kind"] == "physical"
        assert manifest["norm"] == pytest.approx(l2_norm(field), rel=1e-15)
        header = path.read_text().splitlines()[0]
        assert header == "x1,x2,value"
