import math

import numpy as np
import pytest

from belpm.errors import ArgumentError, UnsupportedKernelError
from belpm.kernels import (
    EPSILON,
    Kernel,
    check_kernel_properties,
    evaluate,
    grad_b,
    weights,
)


class TestEvaluate:
    def test_gaussian_at_zero(self):
        assert evaluate(Kernel("gaussian"), 0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi))

    def test_exponential_closed_form(self):
        assert evaluate(Kernel("exponential"), 0.5, b=2.0) == pytest.approx(math.exp(-1.0))

    def test_rank_over_context(self):
        k = Kernel("rank")
        ctx = [1.0, 2.0, 3.0]
        assert evaluate(k, 1.0, context=ctx) == pytest.approx(1.0)
        assert evaluate(k, 2.0, context=ctx) == pytest.approx(2.0 / 3.0)
        assert evaluate(k, 3.0, context=ctx) == pytest.approx(1.0 / 3.0)

    def test_rational_closed_form(self):
        assert evaluate(Kernel("rational", z=1.0), 1.0, b=1.0) == pytest.approx(0.5)
        assert evaluate(Kernel("rational", z=2.0), 1.0, b=1.0) == pytest.approx(0.25)

    def test_inversion_guard(self):
        k = Kernel("inversion")
        assert evaluate(k, 2.0) == pytest.approx(0.5)
        assert evaluate(k, 0.0) == pytest.approx(1.0 / EPSILON)

    def test_rank_requires_context(self):
        with pytest.raises(ArgumentError):
            evaluate(Kernel("rank"), 1.0)

    def test_rank_degenerate_context_is_uniform(self):
        assert evaluate(Kernel("rank"), 0.0, context=[0.0, 0.0]) == 1.0
        ctx = [2.0, 2.0, 2.0]
        assert evaluate(Kernel("rank"), 2.0, context=ctx) == pytest.approx(1.0)

    def test_negative_distance_rejected(self):
        with pytest.raises(ArgumentError):
            evaluate(Kernel("exponential"), -0.1, b=1.0)

    def test_exponential_b_zero_is_uniform(self):
        k = Kernel("exponential")
        for d in [0.0, 0.5, 3.0, 100.0]:
            assert evaluate(k, d, b=0.0) == 1.0


class TestGradB:
    def test_exponential_at_zero_distance(self):
        assert grad_b(Kernel("exponential"), 0.0, 1.7) == 0.0

    def test_exponential_closed_form(self):
        assert grad_b(Kernel("exponential"), 1.0, 0.0) == pytest.approx(-1.0)

    def test_rational_closed_form(self):
        assert grad_b(Kernel("rational", z=1.0), 1.0, 1.0) == pytest.approx(-0.5)

    def test_nonparametric_kinds_rejected(self):
        for kind in ("gaussian", "inversion", "rank"):
            with pytest.raises(UnsupportedKernelError):
                grad_b(Kernel(kind), 1.0, 1.0)

    @pytest.mark.parametrize("kind", ["exponential", "rational"])
    def test_matches_central_differences(self, kind):
        kernel = Kernel(kind, z=1.3) if kind == "rational" else Kernel(kind)
        delta = 1e-6
        for d in np.linspace(0.0, 5.0, 11):
            for b in np.geomspace(0.01, 10.0, 9):
                analytic = grad_b(kernel, d, b)
                fd = (evaluate(kernel, d, b + delta) - evaluate(kernel, d, b - delta)) / (2 * delta)
                assert abs(analytic - fd) <= 1e-5 * max(abs(fd), 1e-12), (kind, d, b)


class TestWeightsVectorized:
    def test_matches_scalar_evaluate(self, rng):
        d = rng.uniform(0, 3, size=7)
        b = rng.uniform(0.1, 2, size=7)
        k = Kernel("exponential")
        np.testing.assert_allclose(
            weights(k, d, b), [evaluate(k, di, bi) for di, bi in zip(d, b)])

    def test_rank_rowwise_context(self):
        d = np.array([[1.0, 2.0, 3.0], [2.0, 2.0, 4.0]])
        w = weights(Kernel("rank"), d)
        np.testing.assert_allclose(w[0], [1.0, 2.0 / 3.0, 1.0 / 3.0])
        np.testing.assert_allclose(w[1], [1.0, 1.0, 0.5])

    def test_rank_weights_bounds(self, rng):
        d = np.sort(rng.uniform(0.1, 5.0, size=9))
        w = weights(Kernel("rank"), d)
        assert w[0] == pytest.approx(1.0)  # nearest gets exactly 1
        assert np.all(w >= d.min() / d.max() - 1e-12)
        assert np.all(w <= 1.0 + 1e-12)


class TestProperties:
    def test_exponential_passes(self):
        report = check_kernel_properties(Kernel("exponential"), 1.0, [0, 1, 2, 4])
        assert report.passed and not report.failures()

    def test_rational_passes(self):
        report = check_kernel_properties(Kernel("rational", z=1.0), 2.0, [0, 0.5, 1])
        assert report.passed

    def test_all_kinds_nonnegative_max_at_zero(self):
        grid = np.linspace(0, 6, 13)
        for kind in ("gaussian", "inversion", "rank", "exponential", "rational"):
            report = check_kernel_properties(Kernel(kind), 0.7, grid)
            names = dict((name, ok) for name, ok, _ in report.checks)
            assert names["non-negative on grid"], kind
            assert names["maximum at 0"], kind

    def test_broken_kernel_fails_max_at_zero(self):
        def increasing(d):
            return d

        report = check_kernel_properties(increasing, 1.0, [0, 1, 2])
        assert not report.passed
        assert "maximum at 0" in report.failures()

    def test_empty_grid_rejected(self):
        with pytest.raises(ArgumentError):
            check_kernel_properties(Kernel("exponential"), 1.0, [])


class TestKernelValidation:
    def test_unknown_kind(self):
        with pytest.raises(ArgumentError):
            Kernel("triangle")

    def test_nonpositive_z(self):
        with pytest.raises(ArgumentError):
            Kernel("rational", z=0.0)

    def test_parametric_flag(self):
        assert Kernel("exponential").is_parametric
        assert Kernel("rational").is_parametric
        assert not Kernel("gaussian").is_parametric
        assert not Kernel("rank").is_parametric
        assert not Kernel("inversion").is_parametric
