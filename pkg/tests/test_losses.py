"""Loss kernels: values, derivatives, empirical risk, batch sums."""

import math

import numpy as np
import pytest

from divbayes.losses import (
    DivergenceSpec,
    EmptySampleError,
    empirical_risk,
    loss_sum,
    q_derivs,
    q_value,
)
from divbayes.model import Theta, log_density, power_integral
from divbayes.verify import fd_gradient, fd_hessian, fd_third

STD = Theta(0.0, 1.0)

# values computed by composing the independently verified pieces:
# f(0) = 1/sqrt(2 pi), int f^2 = 1/(2 sqrt(pi))
F0 = 1.0 / math.sqrt(2.0 * math.pi)
INT_F2 = 1.0 / (2.0 * math.sqrt(math.pi))


class TestDivergenceSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            DivergenceSpec("gamma", -0.5)
        with pytest.raises(ValueError):
            DivergenceSpec("alpha", 0.0)
        with pytest.raises(ValueError):
            DivergenceSpec("kl", 0.3)
        with pytest.raises(ValueError):
            DivergenceSpec("hellinger", 0.5)

    def test_labels(self):
        assert str(DivergenceSpec.kl()) == "kl"
        assert str(DivergenceSpec.gamma_divergence(0.5)) == "gamma:0.5"
        assert DivergenceSpec.density_power(0.3).tuning == 0.3
        assert DivergenceSpec.kl().tuning == 0.0


class TestQValue:
    def test_kl_is_log_density(self):
        for x in (-2.0, 0.0, 1.5):
            assert q_value(DivergenceSpec.kl(), x, STD) == log_density(x, STD)

    def test_gamma_one_at_zero(self):
        want = F0 / math.sqrt(INT_F2)
        got = q_value(DivergenceSpec.gamma_divergence(1.0), 0.0, STD)
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(0.7511255, abs=5e-8)

    def test_density_power_one_at_zero(self):
        want = F0 - INT_F2 / 2.0
        got = q_value(DivergenceSpec.density_power(1.0), 0.0, STD)
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(0.2578949, abs=5e-8)

    @pytest.mark.parametrize("make", [DivergenceSpec.density_power, DivergenceSpec.gamma_divergence])
    def test_small_tuning_approaches_log_density_differences(self, make):
        # q converges to log f up to a theta-only constant, so compare differences
        div = make(1e-4)
        theta = Theta(0.3, 1.2)
        x1, x2 = 0.9, -0.8
        got = q_value(div, x1, theta) - q_value(div, x2, theta)
        want = log_density(x1, theta) - log_density(x2, theta)
        assert got == pytest.approx(want, abs=1e-3)

    @pytest.mark.parametrize(
        "div",
        [DivergenceSpec.gamma_divergence(0.5), DivergenceSpec.density_power(0.5)],
    )
    def test_bounded_far_in_the_tail(self, div):
        theta = Theta(0.0, 1.0)
        far = q_value(div, 50.0, theta)
        assert np.isfinite(far)
        assert abs(far) < abs(q_value(div, 0.0, theta)) + 1.0
        # the KL kernel blows up at the same point
        assert q_value(DivergenceSpec.kl(), 50.0, theta) < -1000.0


class TestQDerivs:
    def test_kl_equals_log_derivs(self):
        from divbayes.model import log_derivs

        d = q_derivs(DivergenceSpec.kl(), 0.7, STD)
        ld = log_derivs(0.7, STD)
        assert np.array_equal(d.grad, ld.grad)
        assert np.array_equal(d.hess, ld.hess)
        assert np.array_equal(d.third, ld.third)

    def test_gamma_mu_gradient_zero_at_center(self):
        d = q_derivs(DivergenceSpec.gamma_divergence(0.5), 0.0, STD)
        assert abs(d.grad[0]) < 1e-14

    @pytest.mark.parametrize(
        "div",
        [
            DivergenceSpec.kl(),
            DivergenceSpec.density_power(0.5),
            DivergenceSpec.gamma_divergence(0.5),
        ],
    )
    def test_finite_differences_at_spec_point(self, div):
        theta = Theta(-0.1, 0.8)
        x = 0.3
        d = q_derivs(div, x, theta)
        for got, ref in [
            (d.grad, fd_gradient(div, x, theta)),
            (d.hess, fd_hessian(div, x, theta)),
            (d.third, fd_third(div, x, theta)),
        ]:
            scale = np.max(np.abs(ref))
            assert np.all(np.abs(got - ref) <= 1e-5 * np.maximum(np.abs(ref), 1e-3 * scale))

    def test_tensor_symmetry(self):
        d = q_derivs(DivergenceSpec.gamma_divergence(0.7), 1.3, Theta(0.2, 1.1))
        assert d.hess[0, 1] == d.hess[1, 0]
        for p in [(0, 0, 1), (0, 1, 0), (1, 0, 0)]:
            assert d.third[p] == d.third[(0, 0, 1)]

    def test_vectorized_matches_scalar(self):
        div = DivergenceSpec.gamma_divergence(0.4)
        xs = np.array([-1.0, 0.2, 2.5])
        batch = q_derivs(div, xs, STD)
        for idx, x in enumerate(xs):
            single = q_derivs(div, float(x), STD)
            assert batch.grad[:, idx] == pytest.approx(single.grad)
            assert batch.third[..., idx] == pytest.approx(single.third)


class TestEmpiricalRisk:
    def test_kl_is_negative_mean_loglik(self):
        x = np.array([0.1, -0.4, 2.0])
        want = -float(np.mean([log_density(v, STD) for v in x]))
        assert empirical_risk(DivergenceSpec.kl(), x, STD) == pytest.approx(want, rel=1e-14)

    def test_duplication_invariance(self):
        for div in (DivergenceSpec.kl(), DivergenceSpec.gamma_divergence(0.3)):
            single = empirical_risk(div, [0.7], STD)
            repeated = empirical_risk(div, [0.7, 0.7, 0.7], STD)
            assert single == pytest.approx(repeated, rel=1e-14)

    def test_gamma_single_point_value(self):
        got = empirical_risk(DivergenceSpec.gamma_divergence(1.0), [0.0], STD)
        assert got == pytest.approx(-0.7511255, abs=5e-8)

    def test_empty_sample_rejected(self):
        with pytest.raises(EmptySampleError):
            empirical_risk(DivergenceSpec.kl(), [], STD)


class TestLossSum:
    @pytest.mark.parametrize(
        "div",
        [
            DivergenceSpec.kl(),
            DivergenceSpec.density_power(0.7),
            DivergenceSpec.gamma_divergence(0.5),
        ],
    )
    def test_matches_direct_sum(self, div):
        rng = np.random.default_rng(3)
        x = rng.normal(size=37)
        mus = np.array([-0.5, 0.0, 1.2])
        sigmas = np.array([0.8, 1.0, 2.5])
        direct = np.array(
            [float(np.sum(q_value(div, x, Theta(m, s)))) for m, s in zip(mus, sigmas)]
        )
        batch = loss_sum(div, x, mus, sigmas)
        assert batch == pytest.approx(direct, rel=1e-12)

    def test_chunking_is_invisible(self):
        div = DivergenceSpec.gamma_divergence(1.0)
        rng = np.random.default_rng(4)
        x = rng.normal(size=101)
        mus = rng.normal(size=1000)
        sigmas = rng.uniform(0.5, 2.0, 1000)
        a = loss_sum(div, x, mus, sigmas, chunk=16)
        b = loss_sum(div, x, mus, sigmas, chunk=4096)
        assert np.array_equal(a, b)

    def test_empty_sample_rejected(self):
        with pytest.raises(EmptySampleError):
            loss_sum(DivergenceSpec.kl(), [], np.array([0.0]), np.array([1.0]))


class TestFisherConsistency:
    """The population estimating equation is zero at the data-generating theta."""

    @pytest.mark.parametrize(
        "div",
        [
            DivergenceSpec.kl(),
            DivergenceSpec.density_power(0.5),
            DivergenceSpec.gamma_divergence(0.5),
            DivergenceSpec.gamma_divergence(1.0),
        ],
    )
    @pytest.mark.parametrize("theta", [Theta(0.0, 1.0), Theta(1.0, 2.0)])
    def test_zero_gradient_expectation(self, div, theta):
        from divbayes._quadrature import integrate_vector
        from divbayes.model import density

        q_derivs(div, theta.mu, theta)  # warm moment cache
        half = 12.0 * theta.sigma
        value = integrate_vector(
            lambda x: float(density(x, theta)) * q_derivs(div, x, theta).grad,
            theta.mu - half,
            theta.mu + half,
            points=[theta.mu],
            abs_tol=1e-10,
        )
        assert np.max(np.abs(value)) < 1e-8
