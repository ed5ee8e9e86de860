"""Objective priors: closed forms, quadrature consistency, matching residuals."""

import math

import numpy as np
import pytest

from divbayes.losses import DivergenceSpec
from divbayes.model import Theta
from divbayes.priors import (
    PriorSpec,
    density_power_matching_constant,
    log_prior,
    matching_prior_sigma_exponent,
    moment_matching_residual,
    reference_log_prior_quadrature,
    sigma_exponent,
)

G05 = DivergenceSpec.gamma_divergence(0.5)
G10 = DivergenceSpec.gamma_divergence(1.0)


class TestClosedForms:
    @pytest.mark.parametrize("prior", list(PriorSpec))
    @pytest.mark.parametrize("div", [DivergenceSpec.kl(), G05, DivergenceSpec.density_power(0.3)])
    def test_zero_at_unit_sigma(self, prior, div):
        assert log_prior(prior, div, Theta(2.0, 1.0)) == 0.0

    def test_reference_gamma_exponent(self):
        # exponent -3 + 1/(1+gamma) = -2.5 at gamma = 1
        assert log_prior(PriorSpec.REFERENCE, G10, Theta(0.0, 2.0)) == pytest.approx(
            -2.5 * math.log(2.0), rel=1e-14
        )

    def test_matching_gamma_exponent(self):
        # exponent -(gamma+7)/(2(1+gamma)) = -2 at gamma = 1
        assert log_prior(PriorSpec.MOMENT_MATCHING, G10, Theta(0.0, 2.0)) == pytest.approx(
            -2.0 * math.log(2.0), rel=1e-14
        )

    def test_kl_exponents(self):
        assert sigma_exponent(PriorSpec.REFERENCE, DivergenceSpec.kl()) == -2.0
        assert sigma_exponent(PriorSpec.MOMENT_MATCHING, DivergenceSpec.kl()) == -3.5

    def test_density_power_reference_exponent(self):
        assert sigma_exponent(PriorSpec.REFERENCE, DivergenceSpec.density_power(0.4)) == -2.4

    def test_mu_flatness_exact(self):
        for prior in PriorSpec:
            a = log_prior(prior, G05, Theta(-3.0, 1.7))
            b = log_prior(prior, G05, Theta(10.0, 1.7))
            assert a == b

    def test_matching_constant_limit(self):
        # alpha -> 0 recovers the log-likelihood matching exponent -7/2
        assert density_power_matching_constant(0.0) == pytest.approx(-7.0, rel=1e-12)
        assert density_power_matching_constant(1e-6) == pytest.approx(-7.0, abs=1e-5)


class TestReferenceQuadrature:
    def test_gamma_difference_matches_closed_form(self):
        got = reference_log_prior_quadrature(
            G05, Theta(0.0, 2.0), Theta(0.0, 2.0)
        ) - reference_log_prior_quadrature(G05, Theta(0.0, 1.0), Theta(0.0, 1.0))
        want = sigma_exponent(PriorSpec.REFERENCE, G05) * math.log(2.0)
        assert got == pytest.approx(want, abs=1e-6)

    def test_kl_recovers_jeffreys_differences(self):
        kl = DivergenceSpec.kl()
        got = reference_log_prior_quadrature(
            kl, Theta(0.0, 2.0), Theta(0.0, 2.0)
        ) - reference_log_prior_quadrature(kl, Theta(0.0, 1.0), Theta(0.0, 1.0))
        assert got == pytest.approx(-2.0 * math.log(2.0), abs=1e-8)

    def test_kl_clean_absolute_value(self):
        # det J = det diag(1/s^2, 2/s^2) = 2/s^4 under the clean model
        got = reference_log_prior_quadrature(DivergenceSpec.kl(), Theta(0.0, 1.0), Theta(0.0, 1.0))
        assert got == pytest.approx(0.5 * math.log(2.0), abs=1e-9)

    @pytest.mark.parametrize("gamma", [0.3, 0.5, 1.0])
    def test_closed_exponent_over_sigma_grid(self, gamma):
        div = DivergenceSpec.gamma_divergence(gamma)
        e = sigma_exponent(PriorSpec.REFERENCE, div)
        values = {
            s: reference_log_prior_quadrature(div, Theta(0.0, s), Theta(0.0, s))
            for s in (0.5, 1.0, 2.0)
        }
        for s1, s2 in [(0.5, 1.0), (1.0, 2.0), (0.5, 2.0)]:
            got = values[s2] - values[s1]
            assert got == pytest.approx(e * math.log(s2 / s1), abs=1e-6)


class TestMatchingResidual:
    @pytest.mark.parametrize("gamma", [0.3, 0.5, 1.0])
    @pytest.mark.parametrize("theta", [Theta(0.0, 1.0), Theta(1.0, 2.0)])
    def test_closed_form_matching_prior_zeroes_residual(self, gamma, theta):
        div = DivergenceSpec.gamma_divergence(gamma)
        res = moment_matching_residual(
            lambda t: log_prior(PriorSpec.MOMENT_MATCHING, div, t), div, theta, theta
        )
        assert np.max(np.abs(res)) < 1e-5

    def test_uniform_prior_residual_is_curvature_term(self):
        # with a flat prior the residual reduces to (1/2) sum g3 J^{-1};
        # its sigma component is nonzero, its mu component vanishes by symmetry
        res = moment_matching_residual(lambda t: 0.0, G05, Theta(0.0, 1.0), Theta(0.0, 1.0))
        assert abs(res[0]) < 1e-9
        assert abs(res[1]) > 0.1

    def test_sigma_only_prior_keeps_mu_component_zero(self):
        res = moment_matching_residual(
            lambda t: -4.2 * math.log(t.sigma), G05, Theta(0.5, 1.3), Theta(0.5, 1.3)
        )
        assert abs(res[0]) < 1e-9

    def test_wrong_exponent_leaves_residual(self):
        div = G05
        e = sigma_exponent(PriorSpec.MOMENT_MATCHING, div) + 0.05
        res = moment_matching_residual(
            lambda t: e * math.log(t.sigma), div, Theta(0.0, 1.0), Theta(0.0, 1.0)
        )
        assert np.max(np.abs(res)) > 0.01


class TestMatchingExponentODE:
    def test_gamma_one(self):
        got = matching_prior_sigma_exponent(G10)
        assert got == pytest.approx(-2.0, abs=1e-6)

    def test_small_gamma_formula(self):
        g = 1e-4
        got = matching_prior_sigma_exponent(DivergenceSpec.gamma_divergence(g))
        assert got == pytest.approx(-(g + 7.0) / (2.0 * (1.0 + g)), abs=1e-5)

    @pytest.mark.parametrize("gamma", [0.3, 0.5])
    def test_matches_closed_exponent(self, gamma):
        div = DivergenceSpec.gamma_divergence(gamma)
        got = matching_prior_sigma_exponent(div)
        assert got == pytest.approx(sigma_exponent(PriorSpec.MOMENT_MATCHING, div), abs=1e-6)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
    def test_density_power_matches_closed_constant(self, alpha):
        div = DivergenceSpec.density_power(alpha)
        got = matching_prior_sigma_exponent(div)
        assert got == pytest.approx(density_power_matching_constant(alpha) / 2.0, abs=1e-6)

    def test_density_power_frozen_value(self):
        # frozen from the quadrature oracle (independent scratch computation)
        got = matching_prior_sigma_exponent(DivergenceSpec.density_power(0.5))
        assert got == pytest.approx(-2.805556, abs=2e-6)


class TestProportionalityContract:
    def test_only_differences_are_used(self):
        # adding a constant to a log prior must not change the residual
        div = G05
        theta = Theta(0.0, 1.0)
        base = moment_matching_residual(
            lambda t: -2.5 * math.log(t.sigma), div, theta, theta
        )
        shifted = moment_matching_residual(
            lambda t: -2.5 * math.log(t.sigma) + 17.0, div, theta, theta
        )
        assert base == pytest.approx(shifted, abs=1e-9)
