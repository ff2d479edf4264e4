import numpy as np
import pytest

from ousv import (Constant, ExpClamped, OUParams, AccuracyError, AvgVarSamples,
                  CaseConstants, QuadSpec, EmpiricalCdf, InversionCdf,
                  sigma_roots_12, sigma_roots_34, exact_price, exact_price_fullform,
                  sample_avg_var, conditional_call_value)
from conftest import BS_REF, assert_within_se


def const_provider(sigma0=0.2, n=100):
    p = OUParams(1.0, 0.5, 0.0)
    return EmpiricalCdf(sample_avg_var(p, Constant(sigma0), 1.0, n, 16, seed=1))


@pytest.fixture(scope="module")
def exp_samples():
    p = OUParams(1.0, 0.5, 0.0)
    v = ExpClamped(a=0.2, b=1.0, lo=0.05, hi=0.6)
    return sample_avg_var(p, v, 1.0, 50_000, 256, seed=101)


class TestCaseConstants:
    def test_kappa_squared(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            S, K = rng.uniform(20, 200, size=2)
            r = rng.uniform(-0.05, 0.1)
            T = rng.uniform(0.1, 4.0)
            cc = CaseConstants.from_market(S, K, r, T)
            assert cc.kappa ** 2 == pytest.approx(2 * abs(cc.m), rel=1e-12, abs=1e-15)

    def test_boundary_belongs_to_case_one(self):
        cc = CaseConstants.from_market(100.0, 100.0, 0.0, 1.0)
        assert cc.m == 0.0 and cc.is_case_one


class TestRootFunctions:
    def test_zero_moneyness_factorization(self):
        # S = K, r = 0: m = 0
        lo, hi = sigma_roots_12(0.7, 100.0, 100.0, 0.0, 4.0)
        assert lo == pytest.approx(0.0, abs=1e-15)
        assert hi == pytest.approx(2 * 0.7 / 2.0, rel=1e-14)
        lo, hi = sigma_roots_34(-0.7, 100.0, 100.0, 0.0, 4.0)
        assert lo == pytest.approx(0.0, abs=1e-15)
        assert hi == pytest.approx(0.7, rel=1e-14)

    def test_absent_when_discriminant_negative(self):
        # m = ln(2) > 0 and s too small
        assert sigma_roots_12(0.1, 200.0, 100.0, 0.0, 1.0) is None
        # m < 0 and s too small
        assert sigma_roots_34(0.1, 100.0, 200.0, 0.0, 1.0) is None

    def test_quadratic_residuals(self):
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 300:
            S, K = rng.uniform(20, 200, size=2)
            r = rng.uniform(-0.05, 0.1)
            T = rng.uniform(0.1, 4.0)
            s = rng.uniform(-4.0, 4.0)
            m = np.log(S / K) + r * T
            pair = sigma_roots_12(s, S, K, r, T)
            if pair is not None:
                for sig in pair:
                    assert abs(0.5 * sig ** 2 * T - s * sig * np.sqrt(T) + m) < 1e-10
                assert pair[0] <= pair[1]
                checked += 1
            pair = sigma_roots_34(s, S, K, r, T)
            if pair is not None:
                for sig in pair:
                    assert abs(0.5 * sig ** 2 * T + s * sig * np.sqrt(T) - m) < 1e-10
                assert pair[0] <= pair[1]


class TestDegenerateDistribution:
    """Point-mass provider: the case formulas must collapse to Black-Scholes."""

    @pytest.mark.parametrize("strike", [80.0, 100.0, 120.0])
    def test_matches_black_scholes(self, strike):
        result = exact_price(100.0, strike, 0.05, 1.0, const_provider())
        assert result.price == pytest.approx(BS_REF[(100.0, strike, 0.05, 1.0, 0.2)],
                                             abs=1e-6)

    @pytest.mark.parametrize("strike", [80.0, 100.0, 120.0])
    def test_fullform_matches_black_scholes(self, strike):
        result = exact_price_fullform(100.0, strike, 0.05, 1.0, const_provider())
        assert result.price == pytest.approx(BS_REF[(100.0, strike, 0.05, 1.0, 0.2)],
                                             abs=1e-6)

    def test_inversion_provider_on_point_mass(self):
        p = OUParams(1.0, 0.5, 0.0)
        samples = sample_avg_var(p, Constant(0.2), 1.0, 100, 16, seed=1)
        provider = InversionCdf(samples)
        result = exact_price(100.0, 100.0, 0.05, 1.0, provider)
        assert result.price == pytest.approx(BS_REF[(100.0, 100.0, 0.05, 1.0, 0.2)],
                                             abs=1e-6)


class TestExactPrice:
    def test_forward_limit(self, exp_samples):
        result = exact_price(100.0, 1e-4, 0.05, 1.0, EmpiricalCdf(exp_samples))
        assert result.price == pytest.approx(100.0, abs=1e-4 * 100.0)

    def test_equals_mixing_identity(self, exp_samples):
        # with the empirical provider, the case-split integrals reproduce the
        # sample average of the inner conditional value (same underlying law)
        for K in (90.0, 105.13, 120.0):
            result = exact_price(100.0, K, 0.05, 1.0, EmpiricalCdf(exp_samples))
            mix = np.exp(-0.05) * conditional_call_value(
                100.0, K, 0.05, 1.0, np.sqrt(exp_samples.values)).mean()
            # the gap is Gauss-Legendre sampling of the empirical staircase,
            # far below the statistical stderr (~4e-2 at this sample size)
            assert result.price == pytest.approx(mix, abs=6e-3)

    def test_inversion_close_to_empirical(self, exp_samples):
        for K in (90.0, 110.0):
            pe = exact_price(100.0, K, 0.05, 1.0, EmpiricalCdf(exp_samples))
            pi = exact_price(100.0, K, 0.05, 1.0, InversionCdf(exp_samples))
            assert pi.price == pytest.approx(pe.price, abs=5e-3)

    def test_no_arbitrage_bounds(self, exp_samples):
        provider = EmpiricalCdf(exp_samples)
        for K in (60.0, 90.0, 105.0, 140.0):
            r = exact_price(100.0, K, 0.05, 1.0, provider)
            assert max(100.0 - K * np.exp(-0.05), 0.0) - 1e-6 <= r.price <= 100.0 + 1e-6

    def test_case_boundary_continuity(self, exp_samples):
        provider = EmpiricalCdf(exp_samples)
        K0 = 100.0 * np.exp(0.05)
        lo = exact_price(100.0, K0 * (1 - 1e-6), 0.05, 1.0, provider)
        hi = exact_price(100.0, K0 * (1 + 1e-6), 0.05, 1.0, provider)
        assert abs(lo.price - hi.price) < 1e-4 * 100.0

    def test_fullform_identity(self, exp_samples):
        for provider in (EmpiricalCdf(exp_samples), InversionCdf(exp_samples)):
            for K in (90.0, 105.13, 120.0):
                a = exact_price(100.0, K, 0.05, 1.0, provider)
                b = exact_price_fullform(100.0, K, 0.05, 1.0, provider)
                assert abs(a.price - b.price) < 1e-8 + 1e-6 * a.price

    def test_stderr_and_metadata(self, exp_samples):
        r = exact_price(100.0, 100.0, 0.05, 1.0, EmpiricalCdf(exp_samples),
                        config_digest="abc")
        assert r.method == "exact-empirical"
        assert r.stderr > 0
        assert r.n_paths == exp_samples.n_paths
        assert r.seed == exp_samples.seed
        assert r.config_digest == "abc"

    def test_quad_nodes_configurable(self, exp_samples):
        a = exact_price(100.0, 90.0, 0.05, 1.0, EmpiricalCdf(exp_samples),
                        QuadSpec(n_nodes=64))
        b = exact_price(100.0, 90.0, 0.05, 1.0, EmpiricalCdf(exp_samples),
                        QuadSpec(n_nodes=256))
        # node placements sample the empirical staircase differently; the gap
        # stays well below the provider's statistical stderr
        assert a.price == pytest.approx(b.price, abs=8e-3)


class TestRootConsistency:
    def test_case_one_bracket_vs_direct_mc(self, exp_samples):
        # the case-1 inner bracket equals Q(s < d1) distributionally; compare
        # the provider bracket against an independent direct estimate
        p = OUParams(1.0, 0.5, 0.0)
        v = ExpClamped(a=0.2, b=1.0, lo=0.05, hi=0.6)
        other = sample_avg_var(p, v, 1.0, 50_000, 256, seed=999)
        S, K, r, T = 100.0, 90.0, 0.05, 1.0
        provider = EmpiricalCdf(exp_samples)
        cc = CaseConstants.from_market(S, K, r, T)
        sigma_bar = np.sqrt(other.values)
        d1 = (np.log(S / K) + r * T) / (sigma_bar * np.sqrt(T)) \
            + 0.5 * sigma_bar * np.sqrt(T)
        for s in np.linspace(cc.kappa + 1e-6, 4.0, 20):
            lo, hi = sigma_roots_12(s, S, K, r, T)
            bracket = float(provider.cdf_sigma(np.array([lo]))[0]
                            + 1.0 - provider.cdf_sigma(np.array([hi]))[0])
            direct = float((s < d1).mean())
            pa = min(max(bracket, 1e-6), 1 - 1e-6)
            se = np.sqrt(pa * (1 - pa) / len(exp_samples)
                         + direct * (1 - direct) / len(other) + 1e-12)
            assert_within_se(bracket, direct, se)


class TestAtomHandling:
    def test_cdf_zero_for_nonpositive(self, exp_samples):
        for provider in (EmpiricalCdf(exp_samples), InversionCdf(exp_samples)):
            np.testing.assert_array_equal(provider.cdf_sigma(np.array([-1.0, 0.0])),
                                          [0.0, 0.0])

    def test_negative_root_terms_vanish(self, exp_samples):
        # for negative moneyness the lower root sigma_1 is negative on the whole
        # line, so its probability terms in the unsimplified forms are zero
        S, K, r, T = 100.0, 120.0, 0.05, 1.0
        provider = EmpiricalCdf(exp_samples)
        for s in (-3.0, -0.5, 0.0, 0.5, 3.0):
            lo, _ = sigma_roots_12(s, S, K, r, T)
            assert lo < 0
            assert provider.cdf_sigma(np.array([lo]))[0] == 0.0

    def test_material_atom_rejected(self):
        rng = np.random.default_rng(0)
        values = rng.uniform(0.01, 0.25, size=5000)
        values[:100] = 0.04  # 2% repeat mass among a continuum
        samples = AvgVarSamples(values, seed=0, n_paths=5000, grid_n=16,
                                var_lower=0.0025, var_upper=0.36)
        with pytest.raises(AccuracyError):
            EmpiricalCdf(samples)

    def test_few_atoms_declared(self):
        values = np.tile(np.array([0.04, 0.09, 0.16]), 100)
        samples = AvgVarSamples(values, seed=0, n_paths=300, grid_n=16,
                                var_lower=0.01, var_upper=0.25)
        provider = EmpiricalCdf(samples)
        np.testing.assert_allclose(provider.atoms_sigma, [0.2, 0.3, 0.4])

    def test_three_point_mixture_prices_exactly(self):
        # three atoms: the case integrals decompose into exact BS averages
        values = np.repeat(np.array([0.02, 0.04, 0.09]), [50, 30, 20])
        samples = AvgVarSamples(values, seed=0, n_paths=100, grid_n=16,
                                var_lower=0.01, var_upper=0.25)
        provider = EmpiricalCdf(samples)
        for K in (85.0, 100.0, 115.0):
            got = exact_price(100.0, K, 0.05, 1.0, provider)
            ref = np.exp(-0.05) * conditional_call_value(
                100.0, K, 0.05, 1.0, np.sqrt(values)).mean()
            assert got.price == pytest.approx(ref, abs=1e-9)
