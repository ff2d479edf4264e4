import numpy as np
import pytest

from ousv import (Constant, ExpClamped, MarketParams, MeasureSpec, ModelParams,
                  MethodNotApplicableError, OptionSpec, OUParams, PriceResult,
                  mc_price_terminal, mc_price_mixing, martingale_check,
                  density_check, sample_avg_var, conditional_call_value)
from ousv.mc import _avg_var_values
from conftest import BS_REF, assert_within_se


class TestPriceResult:
    def test_negative_stderr_rejected(self):
        with pytest.raises(ValueError):
            PriceResult(price=1.0, stderr=-0.1, method="x", n_paths=1, seed=0)

    def test_tiny_negative_price_clamped(self):
        r = PriceResult(price=-1e-12, stderr=0.0, method="x", n_paths=1, seed=0)
        assert r.price == 0.0

    def test_large_negative_price_rejected(self):
        with pytest.raises(ValueError):
            PriceResult(price=-0.5, stderr=0.0, method="x", n_paths=1, seed=0)


class TestMeasureSpec:
    def test_rho_domain(self):
        with pytest.raises(ValueError):
            MeasureSpec(rho=1.5)

    def test_mmm_flag(self):
        assert MeasureSpec().is_mmm
        assert not MeasureSpec(rho=0.3).is_mmm
        assert not MeasureSpec(nu=0.1).is_mmm


class TestTerminal:
    def test_constant_vol_matches_bs(self, const_model, atm_option):
        r = mc_price_terminal(const_model, atm_option, n_paths=100_000,
                              grid_n=64, seed=3)
        assert_within_se(r.price, BS_REF[(100.0, 100.0, 0.05, 1.0, 0.2)], r.stderr)

    def test_tiny_strike_forward_identity(self, exp_model):
        # for K ~ 0 the discounted payoff mean is the spot (martingale identity)
        option = OptionSpec(strike=1e-9, maturity=1.0)
        r = mc_price_terminal(exp_model, option, n_paths=50_000, grid_n=64, seed=9)
        assert_within_se(r.price, 100.0, r.stderr)

    def test_reproducible(self, exp_model, atm_option):
        a = mc_price_terminal(exp_model, atm_option, n_paths=5000, grid_n=32, seed=7)
        b = mc_price_terminal(exp_model, atm_option, n_paths=5000, grid_n=32, seed=7)
        assert a == b

    def test_chunking_invariance(self, exp_model, atm_option, monkeypatch):
        import ousv.mc as mcmod
        a = mc_price_terminal(exp_model, atm_option, n_paths=3000, grid_n=16, seed=7)
        monkeypatch.setattr(mcmod, "PATH_CHUNK", 1024)
        b = mc_price_terminal(exp_model, atm_option, n_paths=3000, grid_n=16, seed=7)
        assert a == b


class TestMixing:
    def test_constant_vol_degenerate(self, const_model, atm_option):
        r = mc_price_mixing(const_model, atm_option, n_paths=2000, grid_n=32, seed=5)
        assert r.stderr == 0.0
        assert r.price == pytest.approx(BS_REF[(100.0, 100.0, 0.05, 1.0, 0.2)],
                                        abs=1e-10)

    def test_deterministic_vol_path(self, atm_option):
        model = ModelParams(MarketParams(100.0, 0.05, 0.1),
                            OUParams(alpha=1.0, k_vol=0.0, y0=0.3),
                            ExpClamped(a=0.2, b=1.0, lo=0.05, hi=0.6))
        r = mc_price_mixing(model, atm_option, n_paths=100, grid_n=512, seed=5)
        assert r.stderr == 0.0
        # equals BS at the time-averaged deterministic variance
        from ousv import vol_eval
        ts = np.linspace(0.0, 1.0, 513)
        avg_var = np.trapezoid(vol_eval(model.vol, 0.3 * np.exp(-ts)) ** 2, ts)
        ref = np.exp(-0.05) * conditional_call_value(100.0, 100.0, 0.05, 1.0,
                                                     np.sqrt(avg_var))
        assert r.price == pytest.approx(ref, rel=1e-12)

    def test_agrees_with_terminal(self, exp_model, atm_option):
        mix = mc_price_mixing(exp_model, atm_option, n_paths=20_000, grid_n=128, seed=11)
        term = mc_price_terminal(exp_model, atm_option, n_paths=20_000, grid_n=128, seed=11)
        assert_within_se(mix.price, term.price, np.hypot(mix.stderr, term.stderr))

    def test_variance_reduction(self, exp_model, atm_option):
        mix = mc_price_mixing(exp_model, atm_option, n_paths=20_000, grid_n=128, seed=11)
        term = mc_price_terminal(exp_model, atm_option, n_paths=20_000, grid_n=128, seed=11)
        assert mix.stderr < term.stderr

    def test_rho_not_applicable(self, exp_model, atm_option):
        with pytest.raises(MethodNotApplicableError):
            mc_price_mixing(exp_model, atm_option, MeasureSpec(rho=0.5),
                            n_paths=100, grid_n=16, seed=1)

    def test_reuses_sample_set(self, exp_model, atm_option):
        s = sample_avg_var(exp_model.ou, exp_model.vol, 1.0, 5000, 64, seed=13)
        a = mc_price_mixing(exp_model, atm_option, samples=s)
        b = mc_price_mixing(exp_model, atm_option, n_paths=5000, grid_n=64, seed=13)
        assert a.price == pytest.approx(b.price, rel=1e-14)


class TestAntithetic:
    def test_flip_invariance(self, exp_model, atm_option):
        # the antithetic estimator averages the two mirrored legs, so negating
        # every Gaussian increment permutes the legs and cannot change it
        legs = [_avg_var_values(exp_model, 1.0, 2000, 32, seed=17, sign=s)
                for s in (+1.0, -1.0)]
        inner = [conditional_call_value(100.0, 100.0, 0.05, 1.0, np.sqrt(v))
                 for v in legs]
        fwd = (0.5 * (inner[0] + inner[1])).mean()
        flipped = (0.5 * (inner[1] + inner[0])).mean()
        assert fwd == flipped

    def test_antithetic_price_is_leg_average(self, exp_model, atm_option):
        r = mc_price_mixing(exp_model, atm_option, n_paths=2000, grid_n=32,
                            seed=17, antithetic=True)
        legs = [_avg_var_values(exp_model, 1.0, 2000, 32, seed=17, sign=s)
                for s in (+1.0, -1.0)]
        inner = np.mean([conditional_call_value(100.0, 100.0, 0.05, 1.0, np.sqrt(v))
                         for v in legs], axis=0)
        assert r.price == pytest.approx(np.exp(-0.05) * inner.mean(), rel=1e-14)

    def test_terminal_antithetic_runs(self, exp_model, atm_option):
        r = mc_price_terminal(exp_model, atm_option, n_paths=4000, grid_n=32,
                              seed=19, antithetic=True)
        plain = mc_price_terminal(exp_model, atm_option, n_paths=4000, grid_n=32,
                                  seed=19)
        assert_within_se(r.price, plain.price, 3 * plain.stderr)


class TestPutCallParity:
    def test_parity_from_shared_paths(self, exp_model):
        from ousv.mc import _martingale_exponents
        K, T = 100.0, 1.0
        acc = _martingale_exponents(exp_model, T, 50_000, 128, seed=23,
                                    checkpoints_steps=[128], antithetic=False)[0][:, 0]
        st = 100.0 * np.exp(0.05) * np.exp(acc)
        disc = np.exp(-0.05)
        diff = disc * (np.maximum(st - K, 0.0) - np.maximum(K - st, 0.0))
        se = diff.std(ddof=1) / np.sqrt(len(diff))
        target = 100.0 - K * disc
        assert_within_se(diff.mean(), target, se)


class TestExperimentalMeasure:
    def test_terminal_with_correlation_keeps_martingale(self, exp_model):
        # discounted S_T must have mean S under any valid pricing measure
        r = mc_price_terminal(exp_model, OptionSpec(strike=1e-9, maturity=1.0),
                              MeasureSpec(rho=0.5, nu=0.2),
                              n_paths=50_000, grid_n=128, seed=29)
        assert r.method == "mc-terminal-experimental"
        assert_within_se(r.price, 100.0, r.stderr)


class TestMartingaleCheck:
    def test_time_zero_checkpoint_exact(self, exp_model, atm_option):
        rep = martingale_check(exp_model, atm_option, n_paths=500, grid_n=16,
                               seed=31, t_checkpoints=(0.0, 1.0))
        first = rep.checkpoints[0]
        assert first.mean == 100.0 and first.stderr == 0.0 and first.passed

    def test_constant_vol_passes(self, const_model, atm_option):
        rep = martingale_check(const_model, atm_option, n_paths=50_000,
                               grid_n=64, seed=37)
        assert rep.passed

    def test_exp_vol_passes(self, exp_model, atm_option):
        rep = martingale_check(exp_model, atm_option, n_paths=50_000,
                               grid_n=128, seed=41)
        assert rep.passed
        assert len(rep.checkpoints) == 3

    def test_emm_integrability_bound(self, exp_model, atm_option):
        rep = martingale_check(exp_model, atm_option, n_paths=200, grid_n=16, seed=1)
        expected = 0.6 ** 2 * 1.0 * 100.0 ** 2 * np.exp(0.6 ** 2)
        assert rep.emm_bound == pytest.approx(expected, rel=1e-12)
        assert np.isfinite(rep.emm_bound)


class TestDensityCheck:
    def test_drift_equals_rate_degenerate(self, atm_option):
        model = ModelParams(MarketParams(100.0, 0.05, 0.05),
                            OUParams(1.0, 0.5, 0.0), Constant(0.2))
        rep = density_check(model, 1.0, n_paths=1000, grid_n=16, seed=43)
        assert rep.mean == 1.0 and rep.stderr == 0.0 and rep.passed
        assert rep.novikov_bound == 0.0

    def test_constant_vol_unit_mean(self, const_model):
        rep = density_check(const_model, 1.0, n_paths=50_000, grid_n=64, seed=47)
        assert rep.passed
        assert abs(rep.mean - 1.0) <= 3 * rep.stderr

    def test_novikov_bound_formula(self, exp_model):
        rep = density_check(exp_model, 1.0, n_paths=100, grid_n=16, seed=1)
        expected = 0.5 * 1.0 * (0.05 - 0.1) ** 2 / 0.05 ** 2
        assert rep.novikov_bound == pytest.approx(expected, rel=1e-12)
        assert np.isfinite(rep.novikov_bound)
