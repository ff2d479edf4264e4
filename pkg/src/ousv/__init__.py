"""European call pricing under volatility driven by an Ornstein-Uhlenbeck process.

The market is dS = mu*S dt + sigma(Y)*S dB with dY = -alpha*Y dt + k dW and
sigma a bounded, bounded-away-from-zero function. Pricing is done under the
minimal martingale measure for independent drivers, along several mutually
cross-checking routes: conditional (mixing) Monte Carlo, terminal-payoff
Monte Carlo, and case-split formulas fed by the distribution of the
averaged variance (empirical or Fourier-inverted).
"""
from .ou import OUParams, TimeGrid, OUPath, ou_mean, ou_variance, ou_covariance, \
    simulate_ou, simulate_ou_batch
from .vols import Constant, ExpClamped, SigmoidAffine, VolSpec, vol_eval, vol_bounds
from .conditional import MarketParams, OptionSpec, AvgVol, ModelParams, \
    DegenerateVolatilityError, std_normal_cdf, bs_d1_d2, conditional_call_value, \
    avg_var_forward
from .avgvar import AvgVarSamples, MomentVector, MomentEstimate, CharFnExpansion, \
    AccuracyError, TrustRadiusError, sample_avg_var, empirical_cdf, char_fn_mc, \
    moment_m, char_fn_moments, cdf_from_charfn, GilPelaezInverter
from .pricing import CaseConstants, QuadSpec, EmpiricalCdf, InversionCdf, \
    sigma_roots_12, sigma_roots_34, exact_price, exact_price_fullform
from .mc import PriceResult, MeasureSpec, MethodNotApplicableError, \
    mc_price_terminal, mc_price_mixing, martingale_check, density_check, \
    MartingaleReport, DensityReport
from .config import RunConfig, ConfigError, parse_config, render_config, config_digest

__version__ = "0.1.0"
