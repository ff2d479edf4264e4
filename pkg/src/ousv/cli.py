"""Batch command-line interface.

Every command reads one config file, runs a pricing or diagnostic job and
writes CSV (17 significant digits, '.' decimal separator). Outputs are
written atomically: a failed run leaves no partial artifact behind.
"""
from __future__ import annotations

import math
import os
import sys
import tempfile
from pathlib import Path

import click
import numpy as np

from . import avgvar, mc, pricing
from .config import ConfigError, RunConfig, config_digest, parse_config
from .conditional import ModelParams
from .ou import TimeGrid, simulate_ou_batch
from .rng import normal_stream
from .vols import vol_eval

METHODS = ("mc-terminal", "mc-mixing", "exact-empirical", "exact-inversion",
           "exact-fullform")

_USER_ERRORS = (ConfigError, mc.MethodNotApplicableError, avgvar.AccuracyError,
                avgvar.TrustRadiusError)


def _friendly_errors(fn):
    """Report domain errors as messages with a nonzero exit, not tracebacks."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _USER_ERRORS as exc:
            raise click.ClickException(str(exc)) from exc
    return wrapper


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _resolve_out(config: RunConfig, out_opt, default_name: str) -> Path:
    path = Path(out_opt) if out_opt else Path(config.out_path or default_name)
    env_dir = os.environ.get("OUSV_OUT_DIR")
    if env_dir:
        path = Path(env_dir) / path.name
    return path


def _write_csv(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(path: str, seed_override) -> RunConfig:
    config = parse_config(Path(path).read_text())
    if seed_override is not None:
        config = RunConfig(**{**config.__dict__, "seed": seed_override})
    return config


def _require_mmm(config: RunConfig, what: str) -> None:
    if not config.measure.is_mmm:
        raise mc.MethodNotApplicableError(
            f"{what} requires measure.rho = 0 and measure.nu = 0 "
            f"(got rho={config.measure.rho}, nu={config.measure.nu})")


def _samples(config: RunConfig) -> avgvar.AvgVarSamples:
    return avgvar.sample_avg_var(config.model.ou, config.model.vol,
                                 config.option.maturity, config.n_paths,
                                 config.grid_n, config.seed)


def _run_method(config: RunConfig, method: str, samples=None) -> mc.PriceResult:
    model, option = config.model, config.option
    digest = config_digest(config)
    common = dict(n_paths=config.n_paths, grid_n=config.grid_n,
                  seed=config.seed, config_digest=digest)
    if method == "mc-terminal":
        return mc.mc_price_terminal(model, option, config.measure, **common)
    if method == "mc-mixing":
        return mc.mc_price_mixing(model, option, config.measure,
                                  samples=samples, **common)
    if samples is None:
        samples = _samples(config)
    quad = pricing.QuadSpec(n_nodes=config.quad_nodes)
    mkt = model.market
    if method == "exact-empirical":
        return pricing.exact_price(mkt.spot, option.strike, mkt.rate,
                                   option.maturity, pricing.EmpiricalCdf(samples),
                                   quad, config_digest=digest)
    if method == "exact-inversion":
        provider = pricing.InversionCdf(samples, u_max=config.inversion_u)
        return pricing.exact_price(mkt.spot, option.strike, mkt.rate,
                                   option.maturity, provider, quad,
                                   config_digest=digest)
    if method == "exact-fullform":
        return pricing.exact_price_fullform(mkt.spot, option.strike, mkt.rate,
                                            option.maturity,
                                            pricing.EmpiricalCdf(samples), quad,
                                            config_digest=digest)
    raise click.UsageError(f"unknown method {method!r}")


@click.group()
def main():
    """Price European calls under OU-driven stochastic volatility."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--method", required=True, type=click.Choice(METHODS))
@click.option("--out", "out_opt", default=None, help="Output CSV path.")
@click.option("--seed", type=int, default=None, help="Override numerics.seed.")
@_friendly_errors
def price(config_path, method, out_opt, seed):
    """Price the configured option with one method."""
    config = _load_config(config_path, seed)
    _require_mmm(config, f"method {method}")
    result = _run_method(config, method)
    out = _resolve_out(config, out_opt, "price.csv")
    _write_csv(out, ["method", "price", "stderr", "n_paths", "seed"],
               [[result.method, result.price, result.stderr,
                 result.n_paths, result.seed]])
    click.echo(f"{result.method}: price={result.price:.6f} stderr={result.stderr:.6f} "
               f"-> {out}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_opt", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--points", type=int, default=101, show_default=True,
              help="Number of x grid points.")
@_friendly_errors
def dist(config_path, out_opt, seed, points):
    """Dump empirical and inversion CDFs of the averaged variance."""
    config = _load_config(config_path, seed)
    _require_mmm(config, "dist")
    samples = _samples(config)
    xs = np.linspace(samples.values.min(), samples.values.max(), points)
    f_emp = avgvar.empirical_cdf(samples, xs)
    inverter = avgvar.GilPelaezInverter(lambda u: avgvar.char_fn_mc(samples, u),
                                        samples.var_lower, samples.var_upper,
                                        u_max=config.inversion_u)
    f_inv = avgvar.cdf_from_charfn(None, xs, samples.var_lower, samples.var_upper,
                                   inverter=inverter)
    out = _resolve_out(config, out_opt, "dist.csv")
    _write_csv(out, ["x", "cdf_empirical", "cdf_inversion"],
               list(zip(xs, f_emp, f_inv)))
    click.echo(f"wrote {points} CDF rows (inversion residual "
               f"{inverter.residual_estimate:.2e}) -> {out}")


@main.command("sample-paths")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_opt", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--paths", "n_paths", type=int, default=8, show_default=True,
              help="Number of paths to dump.")
@_friendly_errors
def sample_paths(config_path, out_opt, seed, n_paths):
    """Dump volatility-driver trajectories as path,t,y,sigma rows.

    Under the minimal martingale measure paths use exact OU transitions;
    any other measure spec switches to the Euler scheme for the
    risk-neutral driver dynamics (experimental; step count doubled).
    """
    config = _load_config(config_path, seed)
    model, T = config.model, config.option.maturity
    if config.measure.is_mmm:
        grid = TimeGrid.uniform(T, config.grid_n)
        y = simulate_ou_batch(model.ou, grid, config.seed, n_paths)
        times = grid.times
    else:
        times, y = _euler_driver_paths(model, config.measure, T,
                                       2 * config.grid_n, config.seed, n_paths)
    sig = vol_eval(model.vol, y)
    rows = [[p, t, y[p, i], sig[p, i]]
            for p in range(n_paths) for i, t in enumerate(times)]
    out = _resolve_out(config, out_opt, "paths.csv")
    _write_csv(out, ["path", "t", "y", "sigma"], rows)
    click.echo(f"wrote {n_paths} paths x {len(times)} points -> {out}")


def _euler_driver_paths(model: ModelParams, measure, T, steps, seed, n_paths):
    mkt, ou, vol = model.market, model.ou, model.vol
    dt = T / steps
    rho_c = math.sqrt(1.0 - measure.rho ** 2)
    z = normal_stream(seed, 0, n_paths, steps)
    y = np.empty((n_paths, steps + 1))
    y[:, 0] = ou.y0
    for i in range(steps):
        sig = vol_eval(vol, y[:, i])
        drift = -ou.alpha * y[:, i] - ou.k_vol * (
            measure.rho * (mkt.drift - mkt.rate) / sig + measure.nu * rho_c)
        y[:, i + 1] = y[:, i] + drift * dt + ou.k_vol * math.sqrt(dt) * z[:, i]
    return np.linspace(0.0, T, steps + 1), y


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_opt", default=None)
@click.option("--seed", type=int, default=None)
@_friendly_errors
def check(config_path, out_opt, seed):
    """Run the martingale and Girsanov-density diagnostics."""
    config = _load_config(config_path, seed)
    _require_mmm(config, "check")
    model, option = config.model, config.option
    mart = mc.martingale_check(model, option, n_paths=config.n_paths,
                               grid_n=config.grid_n, seed=config.seed)
    dens = mc.density_check(model, option.maturity, n_paths=config.n_paths,
                            grid_n=config.grid_n, seed=config.seed)
    rows = []
    click.echo(f"martingale check (spot {model.market.spot}):")
    for c in mart.checkpoints:
        status = "PASS" if c.passed else "FAIL"
        click.echo(f"  t={c.t:g}: mean={c.mean:.6f} stderr={c.stderr:.6f} "
                   f"z={c.z:+.2f} {status}")
        rows.append(["martingale", c.t, c.mean, c.stderr, c.z, status])
    click.echo(f"  EMM integrability bound: {mart.emm_bound:.6g} (finite)")
    rows.append(["emm_bound", option.maturity, mart.emm_bound, 0.0, 0.0,
                 "PASS" if math.isfinite(mart.emm_bound) else "FAIL"])
    dstat = "PASS" if dens.passed else "FAIL"
    click.echo(f"density check: E[L_T]={dens.mean:.6f} stderr={dens.stderr:.6f} "
               f"z={dens.z:+.2f} {dstat}")
    if model.market.drift == model.market.rate:
        click.echo("  (drift equals rate: L_T is identically 1)")
    click.echo(f"novikov exponent bound: {dens.novikov_bound:.6g} (finite)")
    rows.append(["density", option.maturity, dens.mean, dens.stderr, dens.z, dstat])
    rows.append(["novikov_bound", option.maturity, dens.novikov_bound, 0.0, 0.0,
                 "PASS" if math.isfinite(dens.novikov_bound) else "FAIL"])
    out = _resolve_out(config, out_opt, "check.csv")
    _write_csv(out, ["check", "t", "mean", "stderr", "z", "status"], rows)
    overall = mart.passed and dens.passed
    click.echo(f"overall: {'PASS' if overall else 'FAIL'} -> {out}")
    if not overall:
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_opt", default=None)
@click.option("--seed", type=int, default=None)
@_friendly_errors
def compare(config_path, out_opt, seed):
    """Run every applicable method on one config and cross-check agreement.

    The averaged-variance sample set is generated once and shared, so the
    Monte Carlo and exact routes see common random numbers.
    """
    config = _load_config(config_path, seed)
    _require_mmm(config, "compare")
    samples = _samples(config)
    results = [_run_method(config, m, samples=samples) for m in METHODS]
    out = _resolve_out(config, out_opt, "compare.csv")
    _write_csv(out, ["method", "price", "stderr", "n_paths", "seed"],
               [[r.method, r.price, r.stderr, r.n_paths, r.seed] for r in results])
    zrows = []
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            a, b = results[i], results[j]
            combined = math.hypot(a.stderr, b.stderr)
            diff = a.price - b.price
            if combined > 0:
                z = diff / combined
            else:
                z = 0.0 if abs(diff) <= 1e-9 * (1.0 + abs(a.price)) else math.inf
            zrows.append([a.method, b.method, z])
    zpath = out.with_name(out.stem + "_zscores" + out.suffix)
    _write_csv(zpath, ["method_a", "method_b", "z"], zrows)
    for r in results:
        click.echo(f"  {r.method:>16s}: {r.price:.6f} +- {r.stderr:.6f}")
    worst = max(abs(z) for *_, z in zrows)
    click.echo(f"max |z| = {worst:.2f} -> {out}, {zpath}")


if __name__ == "__main__":
    main()
