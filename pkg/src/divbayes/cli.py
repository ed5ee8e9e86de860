"""Command-line front end.

Subcommands: ``simulate`` (experiment sweeps from a config file), ``are``
(asymptotic-relative-efficiency table), ``priors`` (log-prior tabulation),
``estimate`` (point and posterior estimates for a data file), ``verify``
(numerical check suite).

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._quadrature import DivBayesError
from .asymptotics import are_h
from .inference import importance_posterior_mean, minimum_divergence_estimate
from .losses import DivergenceSpec
from .priors import PriorSpec, log_prior
from .report import RunManifest, render_efficiency_curve, render_figures, write_summary_csv
from .simulation import ExperimentConfig, sweep
from .model import Theta

__all__ = ["main", "parse_divergence", "parse_config", "serialize_config", "ConfigError"]


class ConfigError(DivBayesError, ValueError):
    """A config file or option value could not be parsed."""


def parse_divergence(text: str) -> DivergenceSpec:
    """Parse ``kl``, ``alpha:<x>`` or ``gamma:<x>``."""
    token = text.strip().lower()
    if token == "kl":
        return DivergenceSpec.kl()
    if ":" in token:
        kind, _, raw = token.partition(":")
        if kind in ("alpha", "gamma"):
            try:
                value = float(raw)
            except ValueError:
                raise ConfigError(f"bad tuning value in divergence {text!r}") from None
            try:
                return DivergenceSpec(kind, value)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown divergence {text!r}; use kl | alpha:<x> | gamma:<x>")


_CONFIG_DEFAULTS = {
    "epsilon": "0.0",
    "nu": "6.0",
    "prior": "uniform",
    "replicates": "2000",
    "draws": "10000",
    "seed": "0",
}
_CONFIG_KEYS = set(_CONFIG_DEFAULTS) | {"n", "divergence"}


def _block_to_config(block: dict[str, str], line: int) -> ExperimentConfig:
    missing = {"n", "divergence"} - set(block)
    if missing:
        raise ConfigError(f"experiment block near line {line} is missing {sorted(missing)}")
    merged = {**_CONFIG_DEFAULTS, **block}
    try:
        return ExperimentConfig(
            eps=float(merged["epsilon"]),
            nu=float(merged["nu"]),
            n=int(merged["n"]),
            divergence=parse_divergence(merged["divergence"]),
            prior=PriorSpec.parse(merged["prior"]),
            n_replicates=int(merged["replicates"]),
            n_draws=int(merged["draws"]),
            base_seed=int(merged["seed"]),
        )
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"experiment block near line {line}: {exc}") from None


def parse_config(text: str) -> list[ExperimentConfig]:
    """Parse the flat ``key = value`` config format with [experiment] blocks."""
    configs: list[ExperimentConfig] = []
    block: dict[str, str] | None = None
    block_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower() == "[experiment]":
            if block is not None:
                configs.append(_block_to_config(block, block_line))
            block, block_line = {}, lineno
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if block is None:
            raise ConfigError(f"line {lineno}: key outside an [experiment] block")
        block[key] = value
    if block is not None:
        configs.append(_block_to_config(block, block_line))
    if not configs:
        raise ConfigError("config file declares no [experiment] blocks")
    return configs


def serialize_config(configs: list[ExperimentConfig]) -> str:
    """Inverse of parse_config; parse(serialize(c)) == c."""
    chunks = []
    for cfg in configs:
        chunks.append(
            "\n".join(
                [
                    "[experiment]",
                    f"epsilon = {cfg.eps:.10g}",
                    f"nu = {cfg.nu:.10g}",
                    f"n = {cfg.n}",
                    f"divergence = {cfg.divergence}",
                    f"prior = {cfg.prior}",
                    f"replicates = {cfg.n_replicates}",
                    f"draws = {cfg.n_draws}",
                    f"seed = {cfg.base_seed}",
                ]
            )
        )
    return "\n\n".join(chunks) + "\n"


def _read_data_file(path: Path) -> np.ndarray:
    values = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            value = float(line)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: not a number: {raw!r}") from None
        if not np.isfinite(value):
            raise ConfigError(f"{path}:{lineno}: non-finite value rejected")
        values.append(value)
    if not values:
        raise ConfigError(f"{path}: no data values found")
    return np.array(values)


def _cmd_simulate(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    try:
        configs = parse_config(config_path.read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.seed is not None:
        configs = [replace(cfg, base_seed=args.seed + i) for i, cfg in enumerate(configs)]
    if args.replicates is not None:
        configs = [replace(cfg, n_replicates=args.replicates) for cfg in configs]
    if args.draws is not None:
        configs = [replace(cfg, n_draws=args.draws) for cfg in configs]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest.start(str(config_path), str(out_dir), args.seed, __version__)

    results = sweep(configs, n_jobs=args.threads)
    failures = [(i, res) for i, res in enumerate(results) if res.table is None]
    write_summary_csv(out_dir / "summary.csv", results)
    manifest.finish(len(configs))
    manifest.write(out_dir / "manifest.json")
    if not args.no_figures:
        render_figures(out_dir, results)
    for i, res in failures:
        print(f"experiment {i} failed: {res.error}", file=sys.stderr)
    print(f"wrote {out_dir / 'summary.csv'} ({len(results) - len(failures)} rows)")
    return 3 if failures else 0


def _cmd_are(args: argparse.Namespace) -> int:
    try:
        gammas = [float(tok) for tok in args.gammas.split(",") if tok.strip()]
        if not gammas or any(g < 0 for g in gammas):
            raise ValueError
    except ValueError:
        print(f"error: malformed gamma list {args.gammas!r}", file=sys.stderr)
        return 2
    print("gamma,are")
    for g in gammas:
        print(f"{g:.10g},{are_h(g):.7f}")
    if args.plot:
        grid = np.linspace(0.0, max(max(gammas), 1.5), 301)
        render_efficiency_curve(Path(args.plot), grid, [are_h(g) for g in grid])
    return 0


def _cmd_priors(args: argparse.Namespace) -> int:
    try:
        div = parse_divergence(args.divergence)
        prior = PriorSpec.parse(args.prior)
        lo_s, hi_s, count_s = args.sigma.split(":")
        lo, hi, count = float(lo_s), float(hi_s), int(count_s)
        if not (0 < lo < hi and count >= 2):
            raise ValueError
    except (ValueError, ConfigError) as exc:
        print(f"error: {exc or 'bad --sigma grid'}", file=sys.stderr)
        return 2
    print("sigma,log_prior")
    for sigma in np.linspace(lo, hi, count):
        value = log_prior(prior, div, Theta(args.mu, float(sigma)))
        print(f"{sigma:.10g},{value if value != 0 else 0.0:.10g}")
    return 0


def _cmd_estimate(args: argparse.Namespace) -> int:
    try:
        div = parse_divergence(args.divergence)
        prior = PriorSpec.parse(args.prior)
        data = _read_data_file(Path(args.data))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot read data: {exc}", file=sys.stderr)
        return 2
    try:
        point = minimum_divergence_estimate(div, data)
        posterior, draws = importance_posterior_mean(
            div, prior, data, n_draws=args.draws, seed=args.seed
        )
    except DivBayesError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return 3
    print("method,mu,sigma,ess")
    print(f"point,{point.mu:.10g},{point.sigma:.10g},")
    print(f"posterior_mean,{posterior.mu:.10g},{posterior.sigma:.10g},{draws.ess:.1f}")
    if draws.low_ess:
        print(
            f"warning: effective sample size {draws.ess:.1f} below 5% of {args.draws} draws",
            file=sys.stderr,
        )
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    from .verify import run_all

    results = run_all(derivative_points=args.points)
    for res in results:
        print(res.line())
    failed = [res for res in results if not res.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="divbayes",
        description="Robust quasi-Bayesian estimation with divergence-based posteriors.",
    )
    parser.add_argument("--version", action="version", version=f"divbayes {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run experiment sweeps from a config file")
    p_sim.add_argument("--config", required=True, help="experiment config file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override base seeds")
    p_sim.add_argument("--threads", type=int, default=1, help="worker process cap")
    p_sim.add_argument("--replicates", type=int, default=None, help="override replicate count")
    p_sim.add_argument("--draws", type=int, default=None, help="override IS draw count")
    p_sim.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p_sim.set_defaults(func=_cmd_simulate)

    p_are = sub.add_parser("are", help="asymptotic relative efficiency table")
    p_are.add_argument("gammas", help="comma-separated gamma values")
    p_are.add_argument("--plot", default=None, help="also render the efficiency curve to this file")
    p_are.set_defaults(func=_cmd_are)

    p_pri = sub.add_parser("priors", help="tabulate the log prior over a sigma grid")
    p_pri.add_argument("--divergence", required=True, help="kl | alpha:<x> | gamma:<x>")
    p_pri.add_argument("--prior", required=True, help="uniform | reference | mm")
    p_pri.add_argument("--sigma", default="0.25:4:16", help="grid as lo:hi:count")
    p_pri.add_argument("--mu", type=float, default=0.0)
    p_pri.set_defaults(func=_cmd_priors)

    p_est = sub.add_parser("estimate", help="estimates for a data file (one number per line)")
    p_est.add_argument("data", help="input file; '#' starts a comment")
    p_est.add_argument("--divergence", default="gamma:0.5")
    p_est.add_argument("--prior", default="reference")
    p_est.add_argument("--draws", type=int, default=10_000)
    p_est.add_argument("--seed", type=int, default=0)
    p_est.set_defaults(func=_cmd_estimate)

    p_ver = sub.add_parser("verify", help="run the numerical verification suite")
    p_ver.add_argument("--points", type=int, default=100, help="derivative check sample size")
    p_ver.set_defaults(func=_cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivBayesError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
